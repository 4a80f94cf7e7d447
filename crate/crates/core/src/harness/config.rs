use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::corpus::{builtin_scale, ManifestLayout, ScaleKind, SeverityScale};
use crate::metrics::ScoringMode;
use crate::prompts::{ExampleOrder, ExemplarPool, TemplateStore};
use crate::providers::{load_providers, ProviderConfig, TranscriptionAdapter};
use crate::task::{Modality, ShotMode, Task, Variant};

fn yes() -> bool {
    true
}
fn generic_layout() -> ManifestLayout {
    ManifestLayout::GenericCsv
}
fn all_modalities() -> Vec<Modality> {
    Modality::ALL.to_vec()
}
fn default_k() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotConfig {
    #[serde(default = "zero_shot")]
    pub mode: ShotMode,
    #[serde(default)]
    pub pool: ExemplarPool,
    #[serde(default)]
    pub order: ExampleOrder,
    /// Exemplar count for near-miss selection (severity and multiclass tasks).
    #[serde(default = "default_k")]
    pub near_miss_k: usize,
    /// Evaluate exemplar participants too, showing them their own transcript as an example.
    #[serde(default = "yes")]
    pub include_exemplar_subjects: bool,
    /// Zero-shot run used for near-miss selection and for report deltas.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_shot_run: Option<PathBuf>,
}

fn zero_shot() -> ShotMode {
    ShotMode::ZeroShot
}

impl Default for ShotConfig {
    fn default() -> Self {
        ShotConfig {
            mode: ShotMode::ZeroShot,
            pool: ExemplarPool::default(),
            order: ExampleOrder::default(),
            near_miss_k: default_k(),
            include_exemplar_subjects: true,
            zero_shot_run: None,
        }
    }
}

/// One experiment grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub manifest_path: PathBuf,
    #[serde(default = "generic_layout")]
    pub manifest_layout: ManifestLayout,
    #[serde(default = "yes")]
    pub apply_corrections: bool,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    pub tasks: Vec<Task>,
    /// Prompt variants per task name; tasks not listed use all their variants.
    #[serde(default)]
    pub variants: BTreeMap<String, Vec<Variant>>,
    #[serde(default = "all_modalities")]
    pub modalities: Vec<Modality>,
    /// Provider names to run; empty means every defined provider.
    #[serde(default)]
    pub providers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub providers_file: Option<PathBuf>,
    #[serde(default, rename = "provider")]
    pub provider_defs: Vec<ProviderConfig>,
    /// Severity scales per severity task name; the first is the primary scale.
    #[serde(default)]
    pub severity_scales: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub scoring_mode: ScoringMode,
    #[serde(default)]
    pub reprompt_invalid: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default)]
    pub shot: ShotConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcription: Option<TranscriptionAdapter>,
}

impl ExperimentConfig {
    /// Minimal config over one manifest with one provider.
    pub fn new(
        manifest_path: impl Into<PathBuf>,
        output_dir: impl Into<PathBuf>,
        tasks: Vec<Task>,
        provider: ProviderConfig,
    ) -> Self {
        ExperimentConfig {
            manifest_path: manifest_path.into(),
            manifest_layout: ManifestLayout::GenericCsv,
            apply_corrections: true,
            output_dir: output_dir.into(),
            seed: 0,
            tasks,
            variants: BTreeMap::new(),
            modalities: Modality::ALL.to_vec(),
            providers: Vec::new(),
            providers_file: None,
            provider_defs: vec![provider],
            severity_scales: BTreeMap::new(),
            scoring_mode: ScoringMode::default(),
            reprompt_invalid: 0,
            templates_dir: None,
            cache_dir: None,
            workers: None,
            shot: ShotConfig::default(),
            transcription: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::ConfigInvalid(e.to_string()))
    }

    /// Reads a config file, resolving relative paths against its directory and
    /// folding `providers_file` into the inline provider list.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.inline_provider_file()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.manifest_path);
        fix(&mut self.output_dir);
        for p in [&mut self.providers_file, &mut self.templates_dir, &mut self.cache_dir, &mut self.shot.zero_shot_run]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        if let Some(TranscriptionAdapter::PrecomputedFile { dir: Some(d) }) = &mut self.transcription {
            fix(d);
        }
    }

    pub fn inline_provider_file(&mut self) -> Result<(), HarnessError> {
        if let Some(path) = self.providers_file.take() {
            for p in load_providers(&path)? {
                if self.provider_defs.iter().any(|d| d.name == p.name) {
                    return Err(HarnessError::ConfigInvalid(format!("provider `{}` defined twice", p.name)));
                }
                self.provider_defs.push(p);
            }
        }
        Ok(())
    }

    /// The config as stored in `run.manifest`.
    pub fn snapshot(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::ConfigInvalid(format!("cannot serialize config: {e}")))
    }

    /// Distinct tasks in canonical order.
    pub fn task_list(&self) -> Vec<Task> {
        self.tasks.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn modality_list(&self) -> Vec<Modality> {
        self.modalities.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn variants_for(&self, task: Task) -> Vec<Variant> {
        match self.variants.get(task.as_str()) {
            Some(v) => v.iter().copied().collect::<BTreeSet<_>>().into_iter().collect(),
            None => task.variants().to_vec(),
        }
    }

    /// Selected providers, sorted by name.
    pub fn selected_providers(&self) -> Result<Vec<ProviderConfig>, HarnessError> {
        let mut out: Vec<ProviderConfig> = if self.providers.is_empty() {
            self.provider_defs.clone()
        } else {
            self.providers
                .iter()
                .map(|n| {
                    self.provider_defs
                        .iter()
                        .find(|p| &p.name == n)
                        .cloned()
                        .ok_or_else(|| HarnessError::ConfigInvalid(format!("unknown provider `{n}`")))
                })
                .collect::<Result<_, _>>()?
        };
        out.sort_by(|a, b| a.name.cmp(&b.name));
        out.dedup_by(|a, b| a.name == b.name);
        Ok(out)
    }

    /// Scales for a severity task; the first is primary.
    pub fn scales_for(&self, task: Task) -> Result<Vec<SeverityScale>, HarnessError> {
        let default = match task {
            Task::DepSeverity => vec!["depression_phq8".to_string()],
            _ => vec!["ptsd_reference".to_string()],
        };
        let names = self.severity_scales.get(task.as_str()).filter(|v| !v.is_empty()).cloned().unwrap_or(default);
        names.iter().map(|n| Ok(builtin_scale(n)?.clone())).collect()
    }

    /// Primary scale for PTSD severity truths.
    pub fn ptsd_scale(&self) -> Result<SeverityScale, HarnessError> {
        Ok(self.scales_for(Task::PtsdSeverity)?.remove(0))
    }

    pub fn template_store(&self) -> Result<TemplateStore, HarnessError> {
        Ok(match &self.templates_dir {
            Some(d) => TemplateStore::from_dir(d)?,
            None => TemplateStore::builtin(),
        })
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::ConfigInvalid(m));
        if self.tasks.is_empty() {
            return bad("no tasks selected".into());
        }
        if self.modalities.is_empty() {
            return bad("no modalities selected".into());
        }
        let providers = self.selected_providers()?;
        if providers.is_empty() {
            return bad("no providers configured".into());
        }
        for p in &providers {
            p.validate()?;
            if !p.supports_audio {
                if let Some(m) = self.modalities.iter().find(|m| m.needs_audio()) {
                    return bad(format!("provider `{}` does not support audio but modality {m} is selected", p.name));
                }
            }
        }
        for name in self.variants.keys() {
            let task: Task = name.parse().map_err(HarnessError::ConfigInvalid)?;
            if !self.tasks.contains(&task) {
                return bad(format!("variants given for unselected task {task}"));
            }
        }
        let store = self.template_store()?;
        for task in self.task_list() {
            let variants = self.variants_for(task);
            if variants.is_empty() {
                return bad(format!("no variants for {task}"));
            }
            for v in variants {
                if !task.variants().contains(&v) {
                    return bad(format!("{task} has no prompt variant {v}"));
                }
                store.template(task, v)?;
            }
        }
        for (name, scales) in &self.severity_scales {
            let task: Task = name.parse().map_err(HarnessError::ConfigInvalid)?;
            for s in scales {
                let scale = builtin_scale(s)?;
                let ok = match task {
                    Task::DepSeverity => scale.kind == ScaleKind::DepressionPhq8,
                    Task::PtsdSeverity => scale.kind != ScaleKind::DepressionPhq8,
                    _ => false,
                };
                if !ok {
                    return bad(format!("scale `{s}` does not apply to {task}"));
                }
            }
        }
        if self.shot.mode == ShotMode::FewShot {
            let needs_zs = self.tasks.iter().any(|t| t.kind() != crate::task::TaskKind::Binary);
            if needs_zs && self.shot.zero_shot_run.is_none() {
                return bad("few-shot severity/multiclass runs need shot.zero_shot_run for near-miss selection".into());
            }
            if self.shot.near_miss_k == 0 {
                return bad("shot.near_miss_k must be positive".into());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::MockBehavior;

    #[test]
    fn snapshot_round_trips() {
        let mut cfg = ExperimentConfig::new(
            "/m.csv",
            "/out",
            vec![Task::PtsdSeverity],
            ProviderConfig::mock("m", MockBehavior::default()),
        );
        cfg.severity_scales.insert("ptsd_severity".into(), vec!["ptsd_reference".into(), "ptsd_llm_gpt4o_mini".into()]);
        cfg.shot.zero_shot_run = Some("/zs".into());
        cfg.transcription = Some(TranscriptionAdapter::PrecomputedFile { dir: None });
        let text = cfg.snapshot().unwrap();
        assert_eq!(ExperimentConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn validation_catches_grid_errors() {
        let p = ProviderConfig::mock("m", MockBehavior::default());
        let mut cfg = ExperimentConfig::new("/m.csv", "/out", vec![], p.clone());
        assert!(matches!(cfg.validate(), Err(HarnessError::ConfigInvalid(_))));
        cfg.tasks = vec![Task::Multiclass];
        cfg.variants.insert("multiclass".into(), vec![Variant::P3]);
        assert!(cfg.validate().is_err());
        cfg.variants.clear();
        assert!(cfg.validate().is_ok());
        cfg.provider_defs[0].supports_audio = false;
        assert!(cfg.validate().is_err());
        cfg.modalities = vec![Modality::Text];
        assert!(cfg.validate().is_ok());
        cfg.severity_scales.insert("multiclass".into(), vec!["ptsd_reference".into()]);
        assert!(cfg.validate().is_err());
    }
}
