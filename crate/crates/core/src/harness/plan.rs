use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{read_predictions, ExperimentConfig, HarnessError, PREDICTIONS_FILE};
use crate::corpus::{apply_label_corrections, load_manifest, DatasetManifest, ParticipantRecord};
use crate::prompts::{select_few_shot_binary_with, select_few_shot_near_miss, FewShotExample, ZeroShotOutcome};
use crate::providers::Transcriber;
use crate::task::{Label, Modality, ShotMode, Task, TaskKind, Variant};

/// Manifest after corrections and optional transcription, with per-record
/// transcript provenance.
#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub manifest: DatasetManifest,
    pub provenance: BTreeMap<u32, String>,
}

/// Loads the configured manifest. Records with audio but no transcript get one
/// from the configured transcription adapter, written under `<output>/transcripts`.
pub fn load_corpus(cfg: &ExperimentConfig) -> Result<LoadedCorpus, HarnessError> {
    let raw = load_manifest(&cfg.manifest_path, cfg.manifest_layout)?;
    let mut manifest = if cfg.apply_corrections { apply_label_corrections(raw) } else { raw };
    let mut provenance = BTreeMap::new();
    let needs_text = cfg.modalities.iter().any(|m| m.needs_transcript());
    let transcriber = match (&cfg.transcription, needs_text) {
        (Some(a), true) => Some(Transcriber::new(a.clone(), Some(cfg.output_dir.join("transcripts").join("cache")))),
        _ => None,
    };
    for r in &mut manifest.records {
        if r.has_transcript() {
            provenance.insert(r.participant_id, "provided".to_string());
            continue;
        }
        let (Some(t), Some(audio)) = (&transcriber, r.audio_path.clone().filter(|_| r.has_audio())) else {
            continue;
        };
        match t.transcribe(&audio) {
            Ok(text) => {
                let path = cfg.output_dir.join("transcripts").join(format!("{}_Transcript.txt", r.participant_id));
                super::write_file(&path, text)?;
                r.transcript_path = Some(path);
                provenance.insert(r.participant_id, format!("asr:{}", t.adapter().name()));
            }
            Err(e) => log::warn!("participant {}: {e}", r.participant_id),
        }
    }
    Ok(LoadedCorpus { manifest, provenance })
}

/// One prompt to send.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedRequest {
    pub task: Task,
    pub variant: Variant,
    pub modality: Modality,
    pub provider: String,
    pub shot_mode: ShotMode,
    pub participant_id: u32,
    pub truth: Label,
    /// Raw PCL-C total for PTSD severity, rebinned per scale when scoring.
    pub truth_score: Option<i64>,
}

impl PlannedRequest {
    /// Stable identity of the request inside a run.
    pub fn key(&self) -> String {
        record_key(self.task, self.variant, self.modality, &self.provider, self.shot_mode, self.participant_id)
    }

    /// Key of the exemplar set this request uses in few-shot mode.
    pub fn exemplar_key(&self) -> String {
        exemplar_key(self.task, self.variant, self.modality, &self.provider)
    }
}

pub(crate) fn record_key(
    task: Task,
    variant: Variant,
    modality: Modality,
    provider: &str,
    shot: ShotMode,
    id: u32,
) -> String {
    format!("{task}|{variant}|{modality}|{provider}|{shot}|{id}")
}

fn exemplar_key(task: Task, variant: Variant, modality: Modality, provider: &str) -> String {
    match task.kind() {
        TaskKind::Binary => task.to_string(),
        _ => format!("{task}|{variant}|{modality}|{provider}"),
    }
}

/// A grid cell left out for one participant, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Exclusion {
    pub task: Task,
    pub variant: Variant,
    pub modality: Modality,
    pub provider: String,
    pub shot_mode: ShotMode,
    pub participant_id: u32,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct Plan {
    pub requests: Vec<PlannedRequest>,
    pub exclusions: Vec<Exclusion>,
    pub exemplars: BTreeMap<String, Vec<FewShotExample>>,
}

/// Expands the config into the ordered request list.
pub fn build_plan(cfg: &ExperimentConfig, corpus: &LoadedCorpus) -> Result<Plan, HarnessError> {
    let m = &corpus.manifest;
    let ptsd_scale = cfg.ptsd_scale()?;
    let providers = cfg.selected_providers()?;
    let mut records: Vec<&ParticipantRecord> = m.records.iter().collect();
    records.sort_by_key(|r| r.participant_id);
    let mut plan = Plan::default();

    if cfg.shot.mode == ShotMode::FewShot {
        plan.exemplars = select_exemplars(cfg, m, &providers.iter().map(|p| p.name.clone()).collect::<Vec<_>>())?;
    }

    for task in cfg.task_list() {
        for modality in cfg.modality_list() {
            for r in &records {
                let reason = if modality.needs_transcript() && !r.has_transcript() {
                    Some("missing transcript".to_string())
                } else if modality.needs_audio() && !r.has_audio() {
                    Some("missing audio".to_string())
                } else {
                    r.truth(task, &ptsd_scale).err().map(|e| format!("no ground truth: {e}"))
                };
                let truth = r.truth(task, &ptsd_scale).ok();
                let truth_score = (task == Task::PtsdSeverity).then_some(r.ptsd_severity);
                for variant in cfg.variants_for(task) {
                    for p in &providers {
                        let exclude = |reason: String| Exclusion {
                            task,
                            variant,
                            modality,
                            provider: p.name.clone(),
                            shot_mode: cfg.shot.mode,
                            participant_id: r.participant_id,
                            reason,
                        };
                        if let Some(reason) = &reason {
                            plan.exclusions.push(exclude(reason.clone()));
                            continue;
                        }
                        let req = PlannedRequest {
                            task,
                            variant,
                            modality,
                            provider: p.name.clone(),
                            shot_mode: cfg.shot.mode,
                            participant_id: r.participant_id,
                            truth: truth.expect("truth checked above"),
                            truth_score,
                        };
                        if cfg.shot.mode == ShotMode::FewShot && !cfg.shot.include_exemplar_subjects {
                            let ex = plan.exemplars.get(&req.exemplar_key()).map(Vec::as_slice).unwrap_or(&[]);
                            if ex.iter().any(|e| e.participant_id == r.participant_id) {
                                plan.exclusions.push(exclude("few-shot exemplar".to_string()));
                                continue;
                            }
                        }
                        plan.requests.push(req);
                    }
                }
            }
        }
    }
    plan.requests.sort_by(|a, b| {
        (a.task, a.variant, a.modality, &a.provider, a.shot_mode, a.participant_id).cmp(&(
            b.task,
            b.variant,
            b.modality,
            &b.provider,
            b.shot_mode,
            b.participant_id,
        ))
    });
    plan.exclusions.sort();
    Ok(plan)
}

fn select_exemplars(
    cfg: &ExperimentConfig,
    m: &DatasetManifest,
    providers: &[String],
) -> Result<BTreeMap<String, Vec<FewShotExample>>, HarnessError> {
    let ptsd_scale = cfg.ptsd_scale()?;
    let mut out = BTreeMap::new();
    let mut zs_rows = None;
    for task in cfg.task_list() {
        if task.kind() == TaskKind::Binary {
            let ex = select_few_shot_binary_with(m, task, cfg.shot.pool, cfg.seed, cfg.shot.order)?;
            out.insert(task.to_string(), ex);
            continue;
        }
        if zs_rows.is_none() {
            let dir =
                cfg.shot.zero_shot_run.as_ref().ok_or_else(|| {
                    HarnessError::ConfigInvalid("near-miss selection needs shot.zero_shot_run".into())
                })?;
            zs_rows = Some(read_predictions(&dir.join(PREDICTIONS_FILE))?);
        }
        let rows = zs_rows.as_ref().expect("loaded above");
        let scale_name = cfg.scales_for(task).ok().map(|s| s[0].name.clone());
        for variant in cfg.variants_for(task) {
            for modality in cfg.modality_list() {
                for provider in providers {
                    let mut outcomes: Vec<ZeroShotOutcome> = rows
                        .iter()
                        .filter(|r| {
                            r.task == task
                                && r.variant == variant
                                && r.modality == modality
                                && &r.provider == provider
                                && r.shot_mode == ShotMode::ZeroShot
                                && (task.kind() != TaskKind::Severity || Some(&r.scale) == scale_name.as_ref())
                        })
                        .map(|r| r.outcome())
                        .collect::<Result<_, _>>()?;
                    outcomes.sort_by_key(|o| o.participant_id);
                    if outcomes.is_empty() {
                        return Err(HarnessError::ConfigInvalid(format!(
                            "zero-shot run has no predictions for {task} {variant} {modality} on {provider}"
                        )));
                    }
                    let ex = select_few_shot_near_miss(
                        &outcomes,
                        m,
                        task,
                        cfg.shot.near_miss_k,
                        cfg.seed,
                        cfg.shot.pool,
                        &ptsd_scale,
                    )?;
                    out.insert(exemplar_key(task, variant, modality, provider), ex);
                }
            }
        }
    }
    Ok(out)
}
