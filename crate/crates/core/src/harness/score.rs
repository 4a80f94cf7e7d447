use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::run_config;
use super::{load_records, write_file, ExperimentConfig, HarnessError, RunRecord, PREDICTIONS_FILE};
use crate::metrics::{
    mae_with_invalid, multilabel_scores, ConfusionMatrix, MetricReport, MultiLabelScores, ScoringMode,
};
use crate::modality::CorrectnessVector;
use crate::prompts::ZeroShotOutcome;
use crate::task::{Label, Modality, ShotMode, Task, TaskKind, Variant};

/// One row of `predictions.csv`. `pred` is empty when the answer did not
/// parse or the request failed; `parse_status` then holds the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub participant_id: u32,
    pub task: Task,
    pub truth: String,
    pub pred: String,
    pub parse_status: String,
    pub provider: String,
    pub model: String,
    pub variant: Variant,
    pub modality: Modality,
    pub shot_mode: ShotMode,
    /// Severity scale the truth is binned with; empty for other tasks.
    pub scale: String,
}

impl PredictionRow {
    pub fn truth_label(&self) -> Result<Label, HarnessError> {
        self.task
            .parse_label(&self.truth)
            .map_err(|e| HarnessError::CorruptStore { path: PathBuf::from(PREDICTIONS_FILE), reason: e.to_string() })
    }

    pub fn pred_label(&self) -> Result<Option<Label>, HarnessError> {
        if self.pred.is_empty() {
            return Ok(None);
        }
        self.task
            .parse_label(&self.pred)
            .map(Some)
            .map_err(|e| HarnessError::CorruptStore { path: PathBuf::from(PREDICTIONS_FILE), reason: e.to_string() })
    }

    pub fn is_correct(&self) -> bool {
        !self.pred.is_empty() && self.pred == self.truth
    }

    pub fn outcome(&self) -> Result<ZeroShotOutcome, HarnessError> {
        Ok(ZeroShotOutcome {
            participant_id: self.participant_id,
            truth: self.truth_label()?,
            pred: self.pred_label()?,
        })
    }

    pub fn cell(&self) -> CellKey {
        CellKey {
            task: self.task,
            scale: self.scale.clone(),
            shot_mode: self.shot_mode,
            modality: self.modality,
            provider: self.provider.clone(),
            model: self.model.clone(),
            variant: self.variant,
        }
    }
}

/// Rows of `records` as written to `predictions.csv`. PTSD severity records
/// yield one row per configured scale.
pub fn prediction_rows(records: &[RunRecord], cfg: &ExperimentConfig) -> Result<Vec<PredictionRow>, HarnessError> {
    let mut rows = Vec::new();
    for r in records {
        let pred = r.prediction().map(|l| l.answer_text()).unwrap_or_default();
        let parse_status = match (&r.error, &r.parse) {
            (Some(e), _) => e.class.clone(),
            (None, Some(p)) => p.status_str().to_string(),
            (None, None) => "missing".to_string(),
        };
        let base = PredictionRow {
            participant_id: r.participant_id,
            task: r.task,
            truth: r.truth.answer_text(),
            pred,
            parse_status,
            provider: r.provider.clone(),
            model: r.model.clone(),
            variant: r.variant,
            modality: r.modality,
            shot_mode: r.shot_mode,
            scale: String::new(),
        };
        match r.task {
            Task::DepSeverity => rows.push(PredictionRow { scale: "depression_phq8".into(), ..base }),
            Task::PtsdSeverity => {
                let score = r.truth_score.ok_or_else(|| HarnessError::CorruptStore {
                    path: PathBuf::from(super::RECORDS_FILE),
                    reason: format!("PTSD severity record for {} has no raw score", r.participant_id),
                })?;
                for scale in cfg.scales_for(Task::PtsdSeverity)? {
                    match scale.map(score) {
                        Ok(t) => rows.push(PredictionRow {
                            truth: Label::Severity(t).answer_text(),
                            scale: scale.name.clone(),
                            ..base.clone()
                        }),
                        Err(e) => log::warn!("participant {} left out of scale {}: {e}", r.participant_id, scale.name),
                    }
                }
            }
            _ => rows.push(base),
        }
    }
    rows.sort_by(|a, b| (a.cell(), a.participant_id).cmp(&(b.cell(), b.participant_id)));
    Ok(rows)
}

pub fn write_predictions(path: &Path, records: &[RunRecord], cfg: &ExperimentConfig) -> Result<(), HarnessError> {
    let rows = prediction_rows(records, cfg)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record([
            "participant_id",
            "task",
            "truth",
            "pred",
            "parse_status",
            "provider",
            "model",
            "variant",
            "modality",
            "shot_mode",
            "scale",
        ])?;
    }
    for r in &rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::io(path, e.into_error()))?;
    write_file(path, bytes)
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<Result<Vec<PredictionRow>, _>>()?)
}

/// Identity of one scored cell.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub task: Task,
    pub scale: String,
    pub shot_mode: ShotMode,
    pub modality: Modality,
    pub provider: String,
    pub model: String,
    pub variant: Variant,
}

impl CellKey {
    /// File stem used under `metrics/`.
    pub fn file_stem(&self) -> String {
        let mut parts = vec![self.task.to_string()];
        if !self.scale.is_empty() {
            parts.push(self.scale.clone());
        }
        parts.extend([
            self.provider.clone(),
            self.variant.to_string(),
            self.modality.to_string(),
            self.shot_mode.to_string(),
        ]);
        parts.join("__")
    }
}

/// Binary metrics of each disorder inside the multiclass task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerDisorder {
    pub depression: MetricReport,
    pub ptsd: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellScore {
    pub key: CellKey,
    pub report: MetricReport,
    /// Same cell under the other scoring mode.
    pub alternate: MetricReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_disorder: Option<PerDisorder>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multilabel: Option<MultiLabelScores>,
}

fn other(mode: ScoringMode) -> ScoringMode {
    match mode {
        ScoringMode::CountInvalidAsWrong => ScoringMode::ExcludeInvalid,
        ScoringMode::ExcludeInvalid => ScoringMode::CountInvalidAsWrong,
    }
}

fn cell_report(task: Task, pairs: &[(Label, Option<Label>)], mode: ScoringMode) -> Result<MetricReport, HarnessError> {
    let cm = ConfusionMatrix::from_pairs(task.label_space(), mode, pairs.iter().copied())?;
    let mae = match task.severity_range() {
        Some(range) => {
            let truths: Vec<i64> = pairs.iter().map(|(t, _)| t.ordinal().expect("severity")).collect();
            let preds: Vec<Option<i64>> = pairs.iter().map(|(_, p)| p.and_then(|l| l.ordinal())).collect();
            mae_with_invalid(&truths, &preds, range, mode)?
        }
        None => None,
    };
    let positive = (task.kind() == TaskKind::Binary).then_some(Label::Binary(true));
    Ok(MetricReport::from_matrix(&cm, positive.as_ref(), mae)?)
}

fn disorder_report(
    pairs: &[(Label, Option<Label>)],
    pick: fn((bool, bool)) -> bool,
    mode: ScoringMode,
) -> Result<MetricReport, HarnessError> {
    let bits = |l: Label| match l {
        Label::Multiclass(m) => Label::Binary(pick(m.bits())),
        other => other,
    };
    let binary: Vec<(Label, Option<Label>)> = pairs.iter().map(|&(t, p)| (bits(t), p.map(bits))).collect();
    cell_report(Task::DepBinary, &binary, mode)
}

fn multiclass_extras(
    pairs: &[(Label, Option<Label>)],
    mode: ScoringMode,
) -> Result<(PerDisorder, MultiLabelScores), HarnessError> {
    let per = PerDisorder {
        depression: disorder_report(pairs, |b| b.0, mode)?,
        ptsd: disorder_report(pairs, |b| b.1, mode)?,
    };
    let mut truths = Vec::new();
    let mut preds = Vec::new();
    for &(t, p) in pairs {
        let Label::Multiclass(t) = t else { continue };
        let tb = t.bits();
        match (p, mode) {
            (Some(Label::Multiclass(p)), _) => preds.push(p.bits()),
            // An invalid answer gets no credit on either disorder.
            (_, ScoringMode::CountInvalidAsWrong) => preds.push((!tb.0, !tb.1)),
            (_, ScoringMode::ExcludeInvalid) => continue,
        }
        truths.push(tb);
    }
    let ml = if truths.is_empty() {
        MultiLabelScores { mean_credit: 0.0, grouped_balanced_credit: 0.0, micro_f1: 0.0 }
    } else {
        multilabel_scores(&truths, &preds)?
    };
    Ok((per, ml))
}

/// Scores every cell present in `rows`.
pub fn score_rows(rows: &[PredictionRow], mode: ScoringMode) -> Result<Vec<CellScore>, HarnessError> {
    let mut cells: BTreeMap<CellKey, Vec<(Label, Option<Label>)>> = BTreeMap::new();
    for r in rows {
        cells.entry(r.cell()).or_default().push((r.truth_label()?, r.pred_label()?));
    }
    cells
        .into_iter()
        .map(|(key, pairs)| {
            let report = cell_report(key.task, &pairs, mode)?;
            let alternate = cell_report(key.task, &pairs, other(mode))?;
            let (per_disorder, multilabel) = if key.task == Task::Multiclass {
                let (p, m) = multiclass_extras(&pairs, mode)?;
                (Some(p), Some(m))
            } else {
                (None, None)
            };
            Ok(CellScore { key, report, alternate, per_disorder, multilabel })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ScoreSummary {
    pub cells: Vec<CellScore>,
    pub files: Vec<PathBuf>,
}

const SUMMARY_PREFIX: &str = "task,scale,shot_mode,modality,provider,model,variant";

/// Regenerates `predictions.csv` from the records of a run and writes
/// `metrics/<cell>.json` plus `metrics/summary.csv` (both scoring modes).
pub fn score(run_dir: &Path) -> Result<ScoreSummary, HarnessError> {
    let cfg = run_config(run_dir)?;
    let records = load_records(run_dir)?;
    if records.is_empty() {
        return Err(HarnessError::NoRecords(run_dir.to_path_buf()));
    }
    let pred_path = run_dir.join(PREDICTIONS_FILE);
    write_predictions(&pred_path, &records, &cfg)?;
    let rows = read_predictions(&pred_path)?;
    let cells = score_rows(&rows, cfg.scoring_mode)?;
    let dir = run_dir.join("metrics");
    let mut files = vec![pred_path];
    let mut summary = format!("{SUMMARY_PREFIX},{}\n", MetricReport::CSV_HEADER);
    let mut stems = BTreeSet::new();
    for c in &cells {
        let stem = c.key.file_stem();
        if !stems.insert(stem.clone()) {
            return Err(HarnessError::CorruptStore {
                path: run_dir.to_path_buf(),
                reason: format!("two models share provider cell {stem}"),
            });
        }
        let path = dir.join(format!("{stem}.json"));
        write_file(&path, serde_json::to_string_pretty(c).expect("scores serialize") + "\n")?;
        files.push(path);
        let k = &c.key;
        for rep in [&c.report, &c.alternate] {
            summary.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                k.task,
                k.scale,
                k.shot_mode,
                k.modality,
                k.provider,
                k.model,
                k.variant,
                rep.csv_fields()
            ));
        }
    }
    let path = dir.join("summary.csv");
    write_file(&path, summary)?;
    files.push(path);
    Ok(ScoreSummary { cells, files })
}

/// Per-participant correctness of the rows accepted by `keep`. Invalid answers count as wrong.
pub fn correctness_vector(
    rows: &[PredictionRow],
    identity: &str,
    keep: impl Fn(&PredictionRow) -> bool,
) -> Result<CorrectnessVector, HarnessError> {
    let mut v = CorrectnessVector::new(identity);
    for r in rows.iter().filter(|r| keep(r)) {
        if v.bits.insert(r.participant_id, r.is_correct()).is_some() {
            return Err(HarnessError::ConfigInvalid(format!(
                "selection `{identity}` matches participant {} more than once; narrow it down",
                r.participant_id
            )));
        }
    }
    if v.is_empty() {
        return Err(HarnessError::ConfigInvalid(format!("selection `{identity}` matches no predictions")));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: u32, truth: &str, pred: &str) -> PredictionRow {
        PredictionRow {
            participant_id: id,
            task: Task::Multiclass,
            truth: truth.into(),
            pred: pred.into(),
            parse_status: if pred.is_empty() { "no_match".into() } else { "valid".into() },
            provider: "m".into(),
            model: "m".into(),
            variant: Variant::P1,
            modality: Modality::Text,
            shot_mode: ShotMode::ZeroShot,
            scale: String::new(),
        }
    }

    #[test]
    fn multiclass_cells_carry_per_disorder_scores() {
        let rows = vec![
            row(1, "Normal", "Normal"),
            row(2, "Depressed", "Depressed and PTSD"),
            row(3, "PTSD", ""),
            row(4, "Depressed and PTSD", "Depressed and PTSD"),
        ];
        let cells = score_rows(&rows, ScoringMode::CountInvalidAsWrong).unwrap();
        assert_eq!(cells.len(), 1);
        let per = cells[0].per_disorder.as_ref().unwrap();
        // Depression truths [0,1,0,1], preds [0,1,invalid,1].
        assert_eq!(per.depression.balanced_accuracy, Some(0.75));
        // PTSD truths [0,0,1,1], preds [0,1,invalid,1].
        assert_eq!(per.ptsd.balanced_accuracy, Some(0.5));
        assert_eq!(cells[0].report.invalid_rate, 0.25);
        assert_eq!(cells[0].alternate.scoring_mode, ScoringMode::ExcludeInvalid);
    }

    #[test]
    fn ambiguous_selection_is_rejected() {
        let mut rows = vec![row(1, "Normal", "Normal"), row(1, "Normal", "PTSD")];
        rows[1].variant = Variant::P2;
        assert!(correctness_vector(&rows, "x", |_| true).is_err());
        let v = correctness_vector(&rows, "x", |r| r.variant == Variant::P2).unwrap();
        assert_eq!(v.bits[&1], false);
    }
}
