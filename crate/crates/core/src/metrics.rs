//! Scalar evaluation metrics over confusion matrices.

use serde::{Deserialize, Serialize};

use crate::task::Label;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("class {0} has no truth samples; its recall is undefined")]
    EmptyClass(usize),
    #[error("length mismatch: {truths} truths vs {preds} predictions")]
    LengthMismatch { truths: usize, preds: usize },
    #[error("label {0} is not one of the matrix classes")]
    UnknownLabel(String),
    #[error("matrix has {0} classes, expected 2")]
    NotBinary(usize),
}

/// How predictions that failed to parse enter the metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringMode {
    /// Invalid predictions stay in the recall denominators through a sentinel
    /// column that is never correct.
    #[default]
    CountInvalidAsWrong,
    /// Invalid predictions are dropped from the matrix; only the rate is reported.
    ExcludeInvalid,
}

impl ScoringMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoringMode::CountInvalidAsWrong => "count_invalid_as_wrong",
            ScoringMode::ExcludeInvalid => "exclude_invalid",
        }
    }
}

/// `counts[i][j]` = samples of truth class `i` predicted as class `j`.
/// `invalid[i]` = samples of truth class `i` whose prediction failed to parse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<Label>,
    pub counts: Vec<Vec<u64>>,
    pub invalid: Vec<u64>,
    pub mode: ScoringMode,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<Label>, mode: ScoringMode) -> Self {
        let n = classes.len();
        ConfusionMatrix { classes, counts: vec![vec![0; n]; n], invalid: vec![0; n], mode }
    }

    /// Builds a matrix from (truth, prediction) pairs, `None` marking an invalid prediction.
    pub fn from_pairs<I>(classes: Vec<Label>, mode: ScoringMode, pairs: I) -> Result<Self, MetricsError>
    where
        I: IntoIterator<Item = (Label, Option<Label>)>,
    {
        let mut cm = ConfusionMatrix::new(classes, mode);
        for (truth, pred) in pairs {
            cm.record(truth, pred)?;
        }
        Ok(cm)
    }

    fn index_of(&self, label: &Label) -> Result<usize, MetricsError> {
        self.classes.iter().position(|c| c == label).ok_or_else(|| MetricsError::UnknownLabel(label.to_string()))
    }

    pub fn record(&mut self, truth: Label, pred: Option<Label>) -> Result<(), MetricsError> {
        let i = self.index_of(&truth)?;
        match pred {
            Some(p) => {
                let j = self.index_of(&p)?;
                self.counts[i][j] += 1;
            }
            None => self.invalid[i] += 1,
        }
        Ok(())
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn invalid_count(&self) -> u64 {
        self.invalid.iter().sum()
    }

    /// Every sample recorded, valid or not.
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum::<u64>() + self.invalid_count()
    }

    /// Truth-class size as seen by the scoring mode.
    pub fn support(&self, i: usize) -> u64 {
        let row: u64 = self.counts[i].iter().sum();
        match self.mode {
            ScoringMode::CountInvalidAsWrong => row + self.invalid[i],
            ScoringMode::ExcludeInvalid => row,
        }
    }

    fn scored_total(&self) -> u64 {
        (0..self.n_classes()).map(|i| self.support(i)).sum()
    }

    fn predicted(&self, j: usize) -> u64 {
        self.counts.iter().map(|row| row[j]).sum()
    }

    /// Recall per class; `None` where the class has no scored truth samples.
    pub fn per_class_recall(&self) -> Vec<Option<f64>> {
        (0..self.n_classes())
            .map(|i| {
                let support = self.support(i);
                (support > 0).then(|| self.counts[i][i] as f64 / support as f64)
            })
            .collect()
    }

    /// One-vs-rest F1 of class `i`; 0 when precision + recall is 0.
    pub fn class_f1(&self, i: usize) -> f64 {
        let tp = self.counts[i][i] as f64;
        let fp = (self.predicted(i) - self.counts[i][i]) as f64;
        let fn_ = (self.support(i) - self.counts[i][i]) as f64;
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        }
    }
}

/// Mean of per-class recalls. Fails if any class has no truth samples.
pub fn balanced_accuracy(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    let recalls = cm.per_class_recall();
    let mut sum = 0.0;
    for (i, r) in recalls.iter().enumerate() {
        sum += r.ok_or(MetricsError::EmptyClass(i))?;
    }
    Ok(sum / recalls.len() as f64)
}

/// Balanced accuracy over the classes that have truth samples, plus the
/// indices of the classes that were dropped. `None` if no class has any.
pub fn balanced_accuracy_present(cm: &ConfusionMatrix) -> (Option<f64>, Vec<usize>) {
    let recalls = cm.per_class_recall();
    let dropped: Vec<usize> = recalls.iter().enumerate().filter(|(_, r)| r.is_none()).map(|(i, _)| i).collect();
    let present: Vec<f64> = recalls.into_iter().flatten().collect();
    if present.is_empty() {
        (None, dropped)
    } else {
        (Some(present.iter().sum::<f64>() / present.len() as f64), dropped)
    }
}

/// F1 of `positive` in a two-class matrix.
pub fn f1_binary(cm: &ConfusionMatrix, positive: &Label) -> Result<f64, MetricsError> {
    if cm.n_classes() != 2 {
        return Err(MetricsError::NotBinary(cm.n_classes()));
    }
    let i = cm.index_of(positive)?;
    Ok(cm.class_f1(i))
}

/// Support-weighted mean of one-vs-rest F1 scores.
pub fn weighted_f1(cm: &ConfusionMatrix) -> f64 {
    let total = cm.scored_total();
    if total == 0 {
        return 0.0;
    }
    (0..cm.n_classes()).map(|i| cm.support(i) as f64 / total as f64 * cm.class_f1(i)).sum()
}

pub fn mae(truths: &[i64], preds: &[i64]) -> Result<f64, MetricsError> {
    if truths.len() != preds.len() {
        return Err(MetricsError::LengthMismatch { truths: truths.len(), preds: preds.len() });
    }
    if truths.is_empty() {
        return Ok(0.0);
    }
    let sum: i64 = truths.iter().zip(preds).map(|(t, p)| (t - p).abs()).sum();
    Ok(sum as f64 / truths.len() as f64)
}

/// MAE with invalid predictions handled per `mode`: excluded, or charged the
/// largest error possible on `[lo, hi]` for that truth.
pub fn mae_with_invalid(
    truths: &[i64],
    preds: &[Option<i64>],
    range: (i64, i64),
    mode: ScoringMode,
) -> Result<Option<f64>, MetricsError> {
    if truths.len() != preds.len() {
        return Err(MetricsError::LengthMismatch { truths: truths.len(), preds: preds.len() });
    }
    let (lo, hi) = range;
    let mut t = Vec::with_capacity(truths.len());
    let mut p = Vec::with_capacity(truths.len());
    for (&truth, pred) in truths.iter().zip(preds) {
        match (pred, mode) {
            (Some(v), _) => {
                t.push(truth);
                p.push(*v);
            }
            (None, ScoringMode::CountInvalidAsWrong) => {
                t.push(truth);
                p.push(if truth - lo >= hi - truth { lo } else { hi });
            }
            (None, ScoringMode::ExcludeInvalid) => {}
        }
    }
    if t.is_empty() {
        return Ok(None);
    }
    mae(&t, &p).map(Some)
}

/// Partial-credit statistics for the (depression, PTSD) two-label view.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiLabelScores {
    /// Mean per-sample credit, where credit is matched bits / 2.
    pub mean_credit: f64,
    /// Unweighted mean of the mean credit within each true combination present.
    pub grouped_balanced_credit: f64,
    /// F1 over the pooled 2n binary decisions, positive = disorder present.
    pub micro_f1: f64,
}

pub fn multilabel_scores(truths: &[(bool, bool)], preds: &[(bool, bool)]) -> Result<MultiLabelScores, MetricsError> {
    if truths.len() != preds.len() {
        return Err(MetricsError::LengthMismatch { truths: truths.len(), preds: preds.len() });
    }
    if truths.is_empty() {
        return Ok(MultiLabelScores { mean_credit: 0.0, grouped_balanced_credit: 0.0, micro_f1: 0.0 });
    }
    let mut group_sum = [0.0f64; 4];
    let mut group_n = [0u64; 4];
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    let mut total = 0.0;
    for (t, p) in truths.iter().zip(preds) {
        let credit = ((t.0 == p.0) as u8 + (t.1 == p.1) as u8) as f64 / 2.0;
        total += credit;
        let g = (t.0 as usize) | ((t.1 as usize) << 1);
        group_sum[g] += credit;
        group_n[g] += 1;
        for (tb, pb) in [(t.0, p.0), (t.1, p.1)] {
            match (tb, pb) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                (false, false) => {}
            }
        }
    }
    let groups: Vec<f64> = (0..4).filter(|&g| group_n[g] > 0).map(|g| group_sum[g] / group_n[g] as f64).collect();
    let denom = 2 * tp + fp + fn_;
    Ok(MultiLabelScores {
        mean_credit: total / truths.len() as f64,
        grouped_balanced_credit: groups.iter().sum::<f64>() / groups.len() as f64,
        micro_f1: if denom == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 },
    })
}

/// Metrics of one evaluated cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// `None` only when no class has scored samples.
    pub balanced_accuracy: Option<f64>,
    /// Positive-class F1 for binary tasks, weighted F1 otherwise.
    pub f1: f64,
    pub mae: Option<f64>,
    pub per_class_recall: Vec<Option<f64>>,
    /// Classes left out of balanced accuracy for lack of truth samples.
    pub dropped_classes: Vec<String>,
    pub invalid_rate: f64,
    pub n: u64,
    pub scoring_mode: ScoringMode,
}

impl MetricReport {
    /// Builds the report for a matrix. `positive` selects binary F1; otherwise weighted F1.
    pub fn from_matrix(cm: &ConfusionMatrix, positive: Option<&Label>, mae: Option<f64>) -> Result<Self, MetricsError> {
        let (ba, dropped) = balanced_accuracy_present(cm);
        let f1 = match positive {
            Some(p) => f1_binary(cm, p)?,
            None => weighted_f1(cm),
        };
        let n = cm.total();
        Ok(MetricReport {
            balanced_accuracy: ba,
            f1,
            mae,
            per_class_recall: cm.per_class_recall(),
            dropped_classes: dropped.into_iter().map(|i| cm.classes[i].to_string()).collect(),
            invalid_rate: if n == 0 { 0.0 } else { cm.invalid_count() as f64 / n as f64 },
            n,
            scoring_mode: cm.mode,
        })
    }

    pub const CSV_HEADER: &'static str = "balanced_accuracy,f1,mae,invalid_rate,n,scoring_mode";

    pub fn csv_fields(&self) -> String {
        format!(
            "{},{:.6},{},{:.6},{},{}",
            fmt_opt(self.balanced_accuracy),
            self.f1,
            fmt_opt(self.mae),
            self.invalid_rate,
            self.n,
            self.scoring_mode.as_str()
        )
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "undefined".to_string())
}
