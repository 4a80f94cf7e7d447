//! Cross-modality comparison: correctness co-occurrence, Modal Superiority
//! Score (MSS) and Disagreement Resolvement Score (DRS).
//!
//! Everything here works on per-sample correctness bits, not on the predicted
//! labels. On binary tasks the two views coincide; on multiclass tasks two
//! wrong answers can differ while both count as incorrect.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModalityError {
    #[error("participant sets differ; first mismatched ids: {0:?}")]
    KeyMismatch(Vec<u32>),
    #[error("resolution invariant broken: {resolved} resolved vs {disagreements} disagreements")]
    Inconsistent { resolved: u64, disagreements: u64 },
}

/// Per-sample correctness of one run cell. Invalid parses are stored as incorrect.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CorrectnessVector {
    /// Free-form identity of the originating run cell, e.g. "gemini/dep_binary/P3/audio/zero_shot".
    pub run_identity: String,
    pub bits: BTreeMap<u32, bool>,
}

impl CorrectnessVector {
    pub fn new(run_identity: impl Into<String>) -> Self {
        CorrectnessVector { run_identity: run_identity.into(), bits: BTreeMap::new() }
    }

    pub fn from_bits(run_identity: impl Into<String>, bits: impl IntoIterator<Item = (u32, bool)>) -> Self {
        CorrectnessVector { run_identity: run_identity.into(), bits: bits.into_iter().collect() }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

fn check_keys(a: &CorrectnessVector, b: &CorrectnessVector) -> Result<(), ModalityError> {
    if a.bits.len() == b.bits.len() && a.bits.keys().eq(b.bits.keys()) {
        return Ok(());
    }
    let ka: BTreeSet<u32> = a.bits.keys().copied().collect();
    let kb: BTreeSet<u32> = b.bits.keys().copied().collect();
    Err(ModalityError::KeyMismatch(ka.symmetric_difference(&kb).copied().take(16).collect()))
}

/// 2x2 correctness partition of two runs over the same samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct DisagreementPartition {
    pub a_only_correct: u64,
    pub b_only_correct: u64,
    pub both_correct: u64,
    pub both_incorrect: u64,
}

impl DisagreementPartition {
    pub fn total(&self) -> u64 {
        self.a_only_correct + self.b_only_correct + self.both_correct + self.both_incorrect
    }

    pub fn disagreements(&self) -> u64 {
        self.a_only_correct + self.b_only_correct
    }
}

pub fn partition(a: &CorrectnessVector, b: &CorrectnessVector) -> Result<DisagreementPartition, ModalityError> {
    check_keys(a, b)?;
    let mut p = DisagreementPartition::default();
    for (ca, cb) in a.bits.values().zip(b.bits.values()) {
        match (ca, cb) {
            (true, true) => p.both_correct += 1,
            (true, false) => p.a_only_correct += 1,
            (false, true) => p.b_only_correct += 1,
            (false, false) => p.both_incorrect += 1,
        }
    }
    Ok(p)
}

/// How a combined-modality run behaves relative to two single-modality runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct CombinedResolution {
    /// A and B disagree, combined is correct.
    pub resolved_correctly: u64,
    /// A and B disagree, combined is incorrect.
    pub resolved_incorrectly: u64,
    /// A and B both incorrect, combined correct.
    pub flipped_agreement_right: u64,
    /// A and B both correct, combined incorrect.
    pub flipped_agreement_wrong: u64,
    /// A and B agree and combined matches them.
    pub confirmed_agreement: u64,
}

impl CombinedResolution {
    /// Checks the pairing with the underlying A/B partition.
    pub fn check_against(&self, p: &DisagreementPartition) -> Result<(), ModalityError> {
        let resolved = self.resolved_correctly + self.resolved_incorrectly;
        if resolved != p.disagreements() {
            return Err(ModalityError::Inconsistent { resolved, disagreements: p.disagreements() });
        }
        Ok(())
    }
}

pub fn combined_resolution(
    a: &CorrectnessVector,
    b: &CorrectnessVector,
    combined: &CorrectnessVector,
) -> Result<CombinedResolution, ModalityError> {
    check_keys(a, b)?;
    check_keys(a, combined)?;
    let mut r = CombinedResolution::default();
    for ((ca, cb), cc) in a.bits.values().zip(b.bits.values()).zip(combined.bits.values()) {
        match (ca == cb, *ca, *cc) {
            (false, _, true) => r.resolved_correctly += 1,
            (false, _, false) => r.resolved_incorrectly += 1,
            (true, false, true) => r.flipped_agreement_right += 1,
            (true, true, false) => r.flipped_agreement_wrong += 1,
            (true, _, _) => r.confirmed_agreement += 1,
        }
    }
    r.check_against(&partition(a, b)?)?;
    Ok(r)
}

/// A signed percentage in [-100, 100], or undefined when nothing was compared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Score {
    Defined(f64),
    Undefined,
}

impl Score {
    fn ratio(win: u64, loss: u64) -> Score {
        let denom = win + loss;
        if denom == 0 {
            Score::Undefined
        } else {
            Score::Defined((win as f64 - loss as f64) / denom as f64 * 100.0)
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Score::Defined(v) => Some(v),
            Score::Undefined => None,
        }
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Score::Defined(v) => write!(f, "{v:.2}"),
            Score::Undefined => f.write_str("undefined"),
        }
    }
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Score::Defined(v) => s.serialize_f64(*v),
            Score::Undefined => s.serialize_str("undefined"),
        }
    }
}

/// Modal Superiority Score of A over B. The denominator is the number of
/// samples exactly one of the two got right.
pub fn mss(p: &DisagreementPartition) -> Score {
    Score::ratio(p.a_only_correct, p.b_only_correct)
}

/// Disagreement Resolvement Score of the combined modality.
pub fn drs(c: &CombinedResolution) -> Score {
    Score::ratio(c.resolved_correctly, c.resolved_incorrectly)
}

/// MSS of the combined modality against the joint A/B agreement: of the
/// agreement samples the combined run flips, how many it flips to correct.
pub fn mss_combined_vs_agreement(c: &CombinedResolution) -> Score {
    Score::ratio(c.flipped_agreement_right, c.flipped_agreement_wrong)
}

/// Colour semantics of co-occurrence cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellTag {
    BothWrong,
    BothRight,
    Split,
}

impl CellTag {
    pub fn color(self) -> &'static str {
        match self {
            CellTag::BothWrong => "red",
            CellTag::BothRight => "green",
            CellTag::Split => "blue",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CellTag::BothWrong => "both_wrong",
            CellTag::BothRight => "both_right",
            CellTag::Split => "split",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoOccurrenceCell {
    pub a_correct: bool,
    pub b_correct: bool,
    /// Present only when a combined run was supplied.
    pub combined_correct: Option<bool>,
    pub count: u64,
    pub tag: CellTag,
}

/// Plot-ready co-occurrence table: 4 cells for A/B, 8 with a combined run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoOccurrence {
    pub a_identity: String,
    pub b_identity: String,
    pub combined_identity: Option<String>,
    pub cells: Vec<CoOccurrenceCell>,
}

impl CoOccurrence {
    pub fn total(&self) -> u64 {
        self.cells.iter().map(|c| c.count).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("a_correct,b_correct,combined_correct,count,category,color\n");
        for c in &self.cells {
            let combined = c.combined_correct.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                c.a_correct,
                c.b_correct,
                combined,
                c.count,
                c.tag.as_str(),
                c.tag.color()
            ));
        }
        out
    }
}

/// Builds the co-occurrence table. Without a combined run a cell is tagged by
/// whether A and B agree; with one, green marks all three agreeing, blue the
/// A/B disagreements the combined run settles, red the agreements it overturns.
pub fn emit_co_occurrence(
    a: &CorrectnessVector,
    b: &CorrectnessVector,
    combined: Option<&CorrectnessVector>,
) -> Result<CoOccurrence, ModalityError> {
    check_keys(a, b)?;
    if let Some(c) = combined {
        check_keys(a, c)?;
    }
    let mut counts: BTreeMap<(bool, bool, Option<bool>), u64> = BTreeMap::new();
    let combined_bits: Vec<Option<bool>> = match combined {
        Some(c) => c.bits.values().map(|v| Some(*v)).collect(),
        None => vec![None; a.len()],
    };
    for ((ca, cb), cc) in a.bits.values().zip(b.bits.values()).zip(combined_bits) {
        *counts.entry((*ca, *cb, cc)).or_default() += 1;
    }
    let combos: Vec<Option<bool>> = if combined.is_some() { vec![Some(true), Some(false)] } else { vec![None] };
    let mut cells = Vec::new();
    for a_correct in [true, false] {
        for b_correct in [true, false] {
            for &cc in &combos {
                let tag = match cc {
                    None if a_correct != b_correct => CellTag::Split,
                    None if a_correct => CellTag::BothRight,
                    None => CellTag::BothWrong,
                    Some(_) if a_correct != b_correct => CellTag::Split,
                    Some(c) if c == a_correct => CellTag::BothRight,
                    Some(_) => CellTag::BothWrong,
                };
                cells.push(CoOccurrenceCell {
                    a_correct,
                    b_correct,
                    combined_correct: cc,
                    count: counts.get(&(a_correct, b_correct, cc)).copied().unwrap_or(0),
                    tag,
                });
            }
        }
    }
    Ok(CoOccurrence {
        a_identity: a.run_identity.clone(),
        b_identity: b.run_identity.clone(),
        combined_identity: combined.map(|c| c.run_identity.clone()),
        cells,
    })
}

/// Full A vs B (vs combined) comparison as emitted by the CLI.
#[derive(Debug, Clone, Serialize)]
pub struct ModalityComparison {
    pub partition: DisagreementPartition,
    pub mss_a_vs_b: Score,
    pub resolution: Option<CombinedResolution>,
    pub drs: Option<Score>,
    pub mss_combined_vs_a: Option<Score>,
    pub mss_combined_vs_b: Option<Score>,
    pub mss_combined_vs_agreement: Option<Score>,
    pub co_occurrence: CoOccurrence,
}

pub fn compare(
    a: &CorrectnessVector,
    b: &CorrectnessVector,
    combined: Option<&CorrectnessVector>,
) -> Result<ModalityComparison, ModalityError> {
    let part = partition(a, b)?;
    let co_occurrence = emit_co_occurrence(a, b, combined)?;
    let mut out = ModalityComparison {
        partition: part,
        mss_a_vs_b: mss(&part),
        resolution: None,
        drs: None,
        mss_combined_vs_a: None,
        mss_combined_vs_b: None,
        mss_combined_vs_agreement: None,
        co_occurrence,
    };
    if let Some(c) = combined {
        let res = combined_resolution(a, b, c)?;
        out.drs = Some(drs(&res));
        out.mss_combined_vs_agreement = Some(mss_combined_vs_agreement(&res));
        out.mss_combined_vs_a = Some(mss(&partition(c, a)?));
        out.mss_combined_vs_b = Some(mss(&partition(c, b)?));
        out.resolution = Some(res);
    }
    Ok(out)
}
