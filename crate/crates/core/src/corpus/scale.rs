//! Score-to-label severity scales.

use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::CorpusError;

const BUILTIN_SCALES: &str = include_str!("../../data/severity_scales.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleKind {
    DepressionPhq8,
    PtsdReference,
    PtsdLlmCustom,
}

/// One inclusive interval `[lo, hi]` mapped to `label`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(i64, i64, i64)", into = "(i64, i64, i64)")]
pub struct Bin {
    pub label: i64,
    pub lo: i64,
    pub hi: i64,
}

impl From<(i64, i64, i64)> for Bin {
    fn from((label, lo, hi): (i64, i64, i64)) -> Self {
        Bin { label, lo, hi }
    }
}

impl From<Bin> for (i64, i64, i64) {
    fn from(b: Bin) -> Self {
        (b.label, b.lo, b.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeverityScale {
    pub name: String,
    pub kind: ScaleKind,
    pub bins: Vec<Bin>,
}

impl SeverityScale {
    /// Checks that labels run 0..k-1 over contiguous, non-empty, ascending bins.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |why: String| CorpusError::InvalidScale { name: self.name.clone(), reason: why };
        if self.bins.is_empty() {
            return Err(bad("no bins".into()));
        }
        for (i, b) in self.bins.iter().enumerate() {
            if b.label != i as i64 {
                return Err(bad(format!("bin {i} has label {}", b.label)));
            }
            if b.lo > b.hi {
                return Err(bad(format!("bin {i} is empty ({}..{})", b.lo, b.hi)));
            }
            if i > 0 && b.lo != self.bins[i - 1].hi + 1 {
                return Err(bad(format!("bin {i} starts at {} but previous ends at {}", b.lo, self.bins[i - 1].hi)));
            }
        }
        Ok(())
    }

    /// Inclusive score range covered by the scale.
    pub fn range(&self) -> (i64, i64) {
        (self.bins[0].lo, self.bins[self.bins.len() - 1].hi)
    }

    pub fn n_labels(&self) -> usize {
        self.bins.len()
    }

    pub fn map(&self, score: i64) -> Result<i64, CorpusError> {
        self.bins
            .iter()
            .find(|b| (b.lo..=b.hi).contains(&score))
            .map(|b| b.label)
            .ok_or_else(|| CorpusError::OutOfRange { score, scale: self.name.clone() })
    }
}

/// Free-function form of [`SeverityScale::map`].
pub fn map_severity(score: i64, scale: &SeverityScale) -> Result<i64, CorpusError> {
    scale.map(score)
}

#[derive(Deserialize)]
struct ScaleFile {
    scale: Vec<SeverityScale>,
}

/// Parses and validates a scale preset document.
pub fn parse_scales(text: &str) -> Result<Vec<SeverityScale>, CorpusError> {
    let file: ScaleFile =
        toml::from_str(text).map_err(|e| CorpusError::InvalidScale { name: "<file>".into(), reason: e.to_string() })?;
    for s in &file.scale {
        s.validate()?;
    }
    Ok(file.scale)
}

pub fn load_scales(path: &Path) -> Result<Vec<SeverityScale>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    parse_scales(&text)
}

/// The shipped presets.
pub fn builtin_scales() -> &'static [SeverityScale] {
    static SCALES: OnceLock<Vec<SeverityScale>> = OnceLock::new();
    SCALES.get_or_init(|| parse_scales(BUILTIN_SCALES).expect("shipped scale presets are valid"))
}

pub fn builtin_scale(name: &str) -> Result<&'static SeverityScale, CorpusError> {
    builtin_scales().iter().find(|s| s.name == name).ok_or_else(|| CorpusError::UnknownScale(name.to_string()))
}

pub fn depression_scale() -> &'static SeverityScale {
    builtin_scale("depression_phq8").expect("preset present")
}

pub fn ptsd_reference_scale() -> &'static SeverityScale {
    builtin_scale("ptsd_reference").expect("preset present")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mapping_examples() {
        let dep = depression_scale();
        assert_eq!(dep.map(7).unwrap(), 1);
        assert_eq!(dep.map(0).unwrap(), 0);
        assert_eq!(dep.map(24).unwrap(), 4);
        assert!(matches!(dep.map(25), Err(CorpusError::OutOfRange { score: 25, .. })));
        assert_eq!(map_severity(45, ptsd_reference_scale()).unwrap(), 2);
        assert_eq!(map_severity(44, ptsd_reference_scale()).unwrap(), 1);
    }

    #[test]
    fn presets_cover_their_ranges() {
        assert_eq!(builtin_scales().len(), 10);
        for s in builtin_scales() {
            let (lo, hi) = s.range();
            let width: i64 = s.bins.iter().map(|b| b.hi - b.lo + 1).sum();
            assert_eq!(width, hi - lo + 1, "{}", s.name);
            if s.kind != ScaleKind::DepressionPhq8 {
                assert_eq!((lo, hi), (17, 85), "{}", s.name);
                assert_eq!(s.n_labels(), 3);
            }
        }
    }

    #[test]
    fn rejects_overlapping_bins() {
        let text = r#"
            [[scale]]
            name = "bad"
            kind = "ptsd_llm_custom"
            bins = [[0, 17, 33], [1, 18, 43], [2, 44, 85]]
        "#;
        assert!(matches!(parse_scales(text), Err(CorpusError::InvalidScale { .. })));
    }
}
