//! Task, modality and label vocabulary shared by every stage of the pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The five classification tasks a run can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    DepBinary,
    PtsdBinary,
    DepSeverity,
    PtsdSeverity,
    Multiclass,
}

impl Task {
    pub const ALL: [Task; 5] =
        [Task::DepBinary, Task::PtsdBinary, Task::DepSeverity, Task::PtsdSeverity, Task::Multiclass];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::DepBinary => "dep_binary",
            Task::PtsdBinary => "ptsd_binary",
            Task::DepSeverity => "dep_severity",
            Task::PtsdSeverity => "ptsd_severity",
            Task::Multiclass => "multiclass",
        }
    }

    pub fn kind(self) -> TaskKind {
        match self {
            Task::DepBinary | Task::PtsdBinary => TaskKind::Binary,
            Task::DepSeverity | Task::PtsdSeverity => TaskKind::Severity,
            Task::Multiclass => TaskKind::Multiclass,
        }
    }

    /// Prompt variants that exist for this task.
    pub fn variants(self) -> &'static [Variant] {
        match self.kind() {
            TaskKind::Binary => &[Variant::P1, Variant::P2, Variant::P3],
            _ => &[Variant::P1, Variant::P2],
        }
    }

    /// Inclusive answer range for severity tasks.
    pub fn severity_range(self) -> Option<(i64, i64)> {
        match self {
            Task::DepSeverity => Some((0, 4)),
            Task::PtsdSeverity => Some((0, 2)),
            _ => None,
        }
    }

    /// Every label a well-formed answer may carry, in canonical class order.
    pub fn label_space(self) -> Vec<Label> {
        match self.kind() {
            TaskKind::Binary => vec![Label::Binary(false), Label::Binary(true)],
            TaskKind::Severity => {
                let (lo, hi) = self.severity_range().expect("severity task");
                (lo..=hi).map(Label::Severity).collect()
            }
            TaskKind::Multiclass => MulticlassLabel::ALL.iter().copied().map(Label::Multiclass).collect(),
        }
    }

    /// Parses a canonical label string for this task ("Yes", "3", "Depressed and PTSD", ...).
    pub fn parse_label(self, text: &str) -> Result<Label, LabelParseError> {
        let t = text.trim();
        let err = || LabelParseError { task: self, text: text.to_string() };
        match self.kind() {
            TaskKind::Binary => match t.to_ascii_lowercase().as_str() {
                "yes" | "1" => Ok(Label::Binary(true)),
                "no" | "0" => Ok(Label::Binary(false)),
                _ => Err(err()),
            },
            TaskKind::Severity => {
                let v: i64 = t.parse().map_err(|_| err())?;
                let (lo, hi) = self.severity_range().expect("severity task");
                if (lo..=hi).contains(&v) {
                    Ok(Label::Severity(v))
                } else {
                    Err(err())
                }
            }
            TaskKind::Multiclass => t.parse::<MulticlassLabel>().map(Label::Multiclass).map_err(|_| err()),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Task::ALL.iter().copied().find(|t| t.as_str() == s).ok_or_else(|| format!("unknown task `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Binary,
    Severity,
    Multiclass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    P1,
    P2,
    P3,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::P1 => "P1",
            Variant::P2 => "P2",
            Variant::P3 => "P3",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "P1" => Ok(Variant::P1),
            "P2" => Ok(Variant::P2),
            "P3" => Ok(Variant::P3),
            _ => Err(format!("unknown prompt variant `{s}`")),
        }
    }
}

/// Input channel handed to the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Text,
    Audio,
    AudioText,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Text, Modality::Audio, Modality::AudioText];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Text => "text",
            Modality::Audio => "audio",
            Modality::AudioText => "audio_text",
        }
    }

    pub fn needs_audio(self) -> bool {
        matches!(self, Modality::Audio | Modality::AudioText)
    }

    pub fn needs_transcript(self) -> bool {
        matches!(self, Modality::Text | Modality::AudioText)
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(Modality::Text),
            "audio" => Ok(Modality::Audio),
            "audio_text" | "audio+text" | "combined" => Ok(Modality::AudioText),
            _ => Err(format!("unknown modality `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotMode {
    ZeroShot,
    FewShot,
}

impl ShotMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ShotMode::ZeroShot => "zero_shot",
            ShotMode::FewShot => "few_shot",
        }
    }
}

impl fmt::Display for ShotMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ShotMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero_shot" => Ok(ShotMode::ZeroShot),
            "few_shot" => Ok(ShotMode::FewShot),
            _ => Err(format!("unknown shot mode `{s}`")),
        }
    }
}

/// Four-way category of the multiclass task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MulticlassLabel {
    Normal,
    Depressed,
    Ptsd,
    DepressedAndPtsd,
}

impl MulticlassLabel {
    pub const ALL: [MulticlassLabel; 4] =
        [MulticlassLabel::Normal, MulticlassLabel::Depressed, MulticlassLabel::Ptsd, MulticlassLabel::DepressedAndPtsd];

    pub fn from_bits(depressed: bool, ptsd: bool) -> Self {
        match (depressed, ptsd) {
            (false, false) => MulticlassLabel::Normal,
            (true, false) => MulticlassLabel::Depressed,
            (false, true) => MulticlassLabel::Ptsd,
            (true, true) => MulticlassLabel::DepressedAndPtsd,
        }
    }

    /// (depression present, PTSD present)
    pub fn bits(self) -> (bool, bool) {
        match self {
            MulticlassLabel::Normal => (false, false),
            MulticlassLabel::Depressed => (true, false),
            MulticlassLabel::Ptsd => (false, true),
            MulticlassLabel::DepressedAndPtsd => (true, true),
        }
    }

    /// Answer text as the prompts spell it.
    pub fn answer_text(self) -> &'static str {
        match self {
            MulticlassLabel::Normal => "Normal",
            MulticlassLabel::Depressed => "Depressed",
            MulticlassLabel::Ptsd => "PTSD",
            MulticlassLabel::DepressedAndPtsd => "Depressed and PTSD",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MulticlassLabel::Normal => "normal",
            MulticlassLabel::Depressed => "depressed",
            MulticlassLabel::Ptsd => "ptsd",
            MulticlassLabel::DepressedAndPtsd => "depressed_and_ptsd",
        }
    }
}

impl FromStr for MulticlassLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let folded = s.trim().to_ascii_lowercase().replace(' ', "_");
        MulticlassLabel::ALL
            .iter()
            .copied()
            .find(|l| l.as_str() == folded)
            .ok_or_else(|| format!("unknown multiclass label `{s}`"))
    }
}

/// A validated answer for some task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Binary(bool),
    Severity(i64),
    Multiclass(MulticlassLabel),
}

impl Label {
    /// The string a model is asked to answer with.
    pub fn answer_text(&self) -> String {
        match *self {
            Label::Binary(true) => "Yes".to_string(),
            Label::Binary(false) => "No".to_string(),
            Label::Severity(v) => v.to_string(),
            Label::Multiclass(m) => m.answer_text().to_string(),
        }
    }

    /// Ordinal value used for distances: 0/1 for binary, the integer for severity.
    pub fn ordinal(&self) -> Option<i64> {
        match *self {
            Label::Binary(b) => Some(b as i64),
            Label::Severity(v) => Some(v),
            Label::Multiclass(_) => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.answer_text())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("`{text}` is not a valid {task} label")]
pub struct LabelParseError {
    pub task: Task,
    pub text: String,
}
