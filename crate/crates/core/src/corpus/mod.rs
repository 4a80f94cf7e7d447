//! Interview corpus: manifest ingestion, label correction, severity mapping
//! and label distributions.

mod scale;
mod synth;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::task::{Label, MulticlassLabel, Task};

pub use scale::{
    builtin_scale, builtin_scales, depression_scale, load_scales, map_severity, parse_scales, ptsd_reference_scale,
    Bin, ScaleKind, SeverityScale,
};
pub use synth::{generate_synthetic_fixture, FixtureProfile, SyntheticFixture, MISLABELED_PHQ_IDS, PTSD_CLAMPED_ID};

/// PHQ-8 total at or above which depression is positive.
pub const PHQ_POSITIVE_THRESHOLD: i64 = 10;
/// PCL-C total strictly above which PTSD is positive.
pub const PCLC_POSITIVE_ABOVE: i64 = 44;
/// Lowest attainable PCL-C total; raw values below it are clamped.
pub const PCLC_MIN: i64 = 17;
pub const PCLC_MAX: i64 = 85;
pub const PHQ_MAX: i64 = 24;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("manifest is missing required column `{0}`")]
    MissingColumn(String),
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("participant {0} appears more than once")]
    DuplicateParticipant(u32),
    #[error("score {score} is outside scale `{scale}`")]
    OutOfRange { score: i64, scale: String },
    #[error("invalid severity scale `{name}`: {reason}")]
    InvalidScale { name: String, reason: String },
    #[error("unknown severity scale `{0}`")]
    UnknownScale(String),
    #[error("invalid fixture profile: {0}")]
    InvalidProfile(String),
    #[error("correction log does not replay: {0}")]
    Replay(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Dev,
    Test,
    #[default]
    All,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
            Split::All => "all",
        }
    }

    /// Whether a record in split `self` belongs to the pool `pool`.
    pub fn within(self, pool: Split) -> bool {
        pool == Split::All || self == pool
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" | "training" => Ok(Split::Train),
            "dev" | "development" | "devel" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            "" | "all" => Ok(Split::All),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

/// One interview.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub participant_id: u32,
    pub phq_score: i64,
    pub phq_binary: u8,
    pub pclc_binary: u8,
    pub ptsd_severity: i64,
    pub split: Split,
    pub transcript_path: Option<PathBuf>,
    pub audio_path: Option<PathBuf>,
}

impl ParticipantRecord {
    /// Ground-truth label of `task`, with PTSD severity binned by `ptsd_scale`.
    pub fn truth(&self, task: Task, ptsd_scale: &SeverityScale) -> Result<Label, CorpusError> {
        Ok(match task {
            Task::DepBinary => Label::Binary(self.phq_binary == 1),
            Task::PtsdBinary => Label::Binary(self.pclc_binary == 1),
            Task::DepSeverity => Label::Severity(depression_scale().map(self.phq_score)?),
            Task::PtsdSeverity => Label::Severity(ptsd_scale.map(self.ptsd_severity)?),
            Task::Multiclass => Label::Multiclass(derive_multiclass_label(self)),
        })
    }

    pub fn has_transcript(&self) -> bool {
        self.transcript_path.as_deref().is_some_and(Path::is_file)
    }

    pub fn has_audio(&self) -> bool {
        self.audio_path.as_deref().is_some_and(Path::is_file)
    }
}

/// Four-way category from the two binary labels.
pub fn derive_multiclass_label(r: &ParticipantRecord) -> MulticlassLabel {
    MulticlassLabel::from_bits(r.phq_binary == 1, r.pclc_binary == 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionField {
    PhqBinary,
    PtsdSeverity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Correction {
    pub participant_id: u32,
    pub field: CorrectionField,
    pub old: i64,
    pub new: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct DatasetManifest {
    pub records: Vec<ParticipantRecord>,
    pub source_note: String,
    pub correction_log: Vec<Correction>,
}

impl DatasetManifest {
    pub fn get(&self, id: u32) -> Option<&ParticipantRecord> {
        self.records.iter().find(|r| r.participant_id == id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Column conventions a manifest may follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifestLayout {
    /// The dataset's own label sheet; media found by `{id}_AUDIO.wav` /
    /// `{id}_Transcript.csv` next to the sheet or in `{id}_P/`.
    EdaicCsv,
    /// This tool's manifest with explicit split and media path columns.
    GenericCsv,
}

impl FromStr for ManifestLayout {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "edaic_csv" | "edaic" => Ok(ManifestLayout::EdaicCsv),
            "generic_csv" | "generic" => Ok(ManifestLayout::GenericCsv),
            _ => Err(format!("unknown manifest layout `{s}`")),
        }
    }
}

pub const GENERIC_COLUMNS: [&str; 8] =
    ["Participant_ID", "PHQ_Score", "PHQ_Binary", "PCL-C", "PTSD_Severity", "Split", "Transcript_Path", "Audio_Path"];

struct Columns {
    id: usize,
    phq_score: usize,
    phq_binary: usize,
    pclc: usize,
    ptsd: usize,
    split: Option<usize>,
    transcript: Option<usize>,
    audio: Option<usize>,
}

fn find_column(headers: &csv::StringRecord, names: &[&str]) -> Option<usize> {
    headers.iter().position(|h| names.iter().any(|n| h.trim() == *n))
}

fn resolve_columns(headers: &csv::StringRecord) -> Result<Columns, CorpusError> {
    let need = |names: &[&str]| find_column(headers, names).ok_or_else(|| CorpusError::MissingColumn(names[0].into()));
    Ok(Columns {
        id: need(&["Participant_ID"])?,
        phq_score: need(&["PHQ_Score"])?,
        phq_binary: need(&["PHQ_Binary"])?,
        pclc: need(&["PCL-C", "PCL-C (PTSD)"])?,
        ptsd: need(&["PTSD_Severity", "PTSD Severity"])?,
        split: find_column(headers, &["Split"]),
        transcript: find_column(headers, &["Transcript_Path"]),
        audio: find_column(headers, &["Audio_Path"]),
    })
}

fn parse_int(field: &str, column: &str, line: u64, lo: i64, hi: i64) -> Result<i64, CorpusError> {
    let malformed = |why: String| CorpusError::MalformedRow { line, reason: why };
    let t = field.trim();
    // Some exports write integral floats ("10.0").
    let v = match t.parse::<i64>() {
        Ok(v) => v,
        Err(_) => match t.parse::<f64>() {
            Ok(f) if f.fract() == 0.0 && f.is_finite() => f as i64,
            _ => return Err(malformed(format!("{column} `{t}` is not an integer"))),
        },
    };
    if !(lo..=hi).contains(&v) {
        return Err(malformed(format!("{column} {v} outside {lo}..={hi}")));
    }
    Ok(v)
}

fn media_path(base: &Path, field: Option<&str>) -> Option<PathBuf> {
    let f = field?.trim();
    if f.is_empty() {
        return None;
    }
    let p = Path::new(f);
    Some(if p.is_absolute() { p.to_path_buf() } else { base.join(p) })
}

fn edaic_media(base: &Path, id: u32, suffix: &str) -> Option<PathBuf> {
    let name = format!("{id}_{suffix}");
    [base.join(format!("{id}_P")).join(&name), base.join(&name)].into_iter().find(|p| p.is_file())
}

/// Reads a label manifest. No corrections are applied.
pub fn load_manifest(path: &Path, layout: ManifestLayout) -> Result<DatasetManifest, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let cols = resolve_columns(&headers)?;
    let mut seen = BTreeSet::new();
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        let get = |i: usize| row.get(i).unwrap_or("");
        let id = parse_int(get(cols.id), "Participant_ID", line, 1, u32::MAX as i64)? as u32;
        if !seen.insert(id) {
            return Err(CorpusError::DuplicateParticipant(id));
        }
        let split = match cols.split {
            Some(i) => get(i).parse().map_err(|e| CorpusError::MalformedRow { line, reason: e })?,
            None => Split::All,
        };
        let (transcript_path, audio_path) = match layout {
            ManifestLayout::GenericCsv => {
                (media_path(base, cols.transcript.map(get)), media_path(base, cols.audio.map(get)))
            }
            ManifestLayout::EdaicCsv => (
                media_path(base, cols.transcript.map(get)).or_else(|| edaic_media(base, id, "Transcript.csv")),
                media_path(base, cols.audio.map(get)).or_else(|| edaic_media(base, id, "AUDIO.wav")),
            ),
        };
        records.push(ParticipantRecord {
            participant_id: id,
            phq_score: parse_int(get(cols.phq_score), "PHQ_Score", line, 0, PHQ_MAX)?,
            phq_binary: parse_int(get(cols.phq_binary), "PHQ_Binary", line, 0, 1)? as u8,
            pclc_binary: parse_int(get(cols.pclc), "PCL-C", line, 0, 1)? as u8,
            ptsd_severity: parse_int(get(cols.ptsd), "PTSD_Severity", line, 0, PCLC_MAX)?,
            split,
            transcript_path,
            audio_path,
        });
    }
    Ok(DatasetManifest {
        records,
        source_note: format!("{} ({:?})", path.display(), layout),
        correction_log: Vec::new(),
    })
}

fn relative_to(base: &Path, p: &Path) -> String {
    p.strip_prefix(base).unwrap_or(p).to_string_lossy().replace('\\', "/")
}

/// Writes `m` as a generic-layout manifest; media paths are stored relative to
/// the manifest's directory when they live under it.
pub fn write_manifest(path: &Path, m: &DatasetManifest) -> Result<(), CorpusError> {
    let base = path.parent().unwrap_or(Path::new("."));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(GENERIC_COLUMNS)?;
    for r in &m.records {
        w.write_record([
            r.participant_id.to_string(),
            r.phq_score.to_string(),
            r.phq_binary.to_string(),
            r.pclc_binary.to_string(),
            r.ptsd_severity.to_string(),
            r.split.to_string(),
            r.transcript_path.as_deref().map(|p| relative_to(base, p)).unwrap_or_default(),
            r.audio_path.as_deref().map(|p| relative_to(base, p)).unwrap_or_default(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| CorpusError::io(path, e.into_error()))?;
    std::fs::write(path, bytes).map_err(|e| CorpusError::io(path, e))
}

/// Makes PHQ_Binary agree with PHQ_Score and clamps PCL-C totals below the
/// scale minimum. Every change is appended to the correction log.
pub fn apply_label_corrections(mut m: DatasetManifest) -> DatasetManifest {
    for r in &mut m.records {
        let expected = (r.phq_score >= PHQ_POSITIVE_THRESHOLD) as u8;
        if r.phq_binary != expected {
            m.correction_log.push(Correction {
                participant_id: r.participant_id,
                field: CorrectionField::PhqBinary,
                old: r.phq_binary as i64,
                new: expected as i64,
            });
            r.phq_binary = expected;
        }
        if r.ptsd_severity < PCLC_MIN {
            m.correction_log.push(Correction {
                participant_id: r.participant_id,
                field: CorrectionField::PtsdSeverity,
                old: r.ptsd_severity,
                new: PCLC_MIN,
            });
            r.ptsd_severity = PCLC_MIN;
        }
    }
    m
}

/// Applies a correction log to an uncorrected manifest. Each entry's `old`
/// value must match what the record holds.
pub fn replay_corrections(raw: &DatasetManifest, log: &[Correction]) -> Result<DatasetManifest, CorpusError> {
    let mut out = raw.clone();
    for c in log {
        let r = out
            .records
            .iter_mut()
            .find(|r| r.participant_id == c.participant_id)
            .ok_or_else(|| CorpusError::Replay(format!("participant {} not in manifest", c.participant_id)))?;
        let current = match c.field {
            CorrectionField::PhqBinary => r.phq_binary as i64,
            CorrectionField::PtsdSeverity => r.ptsd_severity,
        };
        if current != c.old {
            return Err(CorpusError::Replay(format!(
                "{}: {:?} is {current}, log says {}",
                c.participant_id, c.field, c.old
            )));
        }
        match c.field {
            CorrectionField::PhqBinary => r.phq_binary = c.new as u8,
            CorrectionField::PtsdSeverity => r.ptsd_severity = c.new,
        }
    }
    out.correction_log.extend_from_slice(log);
    Ok(out)
}

/// Per-label counts for every label system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DistributionReport {
    pub n: u64,
    pub phq_binary: [u64; 2],
    pub pclc_binary: [u64; 2],
    pub depression_severity: BTreeMap<i64, u64>,
    pub ptsd_scale: String,
    pub ptsd_severity: BTreeMap<i64, u64>,
    pub multiclass: BTreeMap<MulticlassLabel, u64>,
}

impl DistributionReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label_system,label,count\n");
        let mut row = |sys: &str, label: &str, n: u64| out.push_str(&format!("{sys},{label},{n}\n"));
        row("phq_binary", "0", self.phq_binary[0]);
        row("phq_binary", "1", self.phq_binary[1]);
        row("pclc_binary", "0", self.pclc_binary[0]);
        row("pclc_binary", "1", self.pclc_binary[1]);
        for (l, n) in &self.depression_severity {
            row("depression_severity", &l.to_string(), *n);
        }
        for (l, n) in &self.ptsd_severity {
            row(&format!("ptsd_severity:{}", self.ptsd_scale), &l.to_string(), *n);
        }
        for (l, n) in &self.multiclass {
            row("multiclass", l.as_str(), *n);
        }
        out
    }
}

/// Counts labels; PTSD severity is binned with `ptsd_scale`.
pub fn summarize_distribution(
    m: &DatasetManifest,
    ptsd_scale: &SeverityScale,
) -> Result<DistributionReport, CorpusError> {
    let dep = depression_scale();
    let mut rep = DistributionReport {
        n: m.records.len() as u64,
        phq_binary: [0; 2],
        pclc_binary: [0; 2],
        depression_severity: (0..dep.n_labels() as i64).map(|l| (l, 0)).collect(),
        ptsd_scale: ptsd_scale.name.clone(),
        ptsd_severity: (0..ptsd_scale.n_labels() as i64).map(|l| (l, 0)).collect(),
        multiclass: MulticlassLabel::ALL.iter().map(|l| (*l, 0)).collect(),
    };
    for r in &m.records {
        rep.phq_binary[r.phq_binary as usize] += 1;
        rep.pclc_binary[r.pclc_binary as usize] += 1;
        *rep.depression_severity.entry(dep.map(r.phq_score)?).or_default() += 1;
        *rep.ptsd_severity.entry(ptsd_scale.map(r.ptsd_severity)?).or_default() += 1;
        *rep.multiclass.entry(derive_multiclass_label(r)).or_default() += 1;
    }
    Ok(rep)
}

/// Reads a transcript. `.csv` files follow the dataset's transcript format
/// (one utterance per row in a `Text` column, or `Speaker`/`Value` pairs);
/// anything else is read verbatim.
pub fn read_transcript(path: &Path) -> Result<String, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    if path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        let col = find_column(&headers, &["Text", "value", "Value"])
            .ok_or_else(|| CorpusError::MissingColumn("Text".into()))?;
        let mut lines = Vec::new();
        for row in reader.records() {
            let row = row?;
            if let Some(t) = row.get(col) {
                let t = t.trim();
                if !t.is_empty() {
                    lines.push(t.to_string());
                }
            }
        }
        return Ok(lines.join("\n"));
    }
    Ok(text)
}
