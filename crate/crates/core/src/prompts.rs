//! Prompt templates, zero-shot and few-shot rendering, and exemplar selection.
//!
//! Templates live as plain text files, one per (task family, variant), with
//! `{name}` placeholders. Few-shot prompts use a separate instruction body per
//! template (the subject input is appended after the exemplars instead of being
//! embedded in the instructions).

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{read_transcript, CorpusError, DatasetManifest, ParticipantRecord, SeverityScale, Split};
use crate::task::{Label, Modality, ShotMode, Task, TaskKind, Variant};

/// Placeholders a template body may use.
pub const PLACEHOLDERS: [&str; 5] = ["input", "input_type", "illness", "medium", "modality"];

/// What `{input}` becomes when the model receives only audio.
pub const AUDIO_INPUT_REF: &str = "the attached audio recording";

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("no template `{0}`")]
    UnknownTemplate(String),
    #[error("template `{name}` is invalid: {reason}")]
    InvalidTemplate { name: String, reason: String },
    #[error("participant {id} has no media for modality {modality}")]
    MissingMedia { modality: Modality, id: u32 },
    #[error("few-shot rendering needs at least one example")]
    EmptyExamples,
    #[error("participant {0} is both the subject and a few-shot example")]
    SubjectLeak(u32),
    #[error("example label `{label}` is not an allowed answer for {task}")]
    LabelNotAllowed { task: Task, label: String },
    #[error("exemplar pool has {positives} positive and {negatives} negative records with transcripts; need 2 and 1")]
    InsufficientPool { positives: usize, negatives: usize },
    #[error("found {found} near-miss candidates, need {k}")]
    InsufficientCandidates { found: usize, k: usize },
    #[error("near-miss selection does not apply to {0}")]
    NotApplicable(Task),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

const BUILTIN: [(&str, &str, &str); 9] = [
    ("binary_p1", include_str!("../templates/binary_p1.txt"), include_str!("../templates/few_shot/binary_p1.txt")),
    ("binary_p2", include_str!("../templates/binary_p2.txt"), include_str!("../templates/few_shot/binary_p2.txt")),
    ("binary_p3", include_str!("../templates/binary_p3.txt"), include_str!("../templates/few_shot/binary_p3.txt")),
    (
        "dep_severity_p1",
        include_str!("../templates/dep_severity_p1.txt"),
        include_str!("../templates/few_shot/dep_severity_p1.txt"),
    ),
    (
        "dep_severity_p2",
        include_str!("../templates/dep_severity_p2.txt"),
        include_str!("../templates/few_shot/dep_severity_p2.txt"),
    ),
    (
        "ptsd_severity_p1",
        include_str!("../templates/ptsd_severity_p1.txt"),
        include_str!("../templates/few_shot/ptsd_severity_p1.txt"),
    ),
    (
        "ptsd_severity_p2",
        include_str!("../templates/ptsd_severity_p2.txt"),
        include_str!("../templates/few_shot/ptsd_severity_p2.txt"),
    ),
    (
        "multiclass_p1",
        include_str!("../templates/multiclass_p1.txt"),
        include_str!("../templates/few_shot/multiclass_p1.txt"),
    ),
    (
        "multiclass_p2",
        include_str!("../templates/multiclass_p2.txt"),
        include_str!("../templates/few_shot/multiclass_p2.txt"),
    ),
];

/// File stem of the template for `(task, variant)`. Both binary tasks share one set.
pub fn template_name(task: Task, variant: Variant) -> String {
    let family = match task.kind() {
        TaskKind::Binary => "binary",
        _ => task.as_str(),
    };
    format!("{family}_{}", variant.as_str().to_ascii_lowercase())
}

fn strip_one_newline(s: &str) -> &str {
    s.strip_suffix("\r\n").or_else(|| s.strip_suffix('\n')).unwrap_or(s)
}

/// Set of template files, keyed by stem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateStore {
    zero_shot: BTreeMap<String, String>,
    few_shot: BTreeMap<String, String>,
}

impl TemplateStore {
    /// The templates compiled into the binary.
    pub fn builtin() -> Self {
        let mut zero_shot = BTreeMap::new();
        let mut few_shot = BTreeMap::new();
        for (name, zs, fs) in BUILTIN {
            zero_shot.insert(name.to_string(), strip_one_newline(zs).to_string());
            few_shot.insert(name.to_string(), strip_one_newline(fs).to_string());
        }
        TemplateStore { zero_shot, few_shot }
    }

    /// Reads `<dir>/*.txt` and `<dir>/few_shot/*.txt`.
    pub fn from_dir(dir: &Path) -> Result<Self, PromptError> {
        Ok(TemplateStore { zero_shot: read_txt_dir(dir)?, few_shot: read_txt_dir(&dir.join("few_shot"))? })
    }

    pub fn template(&self, task: Task, variant: Variant) -> Result<PromptTemplate, PromptError> {
        let name = template_name(task, variant);
        if !task.variants().contains(&variant) {
            return Err(PromptError::UnknownTemplate(name));
        }
        let body = self.zero_shot.get(&name).ok_or_else(|| PromptError::UnknownTemplate(name.clone()))?;
        let few_shot_body =
            self.few_shot.get(&name).ok_or_else(|| PromptError::UnknownTemplate(format!("few_shot/{name}")))?;
        PromptTemplate::new(task, variant, body.clone(), few_shot_body.clone())
    }

    /// sha256 of every template text, keyed by relative file name.
    pub fn hashes(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        for (name, body) in &self.zero_shot {
            out.insert(format!("{name}.txt"), hex::encode(Sha256::digest(body.as_bytes())));
        }
        for (name, body) in &self.few_shot {
            out.insert(format!("few_shot/{name}.txt"), hex::encode(Sha256::digest(body.as_bytes())));
        }
        out
    }
}

fn read_txt_dir(dir: &Path) -> Result<BTreeMap<String, String>, PromptError> {
    let mut out = BTreeMap::new();
    if !dir.is_dir() {
        return Ok(out);
    }
    let entries = std::fs::read_dir(dir).map_err(|e| CorpusError::Io { path: dir.to_path_buf(), source: e })?;
    for entry in entries {
        let path = entry.map_err(|e| CorpusError::Io { path: dir.to_path_buf(), source: e })?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("txt") {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        let text = std::fs::read_to_string(&path).map_err(|e| CorpusError::Io { path: path.clone(), source: e })?;
        out.insert(stem.to_string(), strip_one_newline(&text).to_string());
    }
    Ok(out)
}

/// Names of `{ident}` placeholders in order of appearance.
fn placeholders(body: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = body;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if is_ident(&after[..close]) => {
                out.push(&after[..close]);
                rest = &after[close + 1..];
            }
            _ => rest = after,
        }
    }
    out
}

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_lowercase() || b == b'_')
}

/// Values substituted into a template body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slots {
    pub input: String,
    pub input_type: String,
    pub illness: String,
    pub medium: String,
    pub modality: String,
}

impl Slots {
    /// Fixed wording for a modality, with `input` as the subject content.
    pub fn for_modality(task: Task, modality: Modality, input: impl Into<String>) -> Self {
        let (input_type, medium, modality_word) = match modality {
            Modality::Text => ("Transcription of the interview:", "transcript", "text"),
            Modality::Audio => ("Audio of the interview.", "audio recording", "audio"),
            Modality::AudioText => {
                ("Audio and transcription of the interview:", "audio recording and transcript", "audio and text")
            }
        };
        Slots {
            input: input.into(),
            input_type: input_type.into(),
            illness: illness_word(task).into(),
            medium: medium.into(),
            modality: modality_word.into(),
        }
    }

    fn get(&self, name: &str) -> Option<&str> {
        Some(match name {
            "input" => &self.input,
            "input_type" => &self.input_type,
            "illness" => &self.illness,
            "medium" => &self.medium,
            "modality" => &self.modality,
            _ => return None,
        })
    }
}

fn illness_word(task: Task) -> &'static str {
    match task {
        Task::DepBinary | Task::DepSeverity => "Depression",
        Task::PtsdBinary | Task::PtsdSeverity => "PTSD",
        Task::Multiclass => "Depression or PTSD",
    }
}

/// A validated template for one (task, variant).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub task: Task,
    pub variant: Variant,
    pub body: String,
    pub few_shot_body: String,
    pub allowed_labels: Vec<String>,
}

impl PromptTemplate {
    pub fn new(task: Task, variant: Variant, body: String, few_shot_body: String) -> Result<Self, PromptError> {
        let name = template_name(task, variant);
        let invalid = |reason: String| PromptError::InvalidTemplate { name: name.clone(), reason };
        for (which, text) in [("body", &body), ("few-shot body", &few_shot_body)] {
            if let Some(bad) = placeholders(text).into_iter().find(|p| !PLACEHOLDERS.contains(p)) {
                return Err(invalid(format!("{which} uses unknown placeholder {{{bad}}}")));
            }
        }
        if !placeholders(&body).contains(&"input") {
            return Err(invalid("body never references {input}".into()));
        }
        if placeholders(&few_shot_body).contains(&"input") {
            return Err(invalid("few-shot body must not embed {input}".into()));
        }
        let allowed_labels: Vec<String> = task.label_space().iter().map(Label::answer_text).collect();
        Ok(PromptTemplate { task, variant, body, few_shot_body, allowed_labels })
    }

    pub fn name(&self) -> String {
        template_name(self.task, self.variant)
    }

    /// Substitutes every known placeholder in one pass; inserted values are not rescanned.
    pub fn fill(&self, slots: &Slots) -> String {
        fill(&self.body, slots)
    }

    pub fn fill_few_shot(&self, slots: &Slots) -> String {
        fill(&self.few_shot_body, slots)
    }
}

fn fill(body: &str, slots: &Slots) -> String {
    let mut out = String::with_capacity(body.len() + slots.input.len());
    let mut rest = body;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}').map(|c| (c, &after[..c])) {
            Some((close, name)) if is_ident(name) && slots.get(name).is_some() => {
                out.push_str(slots.get(name).unwrap_or_default());
                rest = &after[close + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub participant_id: u32,
    /// Transcript text shown to the model.
    pub content: String,
    pub label_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptIdentity {
    pub task: Task,
    pub variant: Variant,
    pub modality: Modality,
    pub participant_id: u32,
    pub shot_mode: ShotMode,
    pub content_hash: String,
}

/// A prompt ready to send: one user message plus ordered audio attachments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub text: String,
    pub attachments: Vec<PathBuf>,
    pub identity: PromptIdentity,
}

fn subject_input(r: &ParticipantRecord, modality: Modality) -> Result<(Option<String>, Vec<PathBuf>), PromptError> {
    let missing = || PromptError::MissingMedia { modality, id: r.participant_id };
    let transcript = if modality.needs_transcript() {
        let path = r.transcript_path.as_deref().filter(|_| r.has_transcript()).ok_or_else(missing)?;
        Some(read_transcript(path)?)
    } else {
        None
    };
    let attachments = if modality.needs_audio() {
        vec![r.audio_path.clone().filter(|_| r.has_audio()).ok_or_else(missing)?]
    } else {
        Vec::new()
    };
    Ok((transcript, attachments))
}

fn content_hash(
    t: &PromptTemplate,
    modality: Modality,
    subject: u32,
    shot_mode: ShotMode,
    examples: &[FewShotExample],
    text: &str,
) -> String {
    let mut h = Sha256::new();
    let mut field = |bytes: &[u8]| {
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(bytes);
    };
    field(t.name().as_bytes());
    field(t.task.as_str().as_bytes());
    field(modality.as_str().as_bytes());
    field(&subject.to_le_bytes());
    field(shot_mode.as_str().as_bytes());
    field(&(examples.len() as u64).to_le_bytes());
    for e in examples {
        field(&e.participant_id.to_le_bytes());
        field(e.label_text.as_bytes());
        field(e.content.as_bytes());
    }
    field(text.as_bytes());
    hex::encode(h.finalize())
}

pub fn render_zero_shot(
    t: &PromptTemplate,
    r: &ParticipantRecord,
    modality: Modality,
) -> Result<RenderedPrompt, PromptError> {
    let (transcript, attachments) = subject_input(r, modality)?;
    let input = transcript.unwrap_or_else(|| AUDIO_INPUT_REF.to_string());
    let text = t.fill(&Slots::for_modality(t.task, modality, input));
    let content_hash = content_hash(t, modality, r.participant_id, ShotMode::ZeroShot, &[], &text);
    Ok(RenderedPrompt {
        text,
        attachments,
        identity: PromptIdentity {
            task: t.task,
            variant: t.variant,
            modality,
            participant_id: r.participant_id,
            shot_mode: ShotMode::ZeroShot,
            content_hash,
        },
    })
}

/// Few-shot rendering that refuses to show the subject as its own example.
pub fn render_few_shot(
    t: &PromptTemplate,
    r: &ParticipantRecord,
    modality: Modality,
    examples: &[FewShotExample],
) -> Result<RenderedPrompt, PromptError> {
    render_few_shot_with(t, r, modality, examples, false)
}

pub fn render_few_shot_with(
    t: &PromptTemplate,
    r: &ParticipantRecord,
    modality: Modality,
    examples: &[FewShotExample],
    allow_subject_in_examples: bool,
) -> Result<RenderedPrompt, PromptError> {
    if examples.is_empty() {
        return Err(PromptError::EmptyExamples);
    }
    if !allow_subject_in_examples && examples.iter().any(|e| e.participant_id == r.participant_id) {
        return Err(PromptError::SubjectLeak(r.participant_id));
    }
    if let Some(bad) = examples.iter().find(|e| !t.allowed_labels.contains(&e.label_text)) {
        return Err(PromptError::LabelNotAllowed { task: t.task, label: bad.label_text.clone() });
    }
    let (transcript, attachments) = subject_input(r, modality)?;
    let text = few_shot_text(t, modality, examples, transcript.as_deref());
    let content_hash = content_hash(t, modality, r.participant_id, ShotMode::FewShot, examples, &text);
    Ok(RenderedPrompt {
        text,
        attachments,
        identity: PromptIdentity {
            task: t.task,
            variant: t.variant,
            modality,
            participant_id: r.participant_id,
            shot_mode: ShotMode::FewShot,
            content_hash,
        },
    })
}

/// Assembles body, count line, exemplar blocks and subject line.
pub fn few_shot_text(
    t: &PromptTemplate,
    modality: Modality,
    examples: &[FewShotExample],
    transcript: Option<&str>,
) -> String {
    let slots = Slots::for_modality(t.task, modality, String::new());
    let mut blocks = vec![t.fill_few_shot(&slots), count_line(examples.len())];
    for (i, e) in examples.iter().enumerate() {
        let ord = ordinal(i + 1);
        blocks.push(format!("{ord} sample transcription: {}", e.content));
        blocks.push(format!("{ord} sample label: {}", e.label_text));
    }
    blocks.push(match (modality, transcript) {
        (Modality::Audio, _) | (_, None) => "Label the attached audio recording of the interview.".to_string(),
        (Modality::Text, Some(tx)) => format!("Label the following transcription: '{tx}'."),
        (Modality::AudioText, Some(tx)) => {
            format!("Label the attached audio recording together with its transcription: '{tx}'.")
        }
    });
    blocks.join("\n\n")
}

fn count_line(n: usize) -> String {
    if n == 1 {
        "Here is 1 sample from these interviews and its label. Use it as a reference:".to_string()
    } else {
        format!("Here are {n} samples from these interviews and their labels. Use them as a reference:")
    }
}

fn ordinal(n: usize) -> String {
    const WORDS: [&str; 10] =
        ["First", "Second", "Third", "Fourth", "Fifth", "Sixth", "Seventh", "Eighth", "Ninth", "Tenth"];
    if let Some(w) = WORDS.get(n.wrapping_sub(1)) {
        return w.to_string();
    }
    let suffix = match (n % 10, n % 100) {
        (_, 11..=13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    };
    format!("{n}{suffix}")
}

/// Which records exemplars may be drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExemplarPool {
    All,
    #[default]
    NonTest,
    Train,
    Dev,
    Test,
}

impl ExemplarPool {
    pub fn contains(self, split: Split) -> bool {
        match self {
            ExemplarPool::All => true,
            ExemplarPool::NonTest => split != Split::Test,
            ExemplarPool::Train => split == Split::Train,
            ExemplarPool::Dev => split == Split::Dev,
            ExemplarPool::Test => split == Split::Test,
        }
    }
}

impl std::str::FromStr for ExemplarPool {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(ExemplarPool::All),
            "non_test" => Ok(ExemplarPool::NonTest),
            "train" => Ok(ExemplarPool::Train),
            "dev" => Ok(ExemplarPool::Dev),
            "test" => Ok(ExemplarPool::Test),
            _ => Err(format!("unknown exemplar pool `{s}`")),
        }
    }
}

/// Order of the binary exemplars in the prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleOrder {
    #[default]
    NegativeFirst,
    PositiveFirst,
}

fn example_for(r: &ParticipantRecord, label: Label) -> Result<FewShotExample, PromptError> {
    let path = r
        .transcript_path
        .as_deref()
        .ok_or(PromptError::MissingMedia { modality: Modality::Text, id: r.participant_id })?;
    Ok(FewShotExample {
        participant_id: r.participant_id,
        content: read_transcript(path)?,
        label_text: label.answer_text(),
    })
}

fn seeded_pick<T: Clone>(mut items: Vec<T>, k: usize, seed: u64) -> Vec<T> {
    items.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    items.truncate(k);
    items
}

/// Two positive exemplars and one negative, negative first.
pub fn select_few_shot_binary(
    m: &DatasetManifest,
    task: Task,
    pool: ExemplarPool,
    seed: u64,
) -> Result<Vec<FewShotExample>, PromptError> {
    select_few_shot_binary_with(m, task, pool, seed, ExampleOrder::NegativeFirst)
}

pub fn select_few_shot_binary_with(
    m: &DatasetManifest,
    task: Task,
    pool: ExemplarPool,
    seed: u64,
    order: ExampleOrder,
) -> Result<Vec<FewShotExample>, PromptError> {
    if task.kind() != TaskKind::Binary {
        return Err(PromptError::NotApplicable(task));
    }
    let mut eligible: Vec<&ParticipantRecord> =
        m.records.iter().filter(|r| pool.contains(r.split) && r.has_transcript()).collect();
    eligible.sort_by_key(|r| r.participant_id);
    let positive = |r: &&ParticipantRecord| match task {
        Task::DepBinary => r.phq_binary == 1,
        _ => r.pclc_binary == 1,
    };
    let (pos, neg): (Vec<_>, Vec<_>) = eligible.into_iter().partition(positive);
    if pos.len() < 2 || neg.is_empty() {
        return Err(PromptError::InsufficientPool { positives: pos.len(), negatives: neg.len() });
    }
    let pos = seeded_pick(pos, 2, seed);
    let neg = seeded_pick(neg, 1, seed.wrapping_add(1));
    let neg_ex = example_for(neg[0], Label::Binary(false))?;
    let pos_ex = pos.iter().map(|r| example_for(r, Label::Binary(true))).collect::<Result<Vec<_>, _>>()?;
    Ok(match order {
        ExampleOrder::NegativeFirst => std::iter::once(neg_ex).chain(pos_ex).collect(),
        ExampleOrder::PositiveFirst => pos_ex.into_iter().chain(std::iter::once(neg_ex)).collect(),
    })
}

/// One scored zero-shot prediction, the input of near-miss selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroShotOutcome {
    pub participant_id: u32,
    pub truth: Label,
    /// `None` when the response did not parse.
    pub pred: Option<Label>,
}

fn is_near_miss(o: &ZeroShotOutcome) -> bool {
    match (o.truth, o.pred) {
        (Label::Severity(t), Some(Label::Severity(p))) => (t - p).abs() == 1,
        (Label::Multiclass(t), Some(Label::Multiclass(p))) => {
            let (td, tp) = t.bits();
            let (pd, pp) = p.bits();
            (td != pd) as u8 + (tp != pp) as u8 == 1
        }
        _ => false,
    }
}

/// Participant ids whose prediction was off by exactly one label, ascending.
pub fn near_miss_candidates(zs_run: &[ZeroShotOutcome], task: Task) -> Result<Vec<u32>, PromptError> {
    if task.kind() == TaskKind::Binary {
        return Err(PromptError::NotApplicable(task));
    }
    let ids: BTreeSet<u32> = zs_run.iter().filter(|o| is_near_miss(o)).map(|o| o.participant_id).collect();
    Ok(ids.into_iter().collect())
}

/// `k` near-miss exemplars drawn from records of `m` inside `pool`.
pub fn select_few_shot_near_miss(
    zs_run: &[ZeroShotOutcome],
    m: &DatasetManifest,
    task: Task,
    k: usize,
    seed: u64,
    pool: ExemplarPool,
    ptsd_scale: &SeverityScale,
) -> Result<Vec<FewShotExample>, PromptError> {
    let candidates: Vec<&ParticipantRecord> = near_miss_candidates(zs_run, task)?
        .into_iter()
        .filter_map(|id| m.get(id))
        .filter(|r| pool.contains(r.split) && r.has_transcript())
        .collect();
    if candidates.len() < k {
        return Err(PromptError::InsufficientCandidates { found: candidates.len(), k });
    }
    seeded_pick(candidates, k, seed).into_iter().map(|r| example_for(r, r.truth(task, ptsd_scale)?)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn placeholder_scan_skips_non_identifiers() {
        assert_eq!(placeholders("a {input} {x y} {} {illness}"), vec!["input", "illness"]);
    }

    #[test]
    fn fill_does_not_rescan_inserted_text() {
        let t = TemplateStore::builtin().template(Task::DepSeverity, Variant::P1).unwrap();
        let out = t.fill(&Slots::for_modality(Task::DepSeverity, Modality::Text, "{illness} {medium}"));
        assert!(out.contains("'{illness} {medium}'"));
    }

    #[test]
    fn rejects_unknown_placeholder() {
        let err = PromptTemplate::new(Task::DepBinary, Variant::P1, "{input} {mood}".into(), "x".into());
        assert!(matches!(err, Err(PromptError::InvalidTemplate { .. })));
    }

    #[test]
    fn ordinals() {
        assert_eq!(ordinal(1), "First");
        assert_eq!(ordinal(10), "Tenth");
        assert_eq!(ordinal(11), "11th");
        assert_eq!(ordinal(22), "22nd");
    }

    #[test]
    fn three_variants_only_for_binary() {
        let store = TemplateStore::builtin();
        assert!(store.template(Task::PtsdBinary, Variant::P3).is_ok());
        assert!(matches!(store.template(Task::Multiclass, Variant::P3), Err(PromptError::UnknownTemplate(_))));
        assert_eq!(store.hashes().len(), 18);
    }
}
