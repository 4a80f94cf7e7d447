//! Checked-in parser corpus and a structural check for valid parses.

use modalscreen::parsers::{canonical_words, parse_for_task, parse_severity, ParseOutcome};
use modalscreen::task::{Label, Task};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

pub const CORPUS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/parser_corpus.jsonl");

#[derive(Debug, Deserialize)]
pub struct Case {
    pub task: Task,
    pub raw: String,
    #[serde(default)]
    pub range: Option<(i64, i64)>,
    /// Answer text of the expected label, or `invalid:<reason>`.
    pub expect: String,
}

pub fn load_corpus() -> Vec<Case> {
    std::fs::read_to_string(CORPUS)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap_or_else(|e| panic!("{l}: {e}")))
        .collect()
}

pub fn parse_case(c: &Case) -> ParseOutcome {
    match c.range {
        Some(r) => parse_severity(&c.raw, r),
        None => parse_for_task(c.task, &c.raw),
    }
}

pub fn outcome_text(o: &ParseOutcome) -> String {
    match o {
        ParseOutcome::Valid { label, .. } => label.answer_text(),
        ParseOutcome::Invalid { reason } => format!("invalid:{}", reason.as_str()),
    }
}

/// Cases whose outcome differs from the expectation, as (raw, expected, got).
pub fn corpus_failures(cases: &[Case]) -> Vec<(String, String, String)> {
    cases
        .iter()
        .filter_map(|c| {
            let got = outcome_text(&parse_case(c));
            (got != c.expect).then(|| (c.raw.clone(), c.expect.clone(), got))
        })
        .collect()
}

/// For a valid outcome the span must be an in-bounds char-aligned slice that
/// spells the label. Returns a description of the first violation.
pub fn span_violation(raw: &str, o: &ParseOutcome) -> Option<String> {
    let ParseOutcome::Valid { label, span: (s, e) } = o else {
        return None;
    };
    let Some(text) = raw.get(*s..*e) else {
        return Some(format!("span {s}..{e} not a slice of {raw:?}"));
    };
    let ok = match label {
        Label::Binary(_) => text.eq_ignore_ascii_case(&label.answer_text()),
        Label::Severity(v) => text.parse::<i64>().ok() == Some(*v),
        Label::Multiclass(m) => canonical_words(text) == canonical_words(m.answer_text()),
    };
    (!ok).then(|| format!("span text {text:?} does not spell {label}"))
}

/// Independent yes/no reading: split on non-alphabetic characters.
pub fn binary_oracle(raw: &str) -> String {
    let mut yes = false;
    let mut no = false;
    for w in raw.split(|c: char| !c.is_alphabetic()) {
        yes |= w.eq_ignore_ascii_case("yes");
        no |= w.eq_ignore_ascii_case("no");
    }
    match (yes, no) {
        (true, false) => "Yes".into(),
        (false, true) => "No".into(),
        (true, true) => "invalid:both_tokens".into(),
        (false, false) => "invalid:no_token".into(),
    }
}

const PIECES: [&str; 34] = [
    "yes",
    "No",
    "YES",
    "no",
    "not",
    "know",
    "nothing",
    "normal",
    "Normal",
    "PTSD",
    "ptsd",
    "depressed",
    "Depressed",
    "and",
    "or",
    " ",
    " ",
    "  ",
    "\n",
    ".",
    ",",
    "-",
    "/",
    "'",
    "0",
    "1",
    "2",
    "7",
    "-3",
    "42",
    "99999999999999999999",
    "é",
    "日本",
    "ß",
];

/// Random response-like text drawn from answer words, digits, punctuation
/// and multi-byte characters, with occasional arbitrary code points.
pub fn fuzz_input(rng: &mut ChaCha8Rng) -> String {
    let len = rng.gen_range(0..12);
    let mut s = String::new();
    for _ in 0..len {
        if rng.gen_bool(0.1) {
            s.push(rng.gen::<char>());
        } else {
            s.push_str(PIECES[rng.gen_range(0..PIECES.len())]);
        }
    }
    s
}

/// Parses `n` fuzz inputs under every task. Returns the violations found
/// (span mismatches or disagreement with the binary oracle).
pub fn fuzz(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = Vec::new();
    for _ in 0..n {
        let raw = fuzz_input(&mut rng);
        for task in Task::ALL {
            let o = parse_for_task(task, &raw);
            if let Some(v) = span_violation(&raw, &o) {
                bad.push(format!("{task}: {v}"));
            }
            if task == Task::DepBinary && outcome_text(&o) != binary_oracle(&raw) {
                bad.push(format!("binary oracle disagrees on {raw:?}"));
            }
        }
        if bad.len() > 20 {
            break;
        }
    }
    bad
}
