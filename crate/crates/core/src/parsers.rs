//! Strict extraction of task labels from raw model output.
//!
//! The parsers never guess. A response either carries exactly one answer the
//! task accepts, or it is reported invalid with the reason it was rejected.
//! Tokens are matched on word boundaries: a "word" is a maximal run of
//! alphabetic characters, compared case-insensitively, so "normal" does not
//! contain "no" and "know" does not contain "no".

use serde::{Deserialize, Serialize};

use crate::task::{Label, MulticlassLabel, Task, TaskKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvalidReason {
    BothTokens,
    NoToken,
    MultipleNumbers,
    OutOfRange,
    NoCategory,
    AmbiguousCategory,
}

impl InvalidReason {
    pub fn as_str(self) -> &'static str {
        match self {
            InvalidReason::BothTokens => "both_tokens",
            InvalidReason::NoToken => "no_token",
            InvalidReason::MultipleNumbers => "multiple_numbers",
            InvalidReason::OutOfRange => "out_of_range",
            InvalidReason::NoCategory => "no_category",
            InvalidReason::AmbiguousCategory => "ambiguous_category",
        }
    }
}

/// Result of parsing one response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ParseOutcome {
    Valid {
        label: Label,
        /// Byte offsets of the matched answer in the raw text.
        span: (usize, usize),
    },
    Invalid {
        reason: InvalidReason,
    },
}

impl ParseOutcome {
    pub fn label(&self) -> Option<Label> {
        match self {
            ParseOutcome::Valid { label, .. } => Some(*label),
            ParseOutcome::Invalid { .. } => None,
        }
    }

    pub fn is_valid(&self) -> bool {
        matches!(self, ParseOutcome::Valid { .. })
    }

    pub fn reason(&self) -> Option<InvalidReason> {
        match self {
            ParseOutcome::Valid { .. } => None,
            ParseOutcome::Invalid { reason } => Some(*reason),
        }
    }

    /// "valid" or the invalidity reason; the `parse_status` column of predictions files.
    pub fn status_str(&self) -> &'static str {
        match self {
            ParseOutcome::Valid { .. } => "valid",
            ParseOutcome::Invalid { reason } => reason.as_str(),
        }
    }

    fn invalid(reason: InvalidReason) -> Self {
        ParseOutcome::Invalid { reason }
    }
}

/// Dispatches to the parser that matches `task`.
pub fn parse_for_task(task: Task, raw: &str) -> ParseOutcome {
    match task.kind() {
        TaskKind::Binary => parse_binary(raw),
        TaskKind::Severity => {
            let range = task.severity_range().expect("severity task has a range");
            parse_severity(raw, range)
        }
        TaskKind::Multiclass => parse_multiclass(raw),
    }
}

/// A maximal run of alphabetic characters, with byte offsets.
#[derive(Debug, Clone, Copy)]
struct Word<'a> {
    text: &'a str,
    start: usize,
    end: usize,
}

fn words(raw: &str) -> impl Iterator<Item = Word<'_>> {
    let mut iter = raw.char_indices().peekable();
    std::iter::from_fn(move || {
        let (start, _) = loop {
            let (i, c) = iter.next()?;
            if c.is_alphabetic() {
                break (i, c);
            }
        };
        let mut end = raw.len();
        while let Some(&(i, c)) = iter.peek() {
            if !c.is_alphabetic() {
                end = i;
                break;
            }
            iter.next();
        }
        Some(Word { text: &raw[start..end], start, end })
    })
}

/// Yes/no answer. Exactly one of the two tokens may occur (any number of times).
pub fn parse_binary(raw: &str) -> ParseOutcome {
    let mut yes = None;
    let mut no = None;
    for w in words(raw) {
        if w.text.eq_ignore_ascii_case("yes") {
            yes.get_or_insert((w.start, w.end));
        } else if w.text.eq_ignore_ascii_case("no") {
            no.get_or_insert((w.start, w.end));
        }
    }
    match (yes, no) {
        (Some(span), None) => ParseOutcome::Valid { label: Label::Binary(true), span },
        (None, Some(span)) => ParseOutcome::Valid { label: Label::Binary(false), span },
        (Some(_), Some(_)) => ParseOutcome::invalid(InvalidReason::BothTokens),
        (None, None) => ParseOutcome::invalid(InvalidReason::NoToken),
    }
}

/// Integer literals in `raw`: maximal ASCII digit runs, negative when directly
/// preceded by '-' that does not itself follow a digit. Values too large for
/// i64 saturate, which only ever lands them out of range.
fn integers(raw: &str) -> Vec<(i64, usize, usize)> {
    let bytes = raw.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if !bytes[i].is_ascii_digit() {
            i += 1;
            continue;
        }
        let digits_start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        let negative = digits_start > 0
            && bytes[digits_start - 1] == b'-'
            && !(digits_start > 1 && bytes[digits_start - 2].is_ascii_digit());
        let start = if negative { digits_start - 1 } else { digits_start };
        let magnitude = raw[digits_start..i].parse::<i64>().unwrap_or(i64::MAX);
        let value = if negative { -magnitude } else { magnitude };
        out.push((value, start, i));
    }
    out
}

/// Severity answer: exactly one integer, inside `[lo, hi]`.
pub fn parse_severity(raw: &str, allowed_range: (i64, i64)) -> ParseOutcome {
    let (lo, hi) = allowed_range;
    debug_assert!(lo <= hi, "empty severity range");
    let found = integers(raw);
    match found.as_slice() {
        [] => ParseOutcome::invalid(InvalidReason::NoToken),
        [(value, start, end)] => {
            if (lo..=hi).contains(value) {
                ParseOutcome::Valid { label: Label::Severity(*value), span: (*start, *end) }
            } else {
                ParseOutcome::invalid(InvalidReason::OutOfRange)
            }
        }
        _ => ParseOutcome::invalid(InvalidReason::MultipleNumbers),
    }
}

/// Category phrases, longest first so "Depressed and PTSD" wins over its parts.
const CATEGORY_PHRASES: [(&[&str], MulticlassLabel); 4] = [
    (&["depressed", "and", "ptsd"], MulticlassLabel::DepressedAndPtsd),
    (&["depressed"], MulticlassLabel::Depressed),
    (&["ptsd"], MulticlassLabel::Ptsd),
    (&["normal"], MulticlassLabel::Normal),
];

/// Four-way category answer.
pub fn parse_multiclass(raw: &str) -> ParseOutcome {
    let toks: Vec<Word<'_>> = words(raw).collect();
    let mut found: Option<(MulticlassLabel, (usize, usize))> = None;
    let mut i = 0;
    while i < toks.len() {
        let hit = CATEGORY_PHRASES.iter().find(|(phrase, _)| {
            i + phrase.len() <= toks.len() && phrase.iter().zip(&toks[i..]).all(|(p, w)| w.text.eq_ignore_ascii_case(p))
        });
        match hit {
            Some((phrase, label)) => {
                let span = (toks[i].start, toks[i + phrase.len() - 1].end);
                match found {
                    None => found = Some((*label, span)),
                    Some((prev, _)) if prev == *label => {}
                    Some(_) => return ParseOutcome::invalid(InvalidReason::AmbiguousCategory),
                }
                i += phrase.len();
            }
            None => i += 1,
        }
    }
    match found {
        Some((label, span)) => ParseOutcome::Valid { label: Label::Multiclass(label), span },
        None => ParseOutcome::invalid(InvalidReason::NoCategory),
    }
}

/// Lower-cased words of `text` joined by single spaces.
pub fn canonical_words(text: &str) -> String {
    words(text).map(|w| w.text.to_lowercase()).collect::<Vec<_>>().join(" ")
}
