mod common;

use std::collections::BTreeSet;

use common::parsing::*;
use modalscreen::parsers::{parse_binary, parse_for_task, parse_multiclass, parse_severity, InvalidReason};
use modalscreen::task::{Label, MulticlassLabel, Task};
use proptest::prelude::*;

#[test]
fn corpus_matches_expected_outcomes() {
    let cases = load_corpus();
    assert!(cases.len() >= 40, "only {} cases", cases.len());
    let failures = corpus_failures(&cases);
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn corpus_covers_every_outcome_kind() {
    let cases = load_corpus();
    let seen: BTreeSet<&str> = cases.iter().map(|c| c.expect.as_str()).collect();
    for r in [
        InvalidReason::BothTokens,
        InvalidReason::NoToken,
        InvalidReason::MultipleNumbers,
        InvalidReason::OutOfRange,
        InvalidReason::NoCategory,
        InvalidReason::AmbiguousCategory,
    ] {
        assert!(seen.contains(format!("invalid:{}", r.as_str()).as_str()), "{r:?}");
    }
    for task in Task::ALL {
        assert!(cases.iter().any(|c| c.task == task && !c.expect.starts_with("invalid")), "{task}");
    }
}

#[test]
fn corpus_spans_spell_their_labels() {
    for c in load_corpus() {
        assert_eq!(span_violation(&c.raw, &parse_case(&c)), None, "{:?}", c.raw);
    }
}

#[test]
fn short_fuzz_run() {
    let bad = fuzz(20_000, 11);
    assert!(bad.is_empty(), "{bad:#?}");
}

proptest! {
    #[test]
    fn arbitrary_text_parses_without_panicking(raw in any::<String>()) {
        for task in Task::ALL {
            let o = parse_for_task(task, &raw);
            prop_assert_eq!(span_violation(&raw, &o), None);
        }
    }

    #[test]
    fn binary_agrees_with_word_split_oracle(raw in "[a-zA-Z .,!?'\n-]{0,40}") {
        prop_assert_eq!(outcome_text(&parse_binary(&raw)), binary_oracle(&raw));
    }

    #[test]
    fn lone_integer_in_range_is_accepted(
        lo in -5i64..5,
        width in 0i64..10,
        offset in 0i64..10,
        prefix in "[a-zA-Z :]{0,12}",
        suffix in "[a-zA-Z .)(]{0,12}",
    ) {
        let hi = lo + width;
        let v = lo + offset.min(width);
        let raw = format!("{prefix} {v}{suffix}");
        let o = parse_severity(&raw, (lo, hi));
        prop_assert_eq!(o.label(), Some(Label::Severity(v)));
        let out = parse_severity(&format!("{prefix} {}{suffix}", hi + 1 + offset), (lo, hi));
        prop_assert_eq!(out.reason(), Some(InvalidReason::OutOfRange));
    }

    #[test]
    fn two_integers_are_always_rejected(a in 0i64..100, b in 0i64..100, sep in "( or | to |, |/)") {
        let o = parse_severity(&format!("{a}{sep}{b}"), (0, 100));
        prop_assert_eq!(o.reason(), Some(InvalidReason::MultipleNumbers));
    }

    #[test]
    fn a_repeated_category_is_still_one_answer(idx in 0usize..4, n in 1usize..4, filler in "[ .,;]{1,3}") {
        let label = MulticlassLabel::ALL[idx];
        let raw = vec![label.answer_text(); n].join(&filler);
        prop_assert_eq!(parse_multiclass(&raw).label(), Some(Label::Multiclass(label)));
    }
}
