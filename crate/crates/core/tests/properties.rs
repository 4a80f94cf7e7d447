use modalscreen::corpus::{
    apply_label_corrections, builtin_scales, replay_corrections, DatasetManifest, ParticipantRecord, Split, PCLC_MIN,
    PHQ_POSITIVE_THRESHOLD,
};
use modalscreen::metrics::{
    balanced_accuracy_present, f1_binary, mae_with_invalid, weighted_f1, ConfusionMatrix, ScoringMode,
};
use modalscreen::modality::{combined_resolution, compare, mss, partition, CorrectnessVector, Score};
use modalscreen::task::{Label, MulticlassLabel};
use proptest::prelude::*;

fn classes(k: usize) -> Vec<Label> {
    (0..k as i64).map(Label::Severity).collect()
}

/// (number of classes, (truth, prediction or invalid) pairs)
fn labelled(max_n: usize) -> impl Strategy<Value = (usize, Vec<(usize, Option<usize>)>)> {
    (2usize..=5).prop_flat_map(move |k| {
        let pair = (0..k, prop::option::weighted(0.85, 0..k));
        (Just(k), prop::collection::vec(pair, 1..max_n))
    })
}

fn matrix(k: usize, pairs: &[(usize, Option<usize>)], mode: ScoringMode) -> ConfusionMatrix {
    let it = pairs.iter().map(|&(t, p)| (Label::Severity(t as i64), p.map(|p| Label::Severity(p as i64))));
    ConfusionMatrix::from_pairs(classes(k), mode, it).unwrap()
}

fn modes() -> impl Strategy<Value = ScoringMode> {
    prop_oneof![Just(ScoringMode::CountInvalidAsWrong), Just(ScoringMode::ExcludeInvalid)]
}

fn vector(bits: &[bool]) -> CorrectnessVector {
    CorrectnessVector::from_bits("v", bits.iter().enumerate().map(|(i, b)| (i as u32, *b)))
}

fn same_score(a: Score, b: Score) -> bool {
    match (a, b) {
        (Score::Defined(x), Score::Defined(y)) => (x - y).abs() < 1e-9,
        (Score::Undefined, Score::Undefined) => true,
        _ => false,
    }
}

proptest! {
    #[test]
    fn scores_stay_in_unit_interval((k, pairs) in labelled(200), mode in modes()) {
        let cm = matrix(k, &pairs, mode);
        if let (Some(ba), _) = balanced_accuracy_present(&cm) {
            prop_assert!((0.0..=1.0).contains(&ba));
        }
        let wf1 = weighted_f1(&cm);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&wf1));
        for i in 0..k {
            prop_assert!((0.0..=1.0).contains(&cm.class_f1(i)));
        }
    }

    #[test]
    fn binary_ba_is_mean_of_sensitivity_and_specificity(
        pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 2..200),
    ) {
        prop_assume!(pairs.iter().any(|p| p.0) && pairs.iter().any(|p| !p.0));
        let cm = ConfusionMatrix::from_pairs(
            vec![Label::Binary(false), Label::Binary(true)],
            ScoringMode::CountInvalidAsWrong,
            pairs.iter().map(|&(t, p)| (Label::Binary(t), Some(Label::Binary(p)))),
        )
        .unwrap();
        let pos = pairs.iter().filter(|p| p.0).count() as f64;
        let neg = pairs.len() as f64 - pos;
        let sens = pairs.iter().filter(|p| p.0 && p.1).count() as f64 / pos;
        let spec = pairs.iter().filter(|p| !p.0 && !p.1).count() as f64 / neg;
        let ba = balanced_accuracy_present(&cm).0.unwrap();
        prop_assert!((ba - (sens + spec) / 2.0).abs() < 1e-12);
        let f1 = f1_binary(&cm, &Label::Binary(true)).unwrap();
        prop_assert!((0.0..=1.0).contains(&f1));
    }

    #[test]
    fn perfect_predictions_score_one((k, pairs) in labelled(100)) {
        let exact: Vec<_> = pairs.iter().map(|&(t, _)| (t, Some(t))).collect();
        let cm = matrix(k, &exact, ScoringMode::CountInvalidAsWrong);
        prop_assert_eq!(balanced_accuracy_present(&cm).0, Some(1.0));
        prop_assert!((weighted_f1(&cm) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicating_every_sample_leaves_scores_unchanged((k, pairs) in labelled(80), m in 2usize..5, mode in modes()) {
        let many: Vec<_> = pairs.iter().flat_map(|p| std::iter::repeat_n(*p, m)).collect();
        let (a, b) = (matrix(k, &pairs, mode), matrix(k, &many, mode));
        let close = |x: f64, y: f64| (x - y).abs() < 1e-12;
        match (balanced_accuracy_present(&a).0, balanced_accuracy_present(&b).0) {
            (Some(x), Some(y)) => prop_assert!(close(x, y)),
            (x, y) => prop_assert_eq!(x, y),
        }
        prop_assert!(close(weighted_f1(&a), weighted_f1(&b)));
    }

    #[test]
    fn invalid_answers_are_charged_at_least_any_valid_error(
        cases in prop::collection::vec((0i64..5, prop::option::of(0i64..5), 0i64..5), 1..60),
    ) {
        let truths: Vec<i64> = cases.iter().map(|c| c.0).collect();
        let preds: Vec<Option<i64>> = cases.iter().map(|c| c.1).collect();
        let filled: Vec<Option<i64>> = cases.iter().map(|c| Some(c.1.unwrap_or(c.2))).collect();
        let charged = mae_with_invalid(&truths, &preds, (0, 4), ScoringMode::CountInvalidAsWrong).unwrap().unwrap();
        let replaced = mae_with_invalid(&truths, &filled, (0, 4), ScoringMode::CountInvalidAsWrong).unwrap().unwrap();
        prop_assert!(charged >= replaced - 1e-12);
        prop_assert!(charged <= 4.0);
    }

    #[test]
    fn mss_is_antisymmetric_and_bounded(bits in prop::collection::vec((any::<bool>(), any::<bool>()), 1..300)) {
        let a = vector(&bits.iter().map(|b| b.0).collect::<Vec<_>>());
        let b = vector(&bits.iter().map(|b| b.1).collect::<Vec<_>>());
        let ab = mss(&partition(&a, &b).unwrap());
        let ba = mss(&partition(&b, &a).unwrap());
        match (ab, ba) {
            (Score::Defined(x), Score::Defined(y)) => {
                prop_assert!((x + y).abs() < 1e-9);
                prop_assert!((-100.0..=100.0).contains(&x));
            }
            (Score::Undefined, Score::Undefined) => prop_assert!(bits.iter().all(|b| b.0 == b.1)),
            other => prop_assert!(false, "{other:?}"),
        }
    }

    #[test]
    fn mss_and_drs_are_invariant_to_duplication(
        bits in prop::collection::vec((any::<bool>(), any::<bool>(), any::<bool>()), 1..120),
        m in 2usize..6,
    ) {
        let col = |f: fn(&(bool, bool, bool)) -> bool, times: usize| {
            vector(&bits.iter().flat_map(|b| std::iter::repeat_n(f(b), times)).collect::<Vec<_>>())
        };
        let once = compare(&col(|b| b.0, 1), &col(|b| b.1, 1), Some(&col(|b| b.2, 1))).unwrap();
        let many = compare(&col(|b| b.0, m), &col(|b| b.1, m), Some(&col(|b| b.2, m))).unwrap();
        prop_assert!(same_score(once.mss_a_vs_b, many.mss_a_vs_b));
        prop_assert!(same_score(once.drs.unwrap(), many.drs.unwrap()));
        prop_assert!(same_score(once.mss_combined_vs_a.unwrap(), many.mss_combined_vs_a.unwrap()));
        prop_assert_eq!(many.co_occurrence.total(), (bits.len() * m) as u64);
    }

    #[test]
    fn resolution_pairs_with_partition(bits in prop::collection::vec((any::<bool>(), any::<bool>(), any::<bool>()), 1..200)) {
        let a = vector(&bits.iter().map(|b| b.0).collect::<Vec<_>>());
        let b = vector(&bits.iter().map(|b| b.1).collect::<Vec<_>>());
        let c = vector(&bits.iter().map(|b| b.2).collect::<Vec<_>>());
        let p = partition(&a, &b).unwrap();
        let r = combined_resolution(&a, &b, &c).unwrap();
        prop_assert_eq!(r.resolved_correctly + r.resolved_incorrectly, p.disagreements());
        let all = r.resolved_correctly + r.resolved_incorrectly + r.flipped_agreement_right
            + r.flipped_agreement_wrong + r.confirmed_agreement;
        prop_assert_eq!(all, bits.len() as u64);
    }

    #[test]
    fn binary_correctness_disagrees_exactly_where_predictions_do(
        rows in prop::collection::vec((any::<bool>(), any::<bool>(), any::<bool>()), 1..200),
    ) {
        let a = vector(&rows.iter().map(|(t, pa, _)| pa == t).collect::<Vec<_>>());
        let b = vector(&rows.iter().map(|(t, _, pb)| pb == t).collect::<Vec<_>>());
        let differing = rows.iter().filter(|(_, pa, pb)| pa != pb).count() as u64;
        prop_assert_eq!(partition(&a, &b).unwrap().disagreements(), differing);
    }

    #[test]
    fn corrections_replay_to_the_same_manifest(
        rows in prop::collection::vec((0i64..=24, 0u8..=1, 0i64..=85), 0..60),
    ) {
        let raw = DatasetManifest {
            records: rows
                .iter()
                .enumerate()
                .map(|(i, &(phq, bin, pcl))| ParticipantRecord {
                    participant_id: 300 + i as u32,
                    phq_score: phq,
                    phq_binary: bin,
                    pclc_binary: (pcl > 44) as u8,
                    ptsd_severity: pcl,
                    split: Split::Train,
                    transcript_path: None,
                    audio_path: None,
                })
                .collect(),
            ..Default::default()
        };
        let fixed = apply_label_corrections(raw.clone());
        for r in &fixed.records {
            prop_assert_eq!(r.phq_binary == 1, r.phq_score >= PHQ_POSITIVE_THRESHOLD);
            prop_assert!(r.ptsd_severity >= PCLC_MIN);
        }
        let replayed = replay_corrections(&raw, &fixed.correction_log).unwrap();
        prop_assert_eq!(&replayed, &fixed);
        let again = apply_label_corrections(fixed.clone());
        prop_assert_eq!(again.correction_log.len(), fixed.correction_log.len());
    }
}

#[test]
fn every_builtin_scale_is_total_and_monotone_on_its_range() {
    for s in builtin_scales() {
        let (lo, hi) = s.range();
        let labels: Vec<i64> = (lo..=hi).map(|v| s.map(v).unwrap()).collect();
        assert!(labels.windows(2).all(|w| w[0] <= w[1] && w[1] - w[0] <= 1), "{}", s.name);
        assert_eq!(labels[0], 0, "{}", s.name);
        assert_eq!(*labels.last().unwrap(), s.n_labels() as i64 - 1, "{}", s.name);
        assert!(s.map(lo - 1).is_err() && s.map(hi + 1).is_err(), "{}", s.name);
    }
}

#[test]
fn multiclass_bits_round_trip() {
    for l in MulticlassLabel::ALL {
        let (d, p) = l.bits();
        assert_eq!(MulticlassLabel::from_bits(d, p), l);
    }
    for d in [false, true] {
        for p in [false, true] {
            assert_eq!(MulticlassLabel::from_bits(d, p).bits(), (d, p));
        }
    }
}
