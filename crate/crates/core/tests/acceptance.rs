//! Acceptance suite. Run with `--nocapture` to see one PASS/FAIL line per criterion.

mod common;

use std::collections::{BTreeMap, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use common::parsing::{corpus_failures, fuzz, load_corpus};
use common::*;
use modalscreen::corpus::{
    apply_label_corrections, load_manifest, ptsd_reference_scale, summarize_distribution, CorrectionField,
    DatasetManifest, ManifestLayout, ParticipantRecord, Split,
};
use modalscreen::harness::{
    correctness_vector, execute, read_predictions, score, ExecuteOptions, RunStatus, PREDICTIONS_FILE, RECORDS_FILE,
};
use modalscreen::metrics::{
    balanced_accuracy_present, f1_binary, mae_with_invalid, weighted_f1, ConfusionMatrix, ScoringMode,
};
use modalscreen::modality::{compare, drs, mss, CombinedResolution, CorrectnessVector, DisagreementPartition, Score};
use modalscreen::prompts::{render_few_shot, FewShotExample, Slots, TemplateStore};
use modalscreen::providers::{
    AccuracyByModality, Clock, CountingTransport, HttpRequest, HttpResponse, MockBehavior, MockTransport, SimClock,
    Transport, TransportError,
};
use modalscreen::task::{Label, Modality, Task, TaskKind, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn sim() -> ExecuteOptions {
    ExecuteOptions { clock: Some(Arc::new(SimClock::new())), ..Default::default() }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

// 1. Metric oracles

fn naive_f1(truth: &[usize], pred: &[Option<usize>], c: usize, mode: ScoringMode) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for (&t, &p) in truth.iter().zip(pred) {
        if p.is_none() && mode == ScoringMode::ExcludeInvalid {
            continue;
        }
        if t == c && p == Some(c) {
            tp += 1;
        } else if t == c {
            fn_ += 1;
        } else if p == Some(c) {
            fp += 1;
        }
    }
    if tp == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    }
}

fn naive_support(truth: &[usize], pred: &[Option<usize>], c: usize, mode: ScoringMode) -> u64 {
    truth
        .iter()
        .zip(pred)
        .filter(|(t, p)| **t == c && (p.is_some() || mode == ScoringMode::CountInvalidAsWrong))
        .count() as u64
}

fn naive_ba(truth: &[usize], pred: &[Option<usize>], k: usize, mode: ScoringMode) -> Option<f64> {
    let mut recalls = Vec::new();
    for c in 0..k {
        let support = naive_support(truth, pred, c, mode);
        if support == 0 {
            continue;
        }
        let hits = truth.iter().zip(pred).filter(|(t, p)| **t == c && **p == Some(c)).count();
        recalls.push(hits as f64 / support as f64);
    }
    (!recalls.is_empty()).then(|| recalls.iter().sum::<f64>() / recalls.len() as f64)
}

fn naive_weighted_f1(truth: &[usize], pred: &[Option<usize>], k: usize, mode: ScoringMode) -> f64 {
    let total: u64 = (0..k).map(|c| naive_support(truth, pred, c, mode)).sum();
    if total == 0 {
        return 0.0;
    }
    (0..k).map(|c| naive_support(truth, pred, c, mode) as f64 / total as f64 * naive_f1(truth, pred, c, mode)).sum()
}

fn naive_mae(truth: &[usize], pred: &[Option<usize>], k: usize, mode: ScoringMode) -> Option<f64> {
    let hi = k as i64 - 1;
    let mut sum = 0i64;
    let mut n = 0i64;
    for (&t, &p) in truth.iter().zip(pred) {
        let t = t as i64;
        match p {
            Some(p) => sum += (t - p as i64).abs(),
            None if mode == ScoringMode::CountInvalidAsWrong => sum += t.max(hi - t),
            None => continue,
        }
        n += 1;
    }
    (n > 0).then(|| sum as f64 / n as f64)
}

fn opt_close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => close(a, b),
        (None, None) => true,
        _ => false,
    }
}

fn metric_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let trials = 10_000;
    for trial in 0..trials {
        let k = rng.gen_range(2..=5usize);
        let n = rng.gen_range(1..=200usize);
        let invalid_p = if trial % 3 == 0 { 0.2 } else { 0.0 };
        let truth: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let pred: Vec<Option<usize>> =
            (0..n).map(|_| (!rng.gen_bool(invalid_p)).then(|| rng.gen_range(0..k))).collect();
        let classes: Vec<Label> = (0..k as i64).map(Label::Severity).collect();
        for mode in [ScoringMode::CountInvalidAsWrong, ScoringMode::ExcludeInvalid] {
            let pairs = truth
                .iter()
                .zip(&pred)
                .map(|(&t, p)| (Label::Severity(t as i64), p.map(|p| Label::Severity(p as i64))));
            let cm = ConfusionMatrix::from_pairs(classes.clone(), mode, pairs).map_err(|e| e.to_string())?;
            let ba = balanced_accuracy_present(&cm).0;
            ensure!(opt_close(ba, naive_ba(&truth, &pred, k, mode)), "trial {trial} {mode:?}: BA {ba:?}");
            let wf1 = weighted_f1(&cm);
            ensure!(close(wf1, naive_weighted_f1(&truth, &pred, k, mode)), "trial {trial} {mode:?}: weighted F1 {wf1}");
            if k == 2 {
                let f1 = f1_binary(&cm, &Label::Severity(1)).map_err(|e| e.to_string())?;
                ensure!(close(f1, naive_f1(&truth, &pred, 1, mode)), "trial {trial} {mode:?}: F1 {f1}");
            }
            let t: Vec<i64> = truth.iter().map(|&t| t as i64).collect();
            let p: Vec<Option<i64>> = pred.iter().map(|p| p.map(|p| p as i64)).collect();
            let mae = mae_with_invalid(&t, &p, (0, k as i64 - 1), mode).map_err(|e| e.to_string())?;
            ensure!(opt_close(mae, naive_mae(&truth, &pred, k, mode)), "trial {trial} {mode:?}: MAE {mae:?}");
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!("{trials} vectors x 2 scoring modes in {:.2}s", elapsed.as_secs_f64()))
}

// 2. MSS / DRS

/// Vectors for A, B and combined with the given disagreement and resolution
/// counts, padded with agreement samples.
fn realize(a_only: u32, b_only: u32, resolved_right: u32, agree: u32) -> [CorrectnessVector; 3] {
    let mut rows = Vec::new();
    for i in 0..a_only + b_only {
        let a = i < a_only;
        rows.push((a, !a, i < resolved_right));
    }
    for i in 0..agree {
        let both = i % 2 == 0;
        rows.push((both, both, both));
    }
    let col = |f: fn(&(bool, bool, bool)) -> bool, name: &str| {
        CorrectnessVector::from_bits(name, rows.iter().enumerate().map(|(i, r)| (i as u32, f(r))))
    };
    [col(|r| r.0, "a"), col(|r| r.1, "b"), col(|r| r.2, "combined")]
}

fn pct(s: Score) -> String {
    match s {
        Score::Defined(v) => format!("{v:.2}"),
        Score::Undefined => "undefined".into(),
    }
}

fn mss_drs() -> Outcome {
    // Reference text vs audio counts: (a_only, b_only, resolved correctly).
    let cases = [((10, 13, 12), "-13.04", "4.35"), ((21, 8, 8), "44.83", "-44.83")];
    for ((a_only, b_only, right), want_mss, want_drs) in cases {
        let [a, b, c] = realize(a_only, b_only, right, 40);
        let cmp = compare(&a, &b, Some(&c)).map_err(|e| e.to_string())?;
        ensure!(pct(cmp.mss_a_vs_b) == want_mss, "MSS({a_only},{b_only}) = {}", pct(cmp.mss_a_vs_b));
        let d = cmp.drs.unwrap();
        ensure!(pct(d) == want_drs, "DRS({right},{}) = {}", a_only + b_only - right, pct(d));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let draws = 100_000;
    for _ in 0..draws {
        let p = DisagreementPartition {
            a_only_correct: rng.gen_range(0..500),
            b_only_correct: rng.gen_range(0..500),
            both_correct: rng.gen_range(0..500),
            both_incorrect: rng.gen_range(0..500),
        };
        let swapped = DisagreementPartition { a_only_correct: p.b_only_correct, b_only_correct: p.a_only_correct, ..p };
        match (mss(&p), mss(&swapped)) {
            (Score::Defined(x), Score::Defined(y)) => {
                ensure!((x + y).abs() < 1e-9, "antisymmetry fails for {p:?}");
                ensure!((-100.0..=100.0).contains(&x), "MSS {x} out of range for {p:?}");
            }
            (Score::Undefined, Score::Undefined) => {
                ensure!(p.disagreements() == 0, "undefined MSS for {p:?}")
            }
            other => return Err(format!("one-sided definition {other:?} for {p:?}")),
        }
        let r = CombinedResolution {
            resolved_correctly: p.a_only_correct,
            resolved_incorrectly: p.b_only_correct,
            ..Default::default()
        };
        if let Score::Defined(v) = drs(&r) {
            ensure!((-100.0..=100.0).contains(&v), "DRS {v} out of range");
        }
    }
    Ok(format!("-13.04 / 4.35 and 44.83 / -44.83 reproduced; {draws} random partitions"))
}

// 3 and 4. Corpus

/// Participants listed as mislabeled in the raw label sheet.
const LISTED_MISLABELED: [u32; 20] =
    [320, 325, 335, 344, 352, 356, 380, 386, 409, 413, 418, 422, 433, 459, 483, 633, 682, 691, 696, 709];

fn raw_reference_fixture(dir: &Path, seed: u64) -> DatasetManifest {
    let path = fixture(dir, "paper", seed);
    load_manifest(&path, ManifestLayout::GenericCsv).unwrap()
}

fn severity_counts() -> Outcome {
    for seed in [1, 2, 3] {
        let dir = tempfile::tempdir().unwrap();
        let m = apply_label_corrections(raw_reference_fixture(dir.path(), seed));
        let dist = summarize_distribution(&m, ptsd_reference_scale()).map_err(|e| e.to_string())?;
        let dep: Vec<u64> = dist.depression_severity.values().copied().collect();
        let ptsd: Vec<u64> = dist.ptsd_severity.values().copied().collect();
        ensure!(dep == [122, 67, 43, 33, 10], "seed {seed}: depression {dep:?}");
        ensure!(ptsd == [137, 51, 87], "seed {seed}: ptsd {ptsd:?}");
    }
    Ok("depression {122,67,43,33,10}, PTSD reference {137,51,87} over 3 seeds".into())
}

fn label_corrections() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let raw = raw_reference_fixture(dir.path(), 5);
    let by_id: BTreeMap<u32, &ParticipantRecord> = raw.records.iter().map(|r| (r.participant_id, r)).collect();
    for id in LISTED_MISLABELED {
        let r = by_id.get(&id).ok_or(format!("{id} missing from fixture"))?;
        ensure!(r.phq_binary == 0 && r.phq_score >= 10, "{id} is not mislabeled in the raw fixture");
    }
    ensure!(by_id[&683].ptsd_severity == 10, "683 raw PCL-C is {}", by_id[&683].ptsd_severity);

    let fixed = apply_label_corrections(raw.clone());
    let mut phq: Vec<u32> = fixed
        .correction_log
        .iter()
        .filter(|c| c.field == CorrectionField::PhqBinary && c.old == 0 && c.new == 1)
        .map(|c| c.participant_id)
        .collect();
    phq.sort();
    ensure!(phq == LISTED_MISLABELED, "PHQ corrections logged for {phq:?}");
    let clamp = fixed.correction_log.iter().find(|c| c.field == CorrectionField::PtsdSeverity);
    ensure!(clamp.is_some_and(|c| c.participant_id == 683 && c.old == 10 && c.new == 17), "clamp log entry {clamp:?}");
    ensure!(fixed.correction_log.len() == 21, "{} log entries", fixed.correction_log.len());
    let r683 = fixed.get(683).unwrap();
    ensure!(r683.ptsd_severity == 17, "683 corrected to {}", r683.ptsd_severity);
    for id in LISTED_MISLABELED {
        ensure!(fixed.get(id).unwrap().phq_binary == 1, "{id} still negative");
    }
    let dist = summarize_distribution(&fixed, ptsd_reference_scale()).map_err(|e| e.to_string())?;
    ensure!(dist.phq_binary == [189, 86], "PHQ binary {:?}", dist.phq_binary);
    Ok("20 PHQ labels corrected and logged, 189/86, 683 clamped 10 -> 17".into())
}

// 5. Prompt goldens

const GOLDEN_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/templates/golden");

fn golden(name: &str) -> String {
    let text = std::fs::read_to_string(Path::new(GOLDEN_DIR).join(format!("{name}.txt"))).unwrap();
    text.strip_suffix('\n').unwrap_or(&text).to_string()
}

fn sentinels(task: Task) -> Slots {
    let input = if task.kind() == TaskKind::Binary { "(input)" } else { "{input}" };
    Slots {
        input: input.into(),
        input_type: "(input type of the interview)".into(),
        illness: "(illness)".into(),
        medium: "(input)".into(),
        modality: "text/audio".into(),
    }
}

fn prompt_goldens() -> Outcome {
    let store = TemplateStore::builtin();
    let cases = [
        (Task::DepBinary, Variant::P1, "binary_p1"),
        (Task::DepBinary, Variant::P2, "binary_p2"),
        (Task::DepBinary, Variant::P3, "binary_p3"),
        (Task::DepSeverity, Variant::P1, "dep_severity_p1"),
        (Task::DepSeverity, Variant::P2, "dep_severity_p2"),
        (Task::PtsdSeverity, Variant::P1, "ptsd_severity_p1"),
        (Task::PtsdSeverity, Variant::P2, "ptsd_severity_p2"),
        (Task::Multiclass, Variant::P1, "multiclass_p1"),
        (Task::Multiclass, Variant::P2, "multiclass_p2"),
    ];
    for (task, variant, name) in cases {
        let t = store.template(task, variant).map_err(|e| e.to_string())?;
        ensure!(t.fill(&sentinels(task)) == golden(name), "{name} differs from its golden");
    }

    let dir = tempfile::tempdir().unwrap();
    let tpath = dir.path().join("900_Transcript.txt");
    std::fs::write(&tpath, "sample to be labeled").unwrap();
    let subject = ParticipantRecord {
        participant_id: 900,
        phq_score: 0,
        phq_binary: 0,
        pclc_binary: 0,
        ptsd_severity: 17,
        split: Split::Test,
        transcript_path: Some(tpath),
        audio_path: None,
    };
    let ex = |id, label: &str| FewShotExample {
        participant_id: id,
        content: "(sample transcription)".into(),
        label_text: label.into(),
    };
    let examples = [ex(1, "No"), ex(2, "Yes"), ex(3, "Yes")];
    let t = store.template(Task::DepBinary, Variant::P1).map_err(|e| e.to_string())?;
    let text = render_few_shot(&t, &subject, Modality::Text, &examples).map_err(|e| e.to_string())?.text;
    ensure!(text == golden("few_shot_dep_binary_p1"), "few-shot rendering differs from its golden");
    let count = text.find("Here are 3 samples from these interviews and their labels. Use them as a reference:");
    let labels: Vec<usize> = ["First sample label: No", "Second sample label: Yes", "Third sample label: Yes"]
        .iter()
        .filter_map(|l| text.find(l))
        .collect();
    let tail = text.rfind("Label the following transcription: 'sample to be labeled'.");
    ensure!(
        count.is_some() && labels.len() == 3 && labels.windows(2).all(|w| w[0] < w[1]),
        "few-shot count line or exemplar blocks out of order"
    );
    ensure!(count < labels.first().copied() && tail > labels.last().copied(), "few-shot sections out of order");
    ensure!(text.ends_with("'sample to be labeled'."), "few-shot prompt does not end with the subject line");
    Ok("9 zero-shot templates byte-identical; No/Yes/Yes few-shot structure reproduced".into())
}

// 6. Parser corpus and fuzz

fn parser_corpus() -> Outcome {
    let cases = load_corpus();
    ensure!(cases.len() >= 40, "corpus has only {} cases", cases.len());
    let failures = corpus_failures(&cases);
    ensure!(failures.is_empty(), "corpus failures: {failures:?}");
    let n = 1_000_000;
    let bad = fuzz(n, 99);
    ensure!(bad.is_empty(), "fuzz violations: {bad:?}");
    Ok(format!("{}/{} corpus cases; {n} fuzz inputs x {} tasks clean", cases.len(), cases.len(), Task::ALL.len()))
}

// 7. End-to-end determinism and calibrated modality analysis

fn run_files(dir: &Path) -> Vec<String> {
    [RECORDS_FILE, PREDICTIONS_FILE, "metrics/summary.csv"].iter().map(|f| read(&dir.join(f))).collect()
}

fn calibrated(seed: u64) -> MockBehavior {
    MockBehavior {
        accuracy_by_modality: AccuracyByModality { text: 0.75, audio: 0.70, audio_text: 0.80 },
        seed,
        ..MockBehavior::default()
    }
}

fn determinism_and_modality() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let manifest = fixture(dir.path(), "uniform:40", 11);
    let mut outputs = Vec::new();
    let mut slowest = Duration::ZERO;
    for name in ["first", "second"] {
        let start = Instant::now();
        let cfg = config(&manifest, &dir.path().join(name), vec![Task::DepBinary], mock("mock", calibrated(3)));
        let out = execute(&cfg, &sim()).map_err(|e| e.to_string())?;
        score(&out.run_dir).map_err(|e| e.to_string())?;
        slowest = slowest.max(start.elapsed());
        ensure!(out.status == RunStatus::Complete && out.total_records == 3 * 3 * 40, "{} records", out.total_records);
        outputs.push(run_files(&out.run_dir));
    }
    ensure!(slowest < Duration::from_secs(10), "grid run took {slowest:?}");
    ensure!(outputs[0] == outputs[1], "outputs differ between identical runs");

    let reference = tempfile::tempdir().unwrap();
    let manifest = fixture(reference.path(), "paper", 12);
    let seeds = 20;
    let (mut vs_text, mut vs_audio) = (0.0, 0.0);
    for seed in 0..seeds {
        let mut cfg = config(
            &manifest,
            &reference.path().join(format!("s{seed}")),
            vec![Task::DepBinary],
            mock("mock", calibrated(seed)),
        );
        cfg.variants.insert("dep_binary".into(), vec![Variant::P1]);
        let out = execute(&cfg, &sim()).map_err(|e| e.to_string())?;
        let rows = read_predictions(&out.run_dir.join(PREDICTIONS_FILE)).map_err(|e| e.to_string())?;
        let vec_for =
            |m: Modality| correctness_vector(&rows, m.as_str(), |r| r.modality == m).map_err(|e| e.to_string());
        let (text, audio, both) = (vec_for(Modality::Text)?, vec_for(Modality::Audio)?, vec_for(Modality::AudioText)?);
        ensure!(text.len() == 275, "{} participants", text.len());
        let cmp = compare(&text, &audio, Some(&both)).map_err(|e| e.to_string())?;
        vs_text += cmp.mss_combined_vs_a.and_then(Score::value).ok_or("undefined MSS vs text")?;
        vs_audio += cmp.mss_combined_vs_b.and_then(Score::value).ok_or("undefined MSS vs audio")?;
    }
    let (vs_text, vs_audio) = (vs_text / seeds as f64, vs_audio / seeds as f64);
    ensure!(vs_text > 0.0 && vs_audio > 0.0, "mean MSS combined vs text {vs_text:.2}, vs audio {vs_audio:.2}");
    Ok(format!(
        "360-request grid byte-identical, slowest {:.2}s; mean MSS combined vs text {vs_text:+.2}, vs audio {vs_audio:+.2} over {seeds} seeds",
        slowest.as_secs_f64()
    ))
}

// 8. Resume

fn resume() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let manifest = fixture(dir.path(), "uniform:40", 21);
    let b = MockBehavior { invalid_rate: 0.1, ..calibrated(4) };
    let cfg = config(&manifest, &dir.path().join("killed"), vec![Task::DepBinary], mock("mock", b.clone()));
    let (n, k) = (3 * 3 * 40, 137);
    let first = execute(&cfg, &ExecuteOptions { stop_after: Some(k), ..sim() }).map_err(|e| e.to_string())?;
    ensure!(first.status == RunStatus::Interrupted && first.total_records == k, "stopped with {}", first.total_records);

    let counter = Arc::new(CountingTransport::new(MockTransport::new(b.clone())));
    let mut transports: HashMap<String, Arc<dyn Transport>> = HashMap::new();
    transports.insert("mock".into(), counter.clone());
    let resumed = execute(&cfg, &ExecuteOptions { resume: true, transports, ..sim() }).map_err(|e| e.to_string())?;
    ensure!(resumed.status == RunStatus::Complete, "resume ended {:?}", resumed.status);
    ensure!(counter.calls() == n - k, "{} transport calls, expected {}", counter.calls(), n - k);
    score(&resumed.run_dir).map_err(|e| e.to_string())?;

    let mut whole = cfg.clone();
    whole.output_dir = dir.path().join("whole");
    let out = execute(&whole, &sim()).map_err(|e| e.to_string())?;
    score(&out.run_dir).map_err(|e| e.to_string())?;
    ensure!(run_files(&resumed.run_dir) == run_files(&out.run_dir), "resumed outputs differ from an uninterrupted run");
    Ok(format!("killed after {k} of {n}; resume made {} calls; outputs identical", n - k))
}

// 9. Rate limiting

struct Stamping {
    clock: Arc<SimClock>,
    inner: MockTransport,
    stamps: Mutex<Vec<Duration>>,
}

impl Transport for Stamping {
    fn send(&self, req: &HttpRequest, timeout: Duration) -> Result<HttpResponse, TransportError> {
        self.stamps.lock().unwrap().push(self.clock.now());
        self.inner.send(req, timeout)
    }
}

fn rate_limit() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let manifest = fixture(dir.path(), "uniform:500", 31);
    let b = calibrated(5);
    let mut provider = mock("limited", b.clone());
    provider.requests_per_minute = 60;
    let mut cfg = config(&manifest, &dir.path().join("run"), vec![Task::DepBinary], provider);
    cfg.modalities = vec![Modality::Text];
    cfg.variants.insert("dep_binary".into(), vec![Variant::P1, Variant::P2]);
    cfg.workers = Some(1);

    let clock = Arc::new(SimClock::new());
    let stamping =
        Arc::new(Stamping { clock: clock.clone(), inner: MockTransport::new(b), stamps: Mutex::new(vec![]) });
    let mut transports: HashMap<String, Arc<dyn Transport>> = HashMap::new();
    transports.insert("limited".into(), stamping.clone());
    let opts = ExecuteOptions { transports, clock: Some(clock.clone()), ..Default::default() };
    let out = execute(&cfg, &opts).map_err(|e| e.to_string())?;
    ensure!(out.status == RunStatus::Complete, "run ended {:?}", out.status);

    let mut stamps = stamping.stamps.lock().unwrap().clone();
    ensure!(stamps.len() == 1000, "{} dispatches", stamps.len());
    stamps.sort();
    let window = Duration::from_secs(60);
    let busiest = (0..stamps.len())
        .map(|i| stamps[i..].iter().take_while(|&&t| t < stamps[i] + window).count())
        .max()
        .unwrap_or(0);
    ensure!(busiest <= 60, "a 60 s window holds {busiest} dispatches");
    Ok(format!("1000 dispatches over {:.0} simulated s; busiest 60 s window {busiest}", clock.now().as_secs_f64()))
}

fn panic_text(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "panicked".into())
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("metric oracle suite", metric_oracles),
        ("MSS/DRS values and properties", mss_drs),
        ("severity mapping counts", severity_counts),
        ("label correction audit", label_corrections),
        ("prompt golden files", prompt_goldens),
        ("parser corpus and fuzz", parser_corpus),
        ("end-to-end determinism and modality gain", determinism_and_modality),
        ("resume correctness", resume),
        ("rate-limit conformance", rate_limit),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| Err(panic_text(p)));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS [{}] {name}: {detail} ({secs:.1}s)", i + 1),
            Err(why) => {
                println!("FAIL [{}] {name}: {why} ({secs:.1}s)", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
