//! Deterministic synthetic corpora for offline runs.
//!
//! The `paper_marginals` profile reproduces the published label marginals of
//! the 275-interview corpus, including its known defects: the twenty
//! participants whose PHQ_Binary was recorded as 0 despite a PHQ-8 total of
//! 10 or more, and one PCL-C total below the scale minimum. The manifest is
//! written raw, so running the correction pass over it is meaningful.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::{IteratorRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    depression_scale, load_manifest, ptsd_reference_scale, write_manifest, CorpusError, DatasetManifest,
    ManifestLayout, ParticipantRecord, Split, PCLC_POSITIVE_ABOVE, PHQ_POSITIVE_THRESHOLD,
};

/// Participants whose PHQ_Binary is 0 in the raw label sheet although their
/// PHQ-8 total is 10 or higher.
pub const MISLABELED_PHQ_IDS: [u32; 20] =
    [320, 325, 335, 344, 352, 356, 380, 386, 409, 413, 418, 422, 433, 459, 483, 633, 682, 691, 696, 709];

/// Participant whose raw PCL-C total (10) lies below the scale minimum.
pub const PTSD_CLAMPED_ID: u32 = 683;
const PTSD_CLAMPED_RAW: i64 = 10;

const REFERENCE_TOTAL: usize = 275;
/// Depression severity label counts, labels 0..=4.
const REFERENCE_DEPRESSION_COUNTS: [usize; 5] = [122, 67, 43, 33, 10];
/// PTSD reference-scale label counts, labels 0..=2.
const REFERENCE_PTSD_COUNTS: [usize; 3] = [137, 51, 87];
/// Train / dev / test sizes.
const REFERENCE_SPLITS: [usize; 3] = [163, 56, 56];
const REFERENCE_ID_RANGE: std::ops::RangeInclusive<u32> = 300..=718;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FixtureProfile {
    /// 275 records with the published marginals and raw-label defects.
    PaperMarginals,
    /// `n` records spread evenly over the severity labels of both scales.
    Uniform { n: usize },
    /// Explicit depression counts; PTSD positives default to the depression positives.
    Custom { dep_positive: usize, dep_negative: usize, ptsd_positive: Option<usize> },
}

impl FromStr for FixtureProfile {
    type Err = CorpusError;

    /// `paper`, `uniform[:N]`, or `custom:pos=P,neg=N[,ptsd_pos=Q]`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CorpusError::InvalidProfile(s.to_string());
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        match name {
            "paper" | "paper_marginals" if args.is_empty() => Ok(FixtureProfile::PaperMarginals),
            "uniform" => {
                let n = if args.is_empty() { 40 } else { args.parse().map_err(|_| bad())? };
                Ok(FixtureProfile::Uniform { n })
            }
            "custom" => {
                let (mut pos, mut neg, mut ptsd) = (None, None, None);
                for kv in args.split(',').filter(|kv| !kv.is_empty()) {
                    let (k, v) = kv.split_once('=').ok_or_else(bad)?;
                    let v: usize = v.trim().parse().map_err(|_| bad())?;
                    match k.trim() {
                        "pos" => pos = Some(v),
                        "neg" => neg = Some(v),
                        "ptsd_pos" => ptsd = Some(v),
                        _ => return Err(bad()),
                    }
                }
                Ok(FixtureProfile::Custom {
                    dep_positive: pos.ok_or_else(bad)?,
                    dep_negative: neg.ok_or_else(bad)?,
                    ptsd_positive: ptsd,
                })
            }
            _ => Err(bad()),
        }
    }
}

/// A generated corpus on disk.
#[derive(Debug, Clone)]
pub struct SyntheticFixture {
    pub manifest_path: PathBuf,
    /// The raw manifest as loaded back from `manifest_path`.
    pub manifest: DatasetManifest,
}

struct Draft {
    id: u32,
    dep_label: i64,
    ptsd_label: i64,
    split: Split,
}

fn shuffled_labels(counts: &[usize], rng: &mut ChaCha8Rng) -> Vec<i64> {
    let mut v: Vec<i64> = counts.iter().enumerate().flat_map(|(l, &c)| std::iter::repeat(l as i64).take(c)).collect();
    v.shuffle(rng);
    v
}

fn shuffled_splits(sizes: [usize; 3], rng: &mut ChaCha8Rng) -> Vec<Split> {
    let mut v: Vec<Split> = [Split::Train, Split::Dev, Split::Test]
        .iter()
        .zip(sizes)
        .flat_map(|(s, n)| std::iter::repeat(*s).take(n))
        .collect();
    v.shuffle(rng);
    v
}

fn split_sizes(n: usize) -> [usize; 3] {
    let dev = n / 5;
    let test = n / 5;
    [n - dev - test, dev, test]
}

fn score_in(lo: i64, hi: i64, rng: &mut ChaCha8Rng) -> i64 {
    rng.gen_range(lo..=hi)
}

fn reference_drafts(rng: &mut ChaCha8Rng) -> Vec<Draft> {
    let required: BTreeSet<u32> = MISLABELED_PHQ_IDS.iter().copied().chain([PTSD_CLAMPED_ID]).collect();
    let mut ids: BTreeSet<u32> = REFERENCE_ID_RANGE
        .filter(|id| !required.contains(id))
        .choose_multiple(rng, REFERENCE_TOTAL - required.len())
        .into_iter()
        .collect();
    ids.extend(&required);

    // Mislabeled participants need a positive depression label; the clamped
    // participant sits in the lowest PTSD bin.
    let mut dep = shuffled_labels(&REFERENCE_DEPRESSION_COUNTS, rng);
    let mut ptsd = shuffled_labels(&REFERENCE_PTSD_COUNTS, rng);
    let splits = shuffled_splits(REFERENCE_SPLITS, rng);
    let ids: Vec<u32> = ids.into_iter().collect();
    let positive_from = depression_scale().map(PHQ_POSITIVE_THRESHOLD).expect("threshold on scale");
    for (i, id) in ids.iter().enumerate() {
        if MISLABELED_PHQ_IDS.contains(id) && dep[i] < positive_from {
            let j = (0..dep.len())
                .find(|&j| dep[j] >= positive_from && !MISLABELED_PHQ_IDS.contains(&ids[j]))
                .expect("enough positives");
            dep.swap(i, j);
        }
        if *id == PTSD_CLAMPED_ID && ptsd[i] != 0 {
            let j = (0..ptsd.len()).find(|&j| ptsd[j] == 0).expect("a low-severity slot");
            ptsd.swap(i, j);
        }
    }
    ids.into_iter()
        .zip(dep)
        .zip(ptsd)
        .zip(splits)
        .map(|(((id, dep_label), ptsd_label), split)| Draft { id, dep_label, ptsd_label, split })
        .collect()
}

fn sequential_drafts(dep: Vec<i64>, ptsd: Vec<i64>, rng: &mut ChaCha8Rng) -> Vec<Draft> {
    let n = dep.len();
    let splits = shuffled_splits(split_sizes(n), rng);
    (0..n).map(|i| Draft { id: 300 + i as u32, dep_label: dep[i], ptsd_label: ptsd[i], split: splits[i] }).collect()
}

fn custom_drafts(
    dep_positive: usize,
    dep_negative: usize,
    ptsd_positive: Option<usize>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Draft>, CorpusError> {
    let n = dep_positive + dep_negative;
    let ptsd_positive = ptsd_positive.unwrap_or(dep_positive);
    if n == 0 {
        return Err(CorpusError::InvalidProfile("custom profile with no records".into()));
    }
    if ptsd_positive > n {
        return Err(CorpusError::InvalidProfile(format!("{ptsd_positive} PTSD positives among {n} records")));
    }
    // Negative depression draws from labels 0..=1, positive from 2..=4; PTSD
    // negatives from 0..=1 of the reference scale, positives are label 2.
    let mut dep: Vec<i64> = Vec::with_capacity(n);
    for i in 0..n {
        dep.push(if i < dep_negative { rng.gen_range(0..=1) } else { rng.gen_range(2..=4) });
    }
    dep.shuffle(rng);
    let mut ptsd: Vec<i64> = Vec::with_capacity(n);
    for i in 0..n {
        ptsd.push(if i < n - ptsd_positive { rng.gen_range(0..=1) } else { 2 });
    }
    ptsd.shuffle(rng);
    Ok(sequential_drafts(dep, ptsd, rng))
}

fn uniform_drafts(n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Draft>, CorpusError> {
    if n == 0 {
        return Err(CorpusError::InvalidProfile("uniform profile with no records".into()));
    }
    let mut dep: Vec<i64> = (0..n).map(|i| (i % 5) as i64).collect();
    let mut ptsd: Vec<i64> = (0..n).map(|i| (i % 3) as i64).collect();
    dep.shuffle(rng);
    ptsd.shuffle(rng);
    Ok(sequential_drafts(dep, ptsd, rng))
}

const QUESTIONS: [&str; 8] = [
    "How are you doing today?",
    "How have you been sleeping lately?",
    "What do you enjoy doing in your free time?",
    "How would you describe your mood over the past few weeks?",
    "Have you ever been diagnosed with PTSD?",
    "Is there anything you regret?",
    "How easy is it for you to get a good night's sleep?",
    "What are you most proud of in your life?",
];

const ANSWERS_LOW: [&str; 6] = [
    "I'm doing pretty well, thanks.",
    "I sleep fine most nights.",
    "I like hiking and cooking with my family.",
    "Things have been good, pretty steady.",
    "I'm proud of my kids, they're doing great.",
    "Not really, I try to look forward.",
];
const ANSWERS_MILD: [&str; 5] = [
    "Some days are harder than others.",
    "I get a little tired in the afternoons.",
    "I've been a bit stressed about work.",
    "Mostly okay, a few rough patches.",
    "I could be sleeping better, honestly.",
];
const ANSWERS_HIGH: [&str; 7] = [
    "I've been feeling down most days.",
    "It's really hard to get out of bed.",
    "I don't really enjoy the things I used to.",
    "I can't fall asleep until three or four in the morning.",
    "I feel like a failure a lot of the time.",
    "I've been pulling away from my friends.",
    "Everything just feels heavy and pointless lately.",
];
const ANSWERS_PTSD: [&str; 5] = [
    "I keep having nightmares about what happened.",
    "Loud noises make me jump, I'm always on edge.",
    "I avoid places that remind me of it.",
    "Yes, I was diagnosed after I came back from deployment.",
    "Sometimes it feels like it's happening all over again.",
];
const ANSWERS_NO_TRAUMA: [&str; 3] = [
    "No, I've never been diagnosed with anything like that.",
    "I feel safe most of the time.",
    "Nothing really traumatic has happened to me.",
];

fn transcript_for(d: &Draft, rng: &mut ChaCha8Rng) -> String {
    let mood: &[&str] = match d.dep_label {
        0 => &ANSWERS_LOW,
        1 => &ANSWERS_MILD,
        _ => &ANSWERS_HIGH,
    };
    let trauma: &[&str] = if d.ptsd_label >= 2 { &ANSWERS_PTSD } else { &ANSWERS_NO_TRAUMA };
    let mut out = String::new();
    for (i, q) in QUESTIONS.iter().enumerate() {
        let pool = if i == 4 || i == 5 { trauma } else { mood };
        let a = pool.choose(rng).expect("non-empty pool");
        out.push_str(q);
        out.push(' ');
        out.push_str(a);
        out.push('\n');
    }
    out
}

fn write_silence(path: &Path) -> Result<(), CorpusError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: 16_000,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let to_io = |e: hound::Error| match e {
        hound::Error::IoError(io) => CorpusError::io(path, io),
        other => CorpusError::io(path, std::io::Error::other(other.to_string())),
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(to_io)?;
    for _ in 0..4_000 {
        w.write_sample(0i16).map_err(to_io)?;
    }
    w.finalize().map_err(to_io)
}

/// Writes `manifest.csv`, `transcripts/` and `audio/` under `out_dir`.
/// Output bytes depend only on `seed` and `profile`.
pub fn generate_synthetic_fixture(
    seed: u64,
    profile: &FixtureProfile,
    out_dir: &Path,
) -> Result<SyntheticFixture, CorpusError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drafts = match profile {
        FixtureProfile::PaperMarginals => reference_drafts(&mut rng),
        FixtureProfile::Uniform { n } => uniform_drafts(*n, &mut rng)?,
        FixtureProfile::Custom { dep_positive, dep_negative, ptsd_positive } => {
            custom_drafts(*dep_positive, *dep_negative, *ptsd_positive, &mut rng)?
        }
    };
    let dep_scale = depression_scale();
    let ptsd_scale = ptsd_reference_scale();
    let transcripts = out_dir.join("transcripts");
    let audio = out_dir.join("audio");
    for d in [&transcripts, &audio] {
        std::fs::create_dir_all(d).map_err(|e| CorpusError::io(d, e))?;
    }
    let mut records = Vec::with_capacity(drafts.len());
    for d in &drafts {
        let dep_bin = dep_scale.bins[d.dep_label as usize];
        let phq_score = score_in(dep_bin.lo, dep_bin.hi, &mut rng);
        let ptsd_bin = ptsd_scale.bins[d.ptsd_label as usize];
        let mut ptsd_severity = score_in(ptsd_bin.lo, ptsd_bin.hi, &mut rng);
        let mut phq_binary = (phq_score >= PHQ_POSITIVE_THRESHOLD) as u8;
        if matches!(profile, FixtureProfile::PaperMarginals) {
            if MISLABELED_PHQ_IDS.contains(&d.id) {
                phq_binary = 0;
            }
            if d.id == PTSD_CLAMPED_ID {
                ptsd_severity = PTSD_CLAMPED_RAW;
            }
        }
        let tpath = transcripts.join(format!("{}_Transcript.txt", d.id));
        std::fs::write(&tpath, transcript_for(d, &mut rng)).map_err(|e| CorpusError::io(&tpath, e))?;
        let apath = audio.join(format!("{}_AUDIO.wav", d.id));
        write_silence(&apath)?;
        records.push(ParticipantRecord {
            participant_id: d.id,
            phq_score,
            phq_binary,
            pclc_binary: (ptsd_severity > PCLC_POSITIVE_ABOVE) as u8,
            ptsd_severity,
            split: d.split,
            transcript_path: Some(tpath),
            audio_path: Some(apath),
        });
    }
    let manifest_path = out_dir.join("manifest.csv");
    write_manifest(&manifest_path, &DatasetManifest { records, ..Default::default() })?;
    let manifest = load_manifest(&manifest_path, ManifestLayout::GenericCsv)?;
    Ok(SyntheticFixture { manifest_path, manifest })
}
