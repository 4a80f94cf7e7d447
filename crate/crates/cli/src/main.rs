use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use modalscreen::corpus::{
    apply_label_corrections, builtin_scale, generate_synthetic_fixture, load_manifest, summarize_distribution,
    write_manifest, FixtureProfile, ManifestLayout,
};
use modalscreen::harness::{
    correctness_vector, execute, read_predictions, report, score, score_rows, ExecuteOptions, ExperimentConfig,
    PredictionRow, ReportFormat, RunStatus, PREDICTIONS_FILE,
};
use modalscreen::metrics::{MetricReport, ScoringMode};
use modalscreen::modality::compare;
use modalscreen::parsers::{parse_for_task, parse_severity, ParseOutcome};
use modalscreen::prompts::{
    render_few_shot_with, render_zero_shot, select_few_shot_binary_with, ExampleOrder, ExemplarPool, FewShotExample,
    TemplateStore,
};
use modalscreen::task::{Modality, ShotMode, Task, TaskKind, Variant};
use serde_json::json;

#[derive(Parser)]
#[command(name = "modalscreen", version, about = "Evaluate LLM screening prompts over interview transcripts and audio")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a label manifest, apply corrections and print label distributions.
    Ingest(IngestArgs),
    /// Write a deterministic synthetic corpus.
    SynthFixtures(SynthArgs),
    /// Render one prompt.
    RenderPrompts(RenderArgs),
    /// Parse a raw model response read from stdin.
    Parse(ParseArgs),
    /// Score a predictions CSV.
    Metrics(MetricsArgs),
    /// Execute an experiment config.
    Run(RunArgs),
    /// Score a run directory.
    Score { run_dir: PathBuf },
    /// Render comparison tables for one or more runs.
    Report(ReportArgs),
    /// Compare per-sample correctness of two modalities (and optionally the combined one).
    CompareModalities(CompareArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "generic_csv")]
    layout: ManifestLayout,
    /// Leave labels as recorded.
    #[arg(long)]
    no_corrections: bool,
    /// PTSD scale for the distribution summary.
    #[arg(long, default_value = "ptsd_reference")]
    ptsd_scale: String,
    /// Write the (corrected) manifest here in the generic layout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `paper`, `uniform[:N]` or `custom:pos=P,neg=N[,ptsd_pos=Q]`.
    #[arg(long, default_value = "paper")]
    profile: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "generic_csv")]
    layout: ManifestLayout,
    #[arg(long)]
    task: Task,
    #[arg(long)]
    variant: Variant,
    #[arg(long, default_value = "text")]
    modality: Modality,
    #[arg(long)]
    id: u32,
    /// `auto[:seed]` picks binary exemplars from the non-test records; a comma
    /// separated id list uses those participants with their true labels.
    #[arg(long)]
    few_shot: Option<String>,
    #[arg(long)]
    templates_dir: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ParseArgs {
    #[arg(long)]
    task: Task,
    /// Allowed severity range as `lo,hi`.
    #[arg(long)]
    range: Option<String>,
}

#[derive(Args)]
struct MetricsArgs {
    predictions: PathBuf,
    #[arg(long, default_value = "count_invalid_as_wrong")]
    scoring_mode: String,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    resume: bool,
    /// Re-prompt invalid answers up to N times.
    #[arg(long)]
    reprompt_invalid: Option<u32>,
    /// Stop after N new requests.
    #[arg(long)]
    stop_after: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(required = true)]
    run_dirs: Vec<PathBuf>,
    /// Comma separated: md, csv, json.
    #[arg(long, default_value = "md,csv", value_delimiter = ',')]
    formats: Vec<String>,
    /// Output directory; defaults to `<first run>/reports`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    run_a: PathBuf,
    #[arg(long)]
    run_b: PathBuf,
    #[arg(long)]
    run_combined: Option<PathBuf>,
    #[arg(long, default_value = "text")]
    modality_a: Modality,
    #[arg(long, default_value = "audio")]
    modality_b: Modality,
    #[arg(long, default_value = "audio_text")]
    modality_combined: Modality,
    #[arg(long)]
    task: Option<Task>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    provider: Option<String>,
    #[arg(long)]
    shot_mode: Option<ShotMode>,
    #[arg(long)]
    scale: Option<String>,
    /// Write the co-occurrence table here instead of after the JSON.
    #[arg(long)]
    co_occurrence_out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Ingest(a) => ingest(a),
        Command::SynthFixtures(a) => synth(a),
        Command::RenderPrompts(a) => render(a),
        Command::Parse(a) => parse(a),
        Command::Metrics(a) => metrics(a),
        Command::Run(a) => run(a),
        Command::Score { run_dir } => {
            let s = score(&run_dir)?;
            for f in &s.files {
                println!("{}", f.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Report(a) => report_cmd(a),
        Command::CompareModalities(a) => compare_cmd(a),
    }
}

fn ingest(a: IngestArgs) -> Result<ExitCode> {
    let raw = load_manifest(&a.manifest, a.layout)?;
    let m = if a.no_corrections { raw } else { apply_label_corrections(raw) };
    let dist = match summarize_distribution(&m, builtin_scale(&a.ptsd_scale)?) {
        Ok(d) => serde_json::to_value(d)?,
        Err(e) => {
            log::warn!("no distribution summary: {e}");
            json!({ "error": e.to_string() })
        }
    };
    let out = json!({ "distribution": dist, "corrections": m.correction_log });
    println!("{}", serde_json::to_string_pretty(&out)?);
    if let Some(path) = a.out {
        write_manifest(&path, &m)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn synth(a: SynthArgs) -> Result<ExitCode> {
    let profile: FixtureProfile = a.profile.parse()?;
    let f = generate_synthetic_fixture(a.seed, &profile, &a.out)?;
    println!("{} ({} records)", f.manifest_path.display(), f.manifest.len());
    Ok(ExitCode::SUCCESS)
}

fn render(a: RenderArgs) -> Result<ExitCode> {
    let m = apply_label_corrections(load_manifest(&a.manifest, a.layout)?);
    let store = match &a.templates_dir {
        Some(d) => TemplateStore::from_dir(d)?,
        None => TemplateStore::builtin(),
    };
    let t = store.template(a.task, a.variant)?;
    let subject = m.get(a.id).with_context(|| format!("participant {} not in manifest", a.id))?;
    let prompt = match a.few_shot.as_deref() {
        None => render_zero_shot(&t, subject, a.modality)?,
        Some(spec) => {
            let ex = few_shot_examples(spec, &m, a.task)?;
            render_few_shot_with(&t, subject, a.modality, &ex, true)?
        }
    };
    let mut text = prompt.text.clone();
    text.push('\n');
    match a.out {
        Some(path) => std::fs::write(&path, text).with_context(|| path.display().to_string())?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    for att in &prompt.attachments {
        log::info!("attachment: {}", att.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn few_shot_examples(spec: &str, m: &modalscreen::corpus::DatasetManifest, task: Task) -> Result<Vec<FewShotExample>> {
    if let Some(rest) = spec.strip_prefix("auto") {
        let seed = match rest.strip_prefix(':') {
            Some(s) => s.parse().context("few-shot seed")?,
            None if rest.is_empty() => 0,
            None => bail!("bad few-shot spec `{spec}`"),
        };
        return Ok(select_few_shot_binary_with(m, task, ExemplarPool::NonTest, seed, ExampleOrder::NegativeFirst)?);
    }
    let ptsd = builtin_scale("ptsd_reference")?;
    spec.split(',')
        .map(|id| {
            let id: u32 = id.trim().parse().with_context(|| format!("bad participant id `{id}`"))?;
            let r = m.get(id).with_context(|| format!("participant {id} not in manifest"))?;
            let path = r.transcript_path.as_deref().with_context(|| format!("participant {id} has no transcript"))?;
            Ok(FewShotExample {
                participant_id: id,
                content: modalscreen::corpus::read_transcript(path)?,
                label_text: r.truth(task, ptsd)?.answer_text(),
            })
        })
        .collect()
}

fn parse(a: ParseArgs) -> Result<ExitCode> {
    let mut raw = String::new();
    std::io::stdin().read_to_string(&mut raw)?;
    let outcome = match (&a.range, a.task.kind()) {
        (Some(r), TaskKind::Severity) => {
            let (lo, hi) = r.split_once(',').context("--range takes lo,hi")?;
            parse_severity(&raw, (lo.trim().parse()?, hi.trim().parse()?))
        }
        (Some(_), _) => bail!("--range only applies to severity tasks"),
        (None, _) => parse_for_task(a.task, &raw),
    };
    let line = match &outcome {
        ParseOutcome::Valid { label, span } => json!({
            "task": a.task,
            "status": "valid",
            "label": label.answer_text(),
            "span": [span.0, span.1],
        }),
        ParseOutcome::Invalid { .. } => json!({
            "task": a.task,
            "status": "invalid",
            "reason": outcome.status_str(),
        }),
    };
    println!("{line}");
    Ok(ExitCode::SUCCESS)
}

fn scoring_mode(s: &str) -> Result<ScoringMode> {
    Ok(match s {
        "count_invalid_as_wrong" | "count" => ScoringMode::CountInvalidAsWrong,
        "exclude_invalid" | "exclude" => ScoringMode::ExcludeInvalid,
        other => bail!("unknown scoring mode `{other}`"),
    })
}

/// Reads a predictions CSV; only participant_id, task, truth, pred and parse_status are required.
fn read_loose_predictions(path: &Path) -> Result<Vec<PredictionRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| path.display().to_string())?;
    let headers = r.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let need = |name: &str| col(name).with_context(|| format!("missing column `{name}`"));
    let (id, task, truth, pred, status) =
        (need("participant_id")?, need("task")?, need("truth")?, need("pred")?, need("parse_status")?);
    let opt = |row: &csv::StringRecord, name: &str, default: &str| -> String {
        col(name).and_then(|i| row.get(i)).filter(|v| !v.is_empty()).unwrap_or(default).to_string()
    };
    let mut rows = Vec::new();
    for row in r.records() {
        let row = row?;
        let task: Task = row[task].parse().map_err(anyhow::Error::msg)?;
        rows.push(PredictionRow {
            participant_id: row[id].trim().parse()?,
            task,
            truth: row[truth].to_string(),
            pred: row[pred].to_string(),
            parse_status: row[status].to_string(),
            provider: opt(&row, "provider", "-"),
            model: opt(&row, "model", "-"),
            variant: opt(&row, "variant", "P1").parse().map_err(anyhow::Error::msg)?,
            modality: opt(&row, "modality", "text").parse().map_err(anyhow::Error::msg)?,
            shot_mode: opt(&row, "shot_mode", "zero_shot").parse().map_err(anyhow::Error::msg)?,
            scale: opt(&row, "scale", ""),
        });
    }
    Ok(rows)
}

fn metrics(a: MetricsArgs) -> Result<ExitCode> {
    let rows = read_loose_predictions(&a.predictions)?;
    let cells = score_rows(&rows, scoring_mode(&a.scoring_mode)?)?;
    if cells.is_empty() {
        bail!("{} has no predictions", a.predictions.display());
    }
    println!("{}", serde_json::to_string_pretty(&cells)?);
    println!("task,scale,provider,variant,modality,shot_mode,{}", MetricReport::CSV_HEADER);
    for c in &cells {
        let k = &c.key;
        println!(
            "{},{},{},{},{},{},{}",
            k.task,
            k.scale,
            k.provider,
            k.variant,
            k.modality,
            k.shot_mode,
            c.report.csv_fields()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn run(a: RunArgs) -> Result<ExitCode> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(n) = a.reprompt_invalid {
        cfg.reprompt_invalid = n;
    }
    let out = execute(&cfg, &ExecuteOptions { resume: a.resume, stop_after: a.stop_after, ..Default::default() })?;
    println!(
        "{}: {:?}, {} new records, {} total, {} failed, {} excluded",
        out.run_dir.display(),
        out.status,
        out.new_records,
        out.total_records,
        out.failed_records,
        out.exclusions.len()
    );
    Ok(match out.status {
        RunStatus::Partial => ExitCode::from(2),
        _ => ExitCode::SUCCESS,
    })
}

fn report_cmd(a: ReportArgs) -> Result<ExitCode> {
    let formats = a
        .formats
        .iter()
        .filter(|f| !f.trim().is_empty())
        .map(|f| f.parse::<ReportFormat>().map_err(anyhow::Error::msg))
        .collect::<Result<Vec<_>>>()?;
    let out = a.out.unwrap_or_else(|| a.run_dirs[0].join("reports"));
    for f in report(&a.run_dirs, &out, &formats)? {
        println!("{}", f.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn compare_cmd(a: CompareArgs) -> Result<ExitCode> {
    let load = |dir: &Path| read_predictions(&dir.join(PREDICTIONS_FILE));
    let keep = |m: Modality| {
        let a = &a;
        move |r: &PredictionRow| {
            r.modality == m
                && a.task.is_none_or(|t| r.task == t)
                && a.variant.is_none_or(|v| r.variant == v)
                && a.provider.as_ref().is_none_or(|p| &r.provider == p)
                && a.shot_mode.is_none_or(|s| r.shot_mode == s)
                && a.scale.as_ref().is_none_or(|s| &r.scale == s)
        }
    };
    let va =
        correctness_vector(&load(&a.run_a)?, &format!("{}:{}", a.run_a.display(), a.modality_a), keep(a.modality_a))?;
    let vb =
        correctness_vector(&load(&a.run_b)?, &format!("{}:{}", a.run_b.display(), a.modality_b), keep(a.modality_b))?;
    let vc = match &a.run_combined {
        Some(dir) => Some(correctness_vector(
            &load(dir)?,
            &format!("{}:{}", dir.display(), a.modality_combined),
            keep(a.modality_combined),
        )?),
        None => None,
    };
    let cmp = compare(&va, &vb, vc.as_ref())?;
    let summary = json!({
        "partition": cmp.partition,
        "mss_a_vs_b": cmp.mss_a_vs_b,
        "resolution": cmp.resolution,
        "drs": cmp.drs,
        "mss_combined_vs_a": cmp.mss_combined_vs_a,
        "mss_combined_vs_b": cmp.mss_combined_vs_b,
        "mss_combined_vs_agreement": cmp.mss_combined_vs_agreement,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    let csv = cmp.co_occurrence.to_csv();
    match a.co_occurrence_out {
        Some(path) => std::fs::write(&path, csv).with_context(|| path.display().to_string())?,
        None => print!("{csv}"),
    }
    Ok(ExitCode::SUCCESS)
}
