use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::run::run_config;
use super::{read_predictions, score_rows, write_file, CellKey, CellScore, HarnessError, PREDICTIONS_FILE};
use crate::task::{Modality, ShotMode, Task, TaskKind, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

/// One report line: a cell with its few-shot deltas and best-in-block flag.
#[derive(Debug, Clone, Serialize)]
struct Entry {
    task: Task,
    scale: String,
    shot_mode: ShotMode,
    modality: Modality,
    provider: String,
    model: String,
    variant: Variant,
    balanced_accuracy: Option<f64>,
    f1: f64,
    mae: Option<f64>,
    invalid_rate: f64,
    n: u64,
    delta_balanced_accuracy: Option<f64>,
    delta_f1: Option<f64>,
    delta_mae: Option<f64>,
    best: bool,
}

fn load_cells(run_dirs: &[PathBuf]) -> Result<Vec<CellScore>, HarnessError> {
    let mut seen = BTreeMap::new();
    for dir in run_dirs {
        let cfg = run_config(dir)?;
        let rows = read_predictions(&dir.join(PREDICTIONS_FILE))?;
        for c in score_rows(&rows, cfg.scoring_mode)? {
            if seen.insert(c.key.clone(), c).is_some() {
                log::warn!("cell seen in more than one run; keeping the later one ({})", dir.display());
            }
        }
    }
    Ok(seen.into_values().collect())
}

fn entries(cells: &[CellScore]) -> Vec<Entry> {
    let by_key: BTreeMap<&CellKey, &CellScore> = cells.iter().map(|c| (&c.key, c)).collect();
    let mut out: Vec<Entry> = cells
        .iter()
        .map(|c| {
            let k = &c.key;
            let zs = (k.shot_mode == ShotMode::FewShot)
                .then(|| by_key.get(&CellKey { shot_mode: ShotMode::ZeroShot, ..k.clone() }))
                .flatten();
            let r = &c.report;
            Entry {
                task: k.task,
                scale: k.scale.clone(),
                shot_mode: k.shot_mode,
                modality: k.modality,
                provider: k.provider.clone(),
                model: k.model.clone(),
                variant: k.variant,
                balanced_accuracy: r.balanced_accuracy,
                f1: r.f1,
                mae: r.mae,
                invalid_rate: r.invalid_rate,
                n: r.n,
                delta_balanced_accuracy: zs.and_then(|z| Some(r.balanced_accuracy? - z.report.balanced_accuracy?)),
                delta_f1: zs.map(|z| r.f1 - z.report.f1),
                delta_mae: zs.and_then(|z| Some(r.mae? - z.report.mae?)),
                best: false,
            }
        })
        .collect();
    // Best per (task, scale, shot, modality, variant): max BA, then F1, then smaller model name.
    let mut best: BTreeMap<(Task, String, ShotMode, Modality, Variant), usize> = BTreeMap::new();
    for (i, e) in out.iter().enumerate() {
        let slot = best.entry((e.task, e.scale.clone(), e.shot_mode, e.modality, e.variant)).or_insert(i);
        if beats(e, &out[*slot]) {
            *slot = i;
        }
    }
    for i in best.into_values() {
        out[i].best = true;
    }
    out
}

fn beats(a: &Entry, b: &Entry) -> bool {
    let ba = |e: &Entry| e.balanced_accuracy.unwrap_or(f64::NEG_INFINITY);
    match ba(a).total_cmp(&ba(b)).then(a.f1.total_cmp(&b.f1)) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => a.model < b.model,
    }
}

fn num(v: Option<f64>, delta: Option<f64>, bold: bool) -> String {
    let mut s = match v {
        Some(v) => format!("{v:.3}"),
        None => "n/a".to_string(),
    };
    if let Some(d) = delta {
        s.push_str(&format!(" ({d:+.3})"));
    }
    if bold && v.is_some() {
        s = format!("**{s}**");
    }
    s
}

fn markdown(entries: &[Entry]) -> String {
    let mut tables: BTreeMap<(Task, String, ShotMode), Vec<&Entry>> = BTreeMap::new();
    for e in entries {
        tables.entry((e.task, e.scale.clone(), e.shot_mode)).or_default().push(e);
    }
    let mut out = String::from("# Evaluation report\n");
    for ((task, scale, shot), es) in tables {
        let variants: BTreeSet<Variant> = es.iter().map(|e| e.variant).collect();
        let severity = task.kind() == TaskKind::Severity;
        out.push_str(&format!("\n## {task} ({shot}"));
        if !scale.is_empty() {
            out.push_str(&format!(", scale {scale}"));
        }
        out.push_str(")\n\n| Modality | Model |");
        let mut rule = String::from("|---|---|");
        for v in &variants {
            out.push_str(&format!(" {v} BA | {v} F1 |"));
            rule.push_str("---:|---:|");
            if severity {
                out.push_str(&format!(" {v} MAE |"));
                rule.push_str("---:|");
            }
        }
        out.push('\n');
        out.push_str(&rule);
        out.push('\n');
        let mut rows: BTreeMap<(Modality, String, String), BTreeMap<Variant, &Entry>> = BTreeMap::new();
        for e in es {
            rows.entry((e.modality, e.model.clone(), e.provider.clone())).or_default().insert(e.variant, e);
        }
        for ((modality, model, _), cells) in rows {
            out.push_str(&format!("| {modality} | {model} |"));
            for v in &variants {
                match cells.get(v) {
                    Some(e) => {
                        out.push_str(&format!(
                            " {} | {} |",
                            num(e.balanced_accuracy, e.delta_balanced_accuracy, e.best),
                            num(Some(e.f1), e.delta_f1, e.best)
                        ));
                        if severity {
                            out.push_str(&format!(" {} |", num(e.mae, e.delta_mae, e.best)));
                        }
                    }
                    None => out.push_str(if severity { " | | |" } else { " | |" }),
                }
            }
            out.push('\n');
        }
    }
    out
}

fn csv_text(entries: &[Entry]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for e in entries {
        w.serialize(e)?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::io(Path::new("report.csv"), e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

/// Renders comparison tables over the scored cells of `run_dirs` into
/// `out_dir/report.{md,csv,json}`. Few-shot cells show their change against
/// the matching zero-shot cell when one of the runs holds it.
pub fn report(run_dirs: &[PathBuf], out_dir: &Path, formats: &[ReportFormat]) -> Result<Vec<PathBuf>, HarnessError> {
    if formats.is_empty() {
        log::warn!("no report formats requested; nothing written");
        return Ok(Vec::new());
    }
    let cells = load_cells(run_dirs)?;
    if cells.is_empty() {
        return Err(HarnessError::NoRecords(run_dirs.first().cloned().unwrap_or_default()));
    }
    let entries = entries(&cells);
    let mut written = Vec::new();
    for f in formats.iter().collect::<BTreeSet<_>>() {
        let (name, body) = match f {
            ReportFormat::Markdown => ("report.md", markdown(&entries)),
            ReportFormat::Csv => ("report.csv", csv_text(&entries)?),
            ReportFormat::Json => {
                ("report.json", serde_json::to_string_pretty(&entries).expect("entries serialize") + "\n")
            }
        };
        let path = out_dir.join(name);
        write_file(&path, body)?;
        written.push(path);
    }
    Ok(written)
}
