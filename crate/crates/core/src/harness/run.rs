use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::plan::record_key;
use super::{
    build_plan, load_corpus, write_file, write_predictions, Exclusion, ExperimentConfig, HarnessError, LoadedCorpus,
    PlannedRequest, PREDICTIONS_FILE, RECORDS_FILE, RUN_MANIFEST,
};
use crate::parsers::{parse_for_task, ParseOutcome};
use crate::prompts::{render_few_shot_with, render_zero_shot, FewShotExample, RenderedPrompt, TemplateStore};
use crate::providers::{
    Clock, InferenceRequest, MockOracle, MockTransport, ProviderClient, ProviderConfig, ProviderKind, ReqwestTransport,
    ResponseCache, SystemClock, Transport,
};
use crate::task::{Label, Modality, ShotMode, Task, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    /// Every planned request has a successful response.
    Complete,
    /// Every planned request was attempted but some failed.
    Partial,
    /// Stopped before the plan was exhausted.
    Interrupted,
}

/// Metadata stored next to the records of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub code_version: String,
    pub status: RunStatus,
    pub started_at: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<u64>,
    pub record_count: usize,
    pub planned: usize,
    /// Chat role of the single message each prompt is sent as.
    pub message_role: String,
    pub template_hashes: BTreeMap<String, String>,
    /// TOML snapshot of the experiment config.
    pub config: String,
    #[serde(default)]
    pub exclusions: Vec<Exclusion>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub class: String,
    pub detail: String,
}

/// One line of `records.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub participant_id: u32,
    pub task: Task,
    pub variant: Variant,
    pub modality: Modality,
    pub provider: String,
    pub model: String,
    pub shot_mode: ShotMode,
    pub request_hash: String,
    pub content_hash: String,
    pub raw_text: Option<String>,
    pub parse: Option<ParseOutcome>,
    pub truth: Label,
    pub truth_score: Option<i64>,
    pub error: Option<ErrorInfo>,
    pub latency_ms: u64,
    pub retries: u32,
    pub from_cache: bool,
    pub reprompts: u32,
    pub transcript_provenance: Option<String>,
    pub exemplar_ids: Vec<u32>,
}

impl RunRecord {
    pub fn key(&self) -> String {
        record_key(self.task, self.variant, self.modality, &self.provider, self.shot_mode, self.participant_id)
    }

    /// Parsed label, `None` for invalid answers and failed requests.
    pub fn prediction(&self) -> Option<Label> {
        self.parse.as_ref().and_then(ParseOutcome::label)
    }
}

#[derive(Clone, Default)]
pub struct ExecuteOptions {
    pub resume: bool,
    /// Stop after this many new requests (the run is left interrupted).
    pub stop_after: Option<usize>,
    /// Transport overrides by provider name.
    pub transports: HashMap<String, Arc<dyn Transport>>,
    pub clock: Option<Arc<dyn Clock>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub run_dir: PathBuf,
    pub status: RunStatus,
    pub new_records: usize,
    pub total_records: usize,
    pub failed_records: usize,
    pub exclusions: Vec<Exclusion>,
}

fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn read_run_manifest(run_dir: &Path) -> Result<RunManifest, HarnessError> {
    let path = run_dir.join(RUN_MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
    toml::from_str(&text).map_err(|e| HarnessError::CorruptStore { path, reason: e.to_string() })
}

fn write_run_manifest(run_dir: &Path, m: &RunManifest) -> Result<(), HarnessError> {
    let text = toml::to_string(m)
        .map_err(|e| HarnessError::CorruptStore { path: run_dir.join(RUN_MANIFEST), reason: e.to_string() })?;
    atomic_write(&run_dir.join(RUN_MANIFEST), text.as_bytes())
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let tmp = path.with_extension("tmp");
    write_file(&tmp, bytes)?;
    std::fs::rename(&tmp, path).map_err(|e| HarnessError::io(path, e))
}

/// Reads `records.jsonl`. A torn final line (from a crash mid-write) is cut
/// off the file; damage anywhere else is an error.
pub fn load_records(run_dir: &Path) -> Result<Vec<RunRecord>, HarnessError> {
    let path = run_dir.join(RECORDS_FILE);
    let bytes = match std::fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(HarnessError::io(&path, e)),
    };
    let mut out = Vec::new();
    let mut offset = 0usize;
    let mut lines = bytes.split_inclusive(|&b| b == b'\n').peekable();
    while let Some(line) = lines.next() {
        let last = lines.peek().is_none();
        let trimmed = line.strip_suffix(b"\n").unwrap_or(line);
        if trimmed.iter().all(u8::is_ascii_whitespace) {
            offset += line.len();
            continue;
        }
        match serde_json::from_slice::<RunRecord>(trimmed) {
            Ok(r) if line.ends_with(b"\n") => out.push(r),
            _ if last => {
                log::warn!("dropping torn final line of {}", path.display());
                let f = std::fs::OpenOptions::new().write(true).open(&path).map_err(|e| HarnessError::io(&path, e))?;
                f.set_len(offset as u64).map_err(|e| HarnessError::io(&path, e))?;
                break;
            }
            Err(e) => {
                return Err(HarnessError::CorruptStore { path, reason: format!("byte {offset}: {e}") });
            }
            Ok(_) => unreachable!("only the last line can lack a newline"),
        }
        offset += line.len();
    }
    Ok(out)
}

fn write_records(run_dir: &Path, records: &[RunRecord]) -> Result<(), HarnessError> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).expect("records serialize");
        buf.push(b'\n');
    }
    atomic_write(&run_dir.join(RECORDS_FILE), &buf)
}

struct Job {
    req: PlannedRequest,
}

struct Ctx<'a> {
    corpus: &'a LoadedCorpus,
    store: &'a TemplateStore,
    exemplars: &'a BTreeMap<String, Vec<FewShotExample>>,
    clients: &'a HashMap<String, ProviderClient>,
    reprompts: u32,
    allow_subject: bool,
}

impl Ctx<'_> {
    fn render(&self, req: &PlannedRequest) -> Result<(RenderedPrompt, Vec<u32>), String> {
        let r = self
            .corpus
            .manifest
            .get(req.participant_id)
            .ok_or_else(|| format!("participant {} not in manifest", req.participant_id))?;
        let t = self.store.template(req.task, req.variant).map_err(|e| e.to_string())?;
        match req.shot_mode {
            ShotMode::ZeroShot => Ok((render_zero_shot(&t, r, req.modality).map_err(|e| e.to_string())?, Vec::new())),
            ShotMode::FewShot => {
                let ex = self.exemplars.get(&req.exemplar_key()).ok_or("no exemplars selected for this cell")?;
                let p = render_few_shot_with(&t, r, req.modality, ex, self.allow_subject).map_err(|e| e.to_string())?;
                Ok((p, ex.iter().map(|e| e.participant_id).collect()))
            }
        }
    }

    fn run(&self, req: &PlannedRequest) -> RunRecord {
        let client = &self.clients[&req.provider];
        let cfg = client.config();
        let mut rec = RunRecord {
            participant_id: req.participant_id,
            task: req.task,
            variant: req.variant,
            modality: req.modality,
            provider: req.provider.clone(),
            model: cfg.model_name.clone(),
            shot_mode: req.shot_mode,
            request_hash: String::new(),
            content_hash: String::new(),
            raw_text: None,
            parse: None,
            truth: req.truth,
            truth_score: req.truth_score,
            error: None,
            latency_ms: 0,
            retries: 0,
            from_cache: false,
            reprompts: 0,
            transcript_provenance: if req.modality.needs_transcript() {
                self.corpus.provenance.get(&req.participant_id).cloned()
            } else {
                None
            },
            exemplar_ids: Vec::new(),
        };
        let (prompt, exemplar_ids) = match self.render(req) {
            Ok(p) => p,
            Err(detail) => {
                rec.error = Some(ErrorInfo { class: "prompt_error".into(), detail });
                return rec;
            }
        };
        rec.exemplar_ids = exemplar_ids;
        rec.content_hash = prompt.identity.content_hash.clone();
        let oracle = (cfg.kind == ProviderKind::Mock).then_some(MockOracle {
            task: req.task,
            truth: req.truth,
            modality: req.modality,
        });
        for salt in 0..=self.reprompts {
            let ir = match InferenceRequest::with_salt(prompt.clone(), cfg, oracle, salt) {
                Ok(r) => r,
                Err(e) => {
                    rec.error = Some(ErrorInfo { class: "attachment_error".into(), detail: e.to_string() });
                    return rec;
                }
            };
            if salt == 0 {
                rec.request_hash = ir.idempotency_key.clone();
            }
            rec.reprompts = salt;
            match client.infer(&ir) {
                Ok(resp) => {
                    let parsed = parse_for_task(req.task, &resp.raw_text);
                    rec.latency_ms += resp.latency_ms;
                    rec.retries += resp.retries_used;
                    rec.from_cache = resp.from_cache;
                    rec.raw_text = Some(resp.raw_text);
                    let valid = parsed.is_valid();
                    rec.parse = Some(parsed);
                    rec.error = None;
                    if valid {
                        break;
                    }
                }
                Err(e) => {
                    rec.error = Some(ErrorInfo { class: e.class().into(), detail: e.to_string() });
                    rec.parse = None;
                    rec.raw_text = None;
                    break;
                }
            }
        }
        rec
    }
}

fn default_transport(p: &ProviderConfig) -> Result<Arc<dyn Transport>, HarnessError> {
    Ok(match p.kind {
        ProviderKind::Mock => Arc::new(MockTransport::new(p.mock.clone().unwrap_or_default())),
        _ => Arc::new(ReqwestTransport::new().map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?),
    })
}

/// Runs (or resumes) the grid of `cfg` into `cfg.output_dir`.
pub fn execute(cfg: &ExperimentConfig, opts: &ExecuteOptions) -> Result<RunOutcome, HarnessError> {
    cfg.validate()?;
    let run_dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&run_dir).map_err(|e| HarnessError::io(&run_dir, e))?;
    let store = cfg.template_store()?;
    let hashes = store.hashes();
    let snapshot = cfg.snapshot()?;
    let manifest_path = run_dir.join(RUN_MANIFEST);

    let previous = if manifest_path.exists() {
        if !opts.resume {
            return Err(HarnessError::RunExists(run_dir));
        }
        let prev = read_run_manifest(&run_dir)?;
        if prev.config != snapshot {
            return Err(HarnessError::ConfigMismatch(first_difference(&prev.config, &snapshot)));
        }
        for (name, expected) in &prev.template_hashes {
            let found = hashes.get(name).cloned().unwrap_or_default();
            if &found != expected {
                return Err(HarnessError::TemplateHashMismatch {
                    name: name.clone(),
                    expected: expected.clone(),
                    found,
                });
            }
        }
        Some(prev)
    } else {
        None
    };

    let corpus = load_corpus(cfg)?;
    let plan = build_plan(cfg, &corpus)?;

    // Failed records are retried on resume.
    let mut records: Vec<RunRecord> = if previous.is_some() { load_records(&run_dir)? } else { Vec::new() };
    records.retain(|r| r.error.is_none());
    let done: HashSet<String> = records.iter().map(RunRecord::key).collect();
    let mut pending: Vec<PlannedRequest> = plan.requests.iter().filter(|r| !done.contains(&r.key())).cloned().collect();
    let interrupted = matches!(opts.stop_after, Some(k) if k < pending.len());
    if let Some(k) = opts.stop_after {
        pending.truncate(k);
    }
    write_records(&run_dir, &records)?;

    let mut manifest = RunManifest {
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        status: RunStatus::Running,
        started_at: previous.as_ref().map(|p| p.started_at).unwrap_or_else(now_secs),
        finished_at: None,
        record_count: records.len(),
        planned: plan.requests.len(),
        message_role: "user".to_string(),
        template_hashes: hashes,
        config: snapshot,
        exclusions: plan.exclusions.clone(),
    };
    write_run_manifest(&run_dir, &manifest)?;

    let clock: Arc<dyn Clock> = opts.clock.clone().unwrap_or_else(|| Arc::new(SystemClock::new()));
    let cache_root = cfg.cache_dir.clone().unwrap_or_else(|| run_dir.join("cache"));
    let mut clients = HashMap::new();
    for p in cfg.selected_providers()? {
        let transport = match opts.transports.get(&p.name) {
            Some(t) => t.clone(),
            None => default_transport(&p)?,
        };
        clients.insert(
            p.name.clone(),
            ProviderClient::new(p.clone(), transport, Some(ResponseCache::new(&cache_root)), clock.clone()),
        );
    }
    let workers = cfg
        .workers
        .unwrap_or_else(|| clients.values().map(|c| c.config().max_concurrent).sum::<usize>().max(1))
        .clamp(1, pending.len().max(1));
    let ctx = Ctx {
        corpus: &corpus,
        store: &store,
        exemplars: &plan.exemplars,
        clients: &clients,
        reprompts: cfg.reprompt_invalid,
        allow_subject: cfg.shot.include_exemplar_subjects,
    };
    let jobs: Vec<Job> = pending.into_iter().map(|req| Job { req }).collect();
    let next = AtomicUsize::new(0);
    let records_path = run_dir.join(RECORDS_FILE);
    let new_records = std::thread::scope(|s| -> Result<Vec<RunRecord>, HarnessError> {
        let (tx, rx) = mpsc::channel::<RunRecord>();
        for _ in 0..workers {
            let tx = tx.clone();
            let (ctx, jobs, next) = (&ctx, &jobs, &next);
            s.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs.get(i) else { break };
                if tx.send(ctx.run(&job.req)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let file = std::fs::OpenOptions::new()
            .append(true)
            .create(true)
            .open(&records_path)
            .map_err(|e| HarnessError::io(&records_path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let mut got = Vec::with_capacity(jobs.len());
        for rec in rx {
            serde_json::to_writer(&mut w, &rec).expect("records serialize");
            w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| HarnessError::io(&records_path, e))?;
            got.push(rec);
        }
        Ok(got)
    })?;

    let new_count = new_records.len();
    records.extend(new_records);
    records.sort_by_key(RunRecord::key);
    write_records(&run_dir, &records)?;
    write_predictions(&run_dir.join(PREDICTIONS_FILE), &records, cfg)?;

    let failed = records.iter().filter(|r| r.error.is_some()).count();
    manifest.status = if interrupted {
        RunStatus::Interrupted
    } else if failed > 0 {
        RunStatus::Partial
    } else {
        RunStatus::Complete
    };
    manifest.finished_at = Some(now_secs());
    manifest.record_count = records.len();
    write_run_manifest(&run_dir, &manifest)?;
    log::info!("{}: {:?}, {} new records, {} failed", run_dir.display(), manifest.status, new_count, failed);
    Ok(RunOutcome {
        run_dir,
        status: manifest.status,
        new_records: new_count,
        total_records: records.len(),
        failed_records: failed,
        exclusions: plan.exclusions,
    })
}

fn first_difference(a: &str, b: &str) -> String {
    let mut la = a.lines();
    let mut lb = b.lines();
    loop {
        match (la.next(), lb.next()) {
            (Some(x), Some(y)) if x == y => continue,
            (None, None) => return "configs differ".into(),
            (x, y) => return format!("`{}` vs `{}`", x.unwrap_or(""), y.unwrap_or("")),
        }
    }
}

/// Reads the config a run was started with.
pub(crate) fn run_config(run_dir: &Path) -> Result<ExperimentConfig, HarnessError> {
    ExperimentConfig::parse(&read_run_manifest(run_dir)?.config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: u32) -> RunRecord {
        RunRecord {
            participant_id: id,
            task: Task::DepBinary,
            variant: Variant::P1,
            modality: Modality::Text,
            provider: "m".into(),
            model: "m".into(),
            shot_mode: ShotMode::ZeroShot,
            request_hash: "h".into(),
            content_hash: "c".into(),
            raw_text: Some("Yes".into()),
            parse: Some(parse_for_task(Task::DepBinary, "Yes")),
            truth: Label::Binary(true),
            truth_score: None,
            error: None,
            latency_ms: 0,
            retries: 0,
            from_cache: false,
            reprompts: 0,
            transcript_provenance: None,
            exemplar_ids: vec![],
        }
    }

    #[test]
    fn torn_tail_is_truncated() {
        let dir = tempfile::tempdir().unwrap();
        write_records(dir.path(), &[rec(1), rec(2)]).unwrap();
        let path = dir.path().join(RECORDS_FILE);
        let mut bytes = std::fs::read(&path).unwrap();
        let good = bytes.len();
        bytes.extend_from_slice(br#"{"participant_id":3,"task":"dep_bin"#);
        std::fs::write(&path, &bytes).unwrap();
        let got = load_records(dir.path()).unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(std::fs::metadata(&path).unwrap().len() as usize, good);
    }

    #[test]
    fn damage_mid_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        write_records(dir.path(), &[rec(1), rec(2)]).unwrap();
        let path = dir.path().join(RECORDS_FILE);
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, format!("garbage\n{text}")).unwrap();
        assert!(matches!(load_records(dir.path()), Err(HarnessError::CorruptStore { .. })));
    }
}
