//! Experiment orchestration: plan a grid, execute it resumably, score the
//! stored records and render comparison reports.

use std::path::{Path, PathBuf};

mod config;
mod plan;
mod report;
mod run;
mod score;

pub use config::{ExperimentConfig, ShotConfig};
pub use plan::{build_plan, load_corpus, Exclusion, LoadedCorpus, Plan, PlannedRequest};
pub use report::{report, ReportFormat};
pub use run::{
    execute, load_records, read_run_manifest, ErrorInfo, ExecuteOptions, RunManifest, RunOutcome, RunRecord, RunStatus,
};
pub use score::{
    correctness_vector, prediction_rows, read_predictions, score, score_rows, write_predictions, CellKey, CellScore,
    PerDisorder, PredictionRow, ScoreSummary,
};

pub const RUN_MANIFEST: &str = "run.manifest";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const PREDICTIONS_FILE: &str = "predictions.csv";

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error(transparent)]
    Prompt(#[from] crate::prompts::PromptError),
    #[error(transparent)]
    Provider(#[from] crate::providers::ConfigError),
    #[error("run directory {0} already holds a run; pass resume to continue it")]
    RunExists(PathBuf),
    #[error("config differs from the one the run was started with: {0}")]
    ConfigMismatch(String),
    #[error("template `{name}` changed since the run started ({expected} -> {found})")]
    TemplateHashMismatch { name: String, expected: String, found: String },
    #[error("no records in {0}")]
    NoRecords(PathBuf),
    #[error("{path}: {reason}")]
    CorruptStore { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error(transparent)]
    Modality(#[from] crate::modality::ModalityError),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.to_path_buf(), source }
    }
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}
