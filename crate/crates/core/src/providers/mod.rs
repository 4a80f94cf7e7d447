//! Inference over remote chat-completion APIs and an offline mock, with
//! response caching, retry, rate limiting and a transcription adapter.

mod cache;
mod client;
mod clock;
mod gate;
mod mock;
mod transcribe;
mod transport;
mod wire;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::prompts::RenderedPrompt;
use crate::task::{Label, Modality, Task};

pub use cache::{CachedResponse, ResponseCache};
pub use client::{InferenceError, ProviderClient, RetryPolicy};
pub use clock::{Clock, SimClock, SystemClock};
pub use gate::{AdmissionGate, Permit};
pub use mock::{mock_answer, mock_infer, AccuracyByModality, MockBehavior, MockTransport, Verbosity};
pub use transcribe::{Transcriber, TranscriptionAdapter, TranscriptionError};
pub use transport::{CountingTransport, HttpRequest, HttpResponse, ReqwestTransport, Transport, TransportError};
pub use wire::{build_http_request, decode_completion};

/// Header carrying ground truth to the mock server. Never sent to real providers.
pub const MOCK_ORACLE_HEADER: &str = "x-mock-oracle";
pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("provider config: {0}")]
    Parse(String),
    #[error("provider `{name}`: {reason}")]
    Invalid { name: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    OpenaiCompatible,
    GeminiCompatible,
    Mock,
}

fn default_max_concurrent() -> usize {
    4
}
fn default_rpm() -> u32 {
    60
}
fn default_timeout() -> f64 {
    60.0
}
fn default_retry_base_ms() -> u64 {
    1000
}
fn default_max_attempts() -> u32 {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub name: String,
    pub kind: ProviderKind,
    #[serde(default)]
    pub base_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the API key.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub supports_audio: bool,
    #[serde(default = "default_max_concurrent")]
    pub max_concurrent: usize,
    #[serde(default = "default_rpm")]
    pub requests_per_minute: u32,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_timeout")]
    pub request_timeout_s: f64,
    #[serde(default = "default_retry_base_ms")]
    pub retry_base_ms: u64,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock: Option<MockBehavior>,
}

impl ProviderConfig {
    /// A mock provider with sensible limits.
    pub fn mock(name: &str, behavior: MockBehavior) -> Self {
        ProviderConfig {
            name: name.to_string(),
            kind: ProviderKind::Mock,
            base_url: String::new(),
            model_name: format!("{name}-model"),
            api_key_env: None,
            supports_audio: true,
            max_concurrent: 8,
            requests_per_minute: 1_000_000,
            temperature: 0.0,
            request_timeout_s: 30.0,
            retry_base_ms: default_retry_base_ms(),
            max_attempts: default_max_attempts(),
            mock: Some(behavior),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |reason: &str| Err(ConfigError::Invalid { name: self.name.clone(), reason: reason.to_string() });
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            return bad("name must be a non-empty identifier");
        }
        if self.model_name.is_empty() {
            return bad("model_name is empty");
        }
        if self.max_concurrent == 0 {
            return bad("max_concurrent must be positive");
        }
        if self.requests_per_minute == 0 {
            return bad("requests_per_minute must be positive");
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return bad("temperature must be a finite number >= 0");
        }
        if !(self.request_timeout_s.is_finite() && self.request_timeout_s > 0.0) {
            return bad("request_timeout_s must be positive");
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be positive");
        }
        if self.kind != ProviderKind::Mock && self.base_url.is_empty() {
            return bad("base_url is required for remote providers");
        }
        if let Some(m) = &self.mock {
            m.validate().map_err(|r| ConfigError::Invalid { name: self.name.clone(), reason: r })?;
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct ProviderFile {
    #[serde(default)]
    provider: Vec<ProviderConfig>,
}

/// Parses a document of `[[provider]]` blocks.
pub fn parse_providers(text: &str) -> Result<Vec<ProviderConfig>, ConfigError> {
    let file: ProviderFile = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let mut seen = std::collections::BTreeSet::new();
    for p in &file.provider {
        p.validate()?;
        if !seen.insert(p.name.clone()) {
            return Err(ConfigError::Invalid { name: p.name.clone(), reason: "defined twice".into() });
        }
    }
    Ok(file.provider)
}

pub fn load_providers(path: &Path) -> Result<Vec<ProviderConfig>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.to_path_buf(), source: e })?;
    parse_providers(&text)
}

/// Ground truth handed to the mock server alongside a request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockOracle {
    pub task: Task,
    pub truth: Label,
    pub modality: Modality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceRequest {
    pub prompt: RenderedPrompt,
    pub provider: String,
    pub idempotency_key: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<MockOracle>,
}

impl InferenceRequest {
    pub fn new(prompt: RenderedPrompt, provider: &ProviderConfig, oracle: Option<MockOracle>) -> std::io::Result<Self> {
        Self::with_salt(prompt, provider, oracle, 0)
    }

    /// `salt > 0` yields a distinct key for the same prompt (used when re-prompting).
    pub fn with_salt(
        prompt: RenderedPrompt,
        provider: &ProviderConfig,
        oracle: Option<MockOracle>,
        salt: u32,
    ) -> std::io::Result<Self> {
        let mut audio = Sha256::new();
        for path in &prompt.attachments {
            let bytes = std::fs::read(path)?;
            audio.update((bytes.len() as u64).to_le_bytes());
            audio.update(&bytes);
        }
        let idempotency_key = idempotency_key(
            &provider.name,
            &provider.model_name,
            &prompt.identity.content_hash,
            &hex::encode(audio.finalize()),
            provider.temperature,
            salt,
        );
        Ok(InferenceRequest { prompt, provider: provider.name.clone(), idempotency_key, oracle })
    }
}

pub fn idempotency_key(
    provider: &str,
    model: &str,
    content_hash: &str,
    attachments_hash: &str,
    temperature: f64,
    salt: u32,
) -> String {
    let mut h = Sha256::new();
    for field in [provider.as_bytes(), model.as_bytes(), content_hash.as_bytes(), attachments_hash.as_bytes()] {
        h.update((field.len() as u64).to_le_bytes());
        h.update(field);
    }
    h.update(temperature.to_bits().to_le_bytes());
    if salt > 0 {
        h.update(salt.to_le_bytes());
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResponse {
    /// Exactly as returned by the provider.
    pub raw_text: String,
    pub latency_ms: u64,
    pub retries_used: u32,
    pub from_cache: bool,
    #[serde(default)]
    pub provider_meta: std::collections::BTreeMap<String, String>,
}
