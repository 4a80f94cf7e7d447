use std::collections::{BTreeMap, HashSet};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use sha2::{Digest, Sha256};

use super::wire::{build_http_request, decode_completion, Attachment};
use super::{
    AdmissionGate, Clock, InferenceRequest, InferenceResponse, MockTransport, ProviderConfig, ProviderKind,
    ReqwestTransport, ResponseCache, SystemClock, Transport, TransportError,
};
use crate::task::Modality;

#[derive(Debug, thiserror::Error)]
pub enum InferenceError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("still rate limited after {attempts} attempts")]
    RateLimitedExhausted { attempts: u32 },
    #[error("timed out on all {attempts} attempts")]
    TimeoutExhausted { attempts: u32 },
    #[error("provider `{provider}` does not accept {modality} input")]
    UnsupportedModality { provider: String, modality: Modality },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("cache: {0}")]
    Cache(std::io::Error),
    #[error("attachment {path}: {source}")]
    Attachment {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl InferenceError {
    /// Short class name stored with failed records.
    pub fn class(&self) -> &'static str {
        match self {
            InferenceError::Auth(_) => "auth_error",
            InferenceError::RateLimitedExhausted { .. } => "rate_limited_exhausted",
            InferenceError::TimeoutExhausted { .. } => "timeout_exhausted",
            InferenceError::UnsupportedModality { .. } => "unsupported_modality",
            InferenceError::Transport(_) => "transport_error",
            InferenceError::Cache(_) => "cache_error",
            InferenceError::Attachment { .. } => "attachment_error",
        }
    }
}

/// Exponential backoff with deterministic jitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub base: Duration,
    pub factor: f64,
    pub max_attempts: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { base: Duration::from_secs(1), factor: 2.0, max_attempts: 5 }
    }
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1`, scaled into [0.5, 1.0] of the nominal backoff.
    pub fn delay(&self, attempt: u32, key: &str) -> Duration {
        let nominal = self.base.as_secs_f64() * self.factor.powi(attempt.saturating_sub(1) as i32);
        let mut h = Sha256::new();
        h.update(key.as_bytes());
        h.update(attempt.to_le_bytes());
        let d = h.finalize();
        let u = u64::from_le_bytes(d[..8].try_into().expect("8 bytes")) as f64 / u64::MAX as f64;
        Duration::from_secs_f64(nominal * (0.5 + 0.5 * u))
    }
}

enum Failure {
    RateLimited,
    Timeout,
    Status(u16),
    Transport(String),
}

/// Inference client for one configured provider.
pub struct ProviderClient {
    cfg: ProviderConfig,
    transport: Arc<dyn Transport>,
    cache: Option<ResponseCache>,
    gate: AdmissionGate,
    clock: Arc<dyn Clock>,
    retry: RetryPolicy,
    in_flight: Mutex<HashSet<String>>,
    in_flight_done: Condvar,
}

struct InFlight<'a> {
    client: &'a ProviderClient,
    key: String,
}

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        self.client.in_flight.lock().expect("in-flight lock").remove(&self.key);
        self.client.in_flight_done.notify_all();
    }
}

impl ProviderClient {
    pub fn new(
        cfg: ProviderConfig,
        transport: Arc<dyn Transport>,
        cache: Option<ResponseCache>,
        clock: Arc<dyn Clock>,
    ) -> Self {
        let gate = AdmissionGate::new(cfg.requests_per_minute, cfg.max_concurrent, clock.clone());
        let retry =
            RetryPolicy { base: Duration::from_millis(cfg.retry_base_ms), factor: 2.0, max_attempts: cfg.max_attempts };
        ProviderClient {
            cfg,
            transport,
            cache,
            gate,
            clock,
            retry,
            in_flight: Mutex::new(HashSet::new()),
            in_flight_done: Condvar::new(),
        }
    }

    /// Client with the default transport for the provider kind and the system clock.
    pub fn for_config(cfg: ProviderConfig, cache: Option<ResponseCache>) -> Result<Self, InferenceError> {
        let transport: Arc<dyn Transport> = match cfg.kind {
            ProviderKind::Mock => Arc::new(MockTransport::new(cfg.mock.clone().unwrap_or_default())),
            _ => Arc::new(ReqwestTransport::new().map_err(|e| InferenceError::Transport(e.to_string()))?),
        };
        Ok(Self::new(cfg, transport, cache, Arc::new(SystemClock::new())))
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.cfg
    }

    pub fn infer(&self, req: &InferenceRequest) -> Result<InferenceResponse, InferenceError> {
        let modality = req.prompt.identity.modality;
        if modality.needs_audio() && !self.cfg.supports_audio {
            return Err(InferenceError::UnsupportedModality { provider: self.cfg.name.clone(), modality });
        }
        let _slot = self.claim(&req.idempotency_key);
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get(&req.idempotency_key).map_err(InferenceError::Cache)? {
                return Ok(InferenceResponse {
                    raw_text: hit.raw_text,
                    latency_ms: 0,
                    retries_used: 0,
                    from_cache: true,
                    provider_meta: hit.meta,
                });
            }
        }
        let api_key = self.api_key()?;
        let audio = self.load_attachments(req)?;
        let http = build_http_request(
            &self.cfg,
            api_key.as_deref(),
            &req.prompt.text,
            &audio,
            &req.idempotency_key,
            req.oracle.as_ref(),
        );
        let timeout = Duration::from_secs_f64(self.cfg.request_timeout_s);
        let mut last = Failure::Transport("no attempt made".into());
        for attempt in 1..=self.retry.max_attempts {
            let started = self.clock.now();
            let result = {
                let _permit = self.gate.acquire();
                self.transport.send(&http, timeout)
            };
            let latency_ms = (self.clock.now().saturating_sub(started)).as_millis() as u64;
            match result {
                Ok(resp) if (200..300).contains(&resp.status) => {
                    let raw_text = decode_completion(self.cfg.kind, &resp.body).map_err(InferenceError::Transport)?;
                    let provider_meta = BTreeMap::from([
                        ("provider".to_string(), self.cfg.name.clone()),
                        ("model".to_string(), self.cfg.model_name.clone()),
                        ("attempts".to_string(), attempt.to_string()),
                    ]);
                    if let Some(cache) = &self.cache {
                        cache.put(&req.idempotency_key, &raw_text, &provider_meta).map_err(InferenceError::Cache)?;
                    }
                    return Ok(InferenceResponse {
                        raw_text,
                        latency_ms,
                        retries_used: attempt - 1,
                        from_cache: false,
                        provider_meta,
                    });
                }
                Ok(resp) => match resp.status {
                    401 | 403 => {
                        return Err(InferenceError::Auth(format!("HTTP {} from {}", resp.status, self.cfg.name)))
                    }
                    429 => {
                        last = Failure::RateLimited;
                        if let Some(wait) = resp.header("retry-after").and_then(|v| v.trim().parse::<f64>().ok()) {
                            if attempt < self.retry.max_attempts {
                                self.clock.sleep(Duration::from_secs_f64(wait.max(0.0)));
                            }
                        }
                    }
                    s if s >= 500 => last = Failure::Status(s),
                    s => {
                        let snippet: String = String::from_utf8_lossy(&resp.body).chars().take(200).collect();
                        return Err(InferenceError::Transport(format!("HTTP {s}: {snippet}")));
                    }
                },
                Err(TransportError::Timeout) => last = Failure::Timeout,
                Err(e) => last = Failure::Transport(e.to_string()),
            }
            if attempt < self.retry.max_attempts {
                self.clock.sleep(self.retry.delay(attempt, &req.idempotency_key));
            }
        }
        let attempts = self.retry.max_attempts;
        Err(match last {
            Failure::RateLimited => InferenceError::RateLimitedExhausted { attempts },
            Failure::Timeout => InferenceError::TimeoutExhausted { attempts },
            Failure::Status(s) => InferenceError::Transport(format!("HTTP {s} on all {attempts} attempts")),
            Failure::Transport(d) => InferenceError::Transport(d),
        })
    }

    /// Serializes requests sharing a key so that only the first reaches the network.
    fn claim(&self, key: &str) -> InFlight<'_> {
        let mut set = self.in_flight.lock().expect("in-flight lock");
        while set.contains(key) {
            set = self.in_flight_done.wait(set).expect("in-flight lock");
        }
        set.insert(key.to_string());
        InFlight { client: self, key: key.to_string() }
    }

    fn api_key(&self) -> Result<Option<String>, InferenceError> {
        match (&self.cfg.api_key_env, self.cfg.kind) {
            (None, _) | (_, ProviderKind::Mock) => Ok(None),
            (Some(var), _) => std::env::var(var)
                .map(Some)
                .map_err(|_| InferenceError::Auth(format!("environment variable {var} is not set"))),
        }
    }

    fn load_attachments(&self, req: &InferenceRequest) -> Result<Vec<Attachment>, InferenceError> {
        req.prompt
            .attachments
            .iter()
            .map(|p| {
                let bytes = std::fs::read(p)
                    .map_err(|e| InferenceError::Attachment { path: p.display().to_string(), source: e })?;
                let format = p.extension().and_then(|e| e.to_str()).unwrap_or("wav").to_ascii_lowercase();
                Ok((bytes, format))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles_within_jitter_band() {
        let p = RetryPolicy::default();
        for attempt in 1..5 {
            let d = p.delay(attempt, "k").as_secs_f64();
            let nominal = 2f64.powi(attempt as i32 - 1);
            assert!(d >= nominal * 0.5 && d <= nominal, "{attempt}: {d}");
            assert_eq!(p.delay(attempt, "k"), p.delay(attempt, "k"));
        }
    }
}
