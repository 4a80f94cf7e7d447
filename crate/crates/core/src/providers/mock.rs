//! Deterministic offline provider. It speaks the openai-compatible wire format
//! and answers from ground truth passed in a side header, with configurable
//! accuracy per modality and a configurable share of malformed answers.

use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::{
    HttpRequest, HttpResponse, InferenceRequest, InferenceResponse, MockOracle, Transport, TransportError,
    IDEMPOTENCY_HEADER, MOCK_ORACLE_HEADER,
};
use crate::task::{Label, Modality, TaskKind};

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyByModality {
    #[serde(default = "one")]
    pub text: f64,
    #[serde(default = "one")]
    pub audio: f64,
    #[serde(default = "one")]
    pub audio_text: f64,
}

impl Default for AccuracyByModality {
    fn default() -> Self {
        AccuracyByModality { text: 1.0, audio: 1.0, audio_text: 1.0 }
    }
}

impl AccuracyByModality {
    pub fn uniform(p: f64) -> Self {
        AccuracyByModality { text: p, audio: p, audio_text: p }
    }

    pub fn get(&self, m: Modality) -> f64 {
        match m {
            Modality::Text => self.text,
            Modality::Audio => self.audio,
            Modality::AudioText => self.audio_text,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verbosity {
    /// Just the label.
    #[default]
    Terse,
    /// The label wrapped in a short answer line with surrounding whitespace.
    Verbose,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MockBehavior {
    #[serde(default)]
    pub accuracy_by_modality: AccuracyByModality,
    #[serde(default)]
    pub invalid_rate: f64,
    #[serde(default)]
    pub verbosity: Verbosity,
    #[serde(default)]
    pub seed: u64,
    /// Answer every request with this HTTP status instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force_status: Option<u16>,
}

impl MockBehavior {
    pub fn validate(&self) -> Result<(), String> {
        let a = self.accuracy_by_modality;
        for (name, p) in
            [("text", a.text), ("audio", a.audio), ("audio_text", a.audio_text), ("invalid_rate", self.invalid_rate)]
        {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("mock {name} must lie in [0, 1], got {p}"));
            }
        }
        Ok(())
    }
}

fn rng_for(seed: u64, key: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

fn malformed(oracle: &MockOracle, rng: &mut ChaCha8Rng) -> String {
    let options: Vec<String> = match oracle.task.kind() {
        TaskKind::Binary => vec![
            "Yes, although there is no clear evidence either way.".into(),
            "It is difficult to say from this interview alone.".into(),
            "Yes and no.".into(),
        ],
        TaskKind::Severity => {
            let (lo, hi) = oracle.task.severity_range().expect("severity task");
            vec![format!("{lo} or {}", lo + 1), format!("{}", hi + 3), "I cannot assign a severity level.".into()]
        }
        TaskKind::Multiclass => vec![
            "Maybe Normal, maybe PTSD.".into(),
            "I am not able to tell.".into(),
            "Depressed, or possibly Normal.".into(),
        ],
    };
    options.choose(rng).expect("non-empty").clone()
}

/// The mock's answer for one request; a pure function of behavior, oracle and key.
pub fn mock_answer(behavior: &MockBehavior, oracle: &MockOracle, idempotency_key: &str) -> String {
    let mut rng = rng_for(behavior.seed, idempotency_key);
    let invalid = behavior.invalid_rate.clamp(0.0, 1.0);
    let accuracy = behavior.accuracy_by_modality.get(oracle.modality).clamp(0.0, 1.0 - invalid);
    let u: f64 = rng.gen();
    let label: Label = if u < invalid {
        return malformed(oracle, &mut rng);
    } else if u < invalid + accuracy {
        oracle.truth
    } else {
        let wrong: Vec<Label> = oracle.task.label_space().into_iter().filter(|l| *l != oracle.truth).collect();
        *wrong.choose(&mut rng).expect("label space has at least two labels")
    };
    match behavior.verbosity {
        Verbosity::Terse => label.answer_text(),
        Verbosity::Verbose => format!("  Answer: {}\n", label.answer_text()),
    }
}

/// Answers a request directly, bypassing transport, cache and limits.
pub fn mock_infer(req: &InferenceRequest, behavior: &MockBehavior) -> InferenceResponse {
    let raw_text = req.oracle.as_ref().map(|o| mock_answer(behavior, o, &req.idempotency_key)).unwrap_or_default();
    InferenceResponse { raw_text, latency_ms: 0, retries_used: 0, from_cache: false, provider_meta: Default::default() }
}

/// In-process server for the openai-compatible schema.
#[derive(Debug, Clone)]
pub struct MockTransport {
    behavior: MockBehavior,
}

impl MockTransport {
    pub fn new(behavior: MockBehavior) -> Self {
        MockTransport { behavior }
    }
}

fn json_response(status: u16, body: serde_json::Value) -> HttpResponse {
    HttpResponse {
        status,
        headers: vec![("content-type".into(), "application/json".into())],
        body: serde_json::to_vec(&body).expect("json"),
    }
}

impl Transport for MockTransport {
    fn send(&self, req: &HttpRequest, _timeout: Duration) -> Result<HttpResponse, TransportError> {
        if let Some(status) = self.behavior.force_status {
            return Ok(json_response(status, json!({"error": {"message": "forced failure"}})));
        }
        let Some(oracle) = req.header(MOCK_ORACLE_HEADER).and_then(|h| serde_json::from_str::<MockOracle>(h).ok())
        else {
            return Ok(json_response(400, json!({"error": {"message": "missing or malformed oracle header"}})));
        };
        let key = match req.header(IDEMPOTENCY_HEADER) {
            Some(k) => k.to_string(),
            None => hex::encode(Sha256::digest(&req.body)),
        };
        let text = mock_answer(&self.behavior, &oracle, &key);
        Ok(json_response(
            200,
            json!({
                "object": "chat.completion",
                "choices": [{"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": "stop"}],
            }),
        ))
    }
}
