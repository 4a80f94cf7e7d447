//! Request and response bodies for the supported chat-completion schemas.

use base64::Engine;
use serde_json::{json, Value};

use super::{HttpRequest, MockOracle, ProviderConfig, ProviderKind, IDEMPOTENCY_HEADER, MOCK_ORACLE_HEADER};

/// One audio attachment: raw bytes and a format tag such as "wav".
pub type Attachment = (Vec<u8>, String);

/// Builds the POST for `text` plus inline base64 audio, per the provider kind.
pub fn build_http_request(
    cfg: &ProviderConfig,
    api_key: Option<&str>,
    text: &str,
    audio: &[Attachment],
    idempotency_key: &str,
    oracle: Option<&MockOracle>,
) -> HttpRequest {
    let b64 = base64::engine::general_purpose::STANDARD;
    let base = cfg.base_url.trim_end_matches('/');
    let mut headers = vec![
        ("content-type".to_string(), "application/json".to_string()),
        (IDEMPOTENCY_HEADER.to_string(), idempotency_key.to_string()),
    ];
    let (url, body) = match cfg.kind {
        ProviderKind::OpenaiCompatible | ProviderKind::Mock => {
            let content = if audio.is_empty() {
                Value::String(text.to_string())
            } else {
                let mut parts = vec![json!({"type": "text", "text": text})];
                for (bytes, format) in audio {
                    parts.push(json!({
                        "type": "input_audio",
                        "input_audio": {"data": b64.encode(bytes), "format": format},
                    }));
                }
                Value::Array(parts)
            };
            if let Some(key) = api_key {
                headers.push(("authorization".to_string(), format!("Bearer {key}")));
            }
            let url = if cfg.kind == ProviderKind::Mock {
                format!("mock://{}/chat/completions", cfg.name)
            } else {
                format!("{base}/chat/completions")
            };
            let body = json!({
                "model": cfg.model_name,
                "temperature": cfg.temperature,
                "messages": [{"role": "user", "content": content}],
            });
            (url, body)
        }
        ProviderKind::GeminiCompatible => {
            let mut parts = vec![json!({"text": text})];
            for (bytes, format) in audio {
                parts.push(json!({"inline_data": {"mime_type": format!("audio/{format}"), "data": b64.encode(bytes)}}));
            }
            if let Some(key) = api_key {
                headers.push(("x-goog-api-key".to_string(), key.to_string()));
            }
            let body = json!({
                "contents": [{"role": "user", "parts": parts}],
                "generationConfig": {"temperature": cfg.temperature},
            });
            (format!("{base}/models/{}:generateContent", cfg.model_name), body)
        }
    };
    if cfg.kind == ProviderKind::Mock {
        if let Some(o) = oracle {
            headers.push((MOCK_ORACLE_HEADER.to_string(), serde_json::to_string(o).expect("oracle serializes")));
        }
    }
    HttpRequest { url, headers, body: serde_json::to_vec(&body).expect("json body serializes") }
}

/// Extracts the model's text from a successful response body, untouched.
pub fn decode_completion(kind: ProviderKind, body: &[u8]) -> Result<String, String> {
    let v: Value = serde_json::from_slice(body).map_err(|e| format!("response is not JSON: {e}"))?;
    let text = match kind {
        ProviderKind::OpenaiCompatible | ProviderKind::Mock => {
            v.pointer("/choices/0/message/content").and_then(Value::as_str).map(str::to_string)
        }
        ProviderKind::GeminiCompatible => v
            .pointer("/candidates/0/content/parts")
            .and_then(Value::as_array)
            .map(|parts| parts.iter().filter_map(|p| p.get("text").and_then(Value::as_str)).collect::<String>()),
    };
    text.ok_or_else(|| "response has no completion text".to_string())
}
