//! Audio-to-transcript adapters. Speech recognition itself happens elsewhere;
//! this only invokes it and caches the result by audio content hash.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{HttpRequest, ReqwestTransport, Transport, TransportError};

#[derive(Debug, thiserror::Error)]
pub enum TranscriptionError {
    #[error("transcription adapter unavailable: {0}")]
    AdapterUnavailable(String),
    #[error("transcription failed: {0}")]
    TranscriptionFailed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TranscriptionAdapter {
    /// Runs `program args...`, with `{audio}` in an argument replaced by the
    /// audio path, and takes stdout as the transcript.
    ExternalCommand {
        program: String,
        #[serde(default)]
        args: Vec<String>,
    },
    /// POSTs the audio bytes; the response is either JSON with a `text` field or plain text.
    HttpEndpoint {
        url: String,
        #[serde(default)]
        api_key_env: Option<String>,
        #[serde(default = "default_timeout")]
        timeout_s: f64,
    },
    /// Reads `<dir>/<name>.txt`, where `<name>` is the audio file stem with a
    /// trailing `_AUDIO` replaced by `_Transcript`. `dir` defaults to the audio's directory.
    PrecomputedFile {
        #[serde(default)]
        dir: Option<PathBuf>,
    },
}

fn default_timeout() -> f64 {
    600.0
}

impl TranscriptionAdapter {
    pub fn name(&self) -> &'static str {
        match self {
            TranscriptionAdapter::ExternalCommand { .. } => "external_command",
            TranscriptionAdapter::HttpEndpoint { .. } => "http_endpoint",
            TranscriptionAdapter::PrecomputedFile { .. } => "precomputed_file",
        }
    }
}

/// Path a precomputed transcript is expected at.
pub fn precomputed_path(audio: &Path, dir: Option<&Path>) -> PathBuf {
    let stem = audio.file_stem().and_then(|s| s.to_str()).unwrap_or("audio");
    let name = match stem.strip_suffix("_AUDIO") {
        Some(id) => format!("{id}_Transcript.txt"),
        None => format!("{stem}.txt"),
    };
    dir.or_else(|| audio.parent()).unwrap_or(Path::new(".")).join(name)
}

pub struct Transcriber {
    adapter: TranscriptionAdapter,
    cache_dir: Option<PathBuf>,
    memo: Mutex<HashMap<String, String>>,
    invocations: AtomicUsize,
    transport: Option<Arc<dyn Transport>>,
}

impl Transcriber {
    pub fn new(adapter: TranscriptionAdapter, cache_dir: Option<PathBuf>) -> Self {
        Transcriber {
            adapter,
            cache_dir,
            memo: Mutex::new(HashMap::new()),
            invocations: AtomicUsize::new(0),
            transport: None,
        }
    }

    /// Overrides the transport used by the HTTP adapter.
    pub fn with_transport(mut self, t: Arc<dyn Transport>) -> Self {
        self.transport = Some(t);
        self
    }

    pub fn adapter(&self) -> &TranscriptionAdapter {
        &self.adapter
    }

    /// How many times the underlying adapter actually ran.
    pub fn invocations(&self) -> usize {
        self.invocations.load(Ordering::SeqCst)
    }

    pub fn transcribe(&self, audio_path: &Path) -> Result<String, TranscriptionError> {
        let bytes = std::fs::read(audio_path)
            .map_err(|e| TranscriptionError::TranscriptionFailed(format!("{}: {e}", audio_path.display())))?;
        let hash = hex::encode(Sha256::digest(&bytes));
        if let Some(t) = self.memo.lock().expect("memo lock").get(&hash) {
            return Ok(t.clone());
        }
        let disk = self.cache_dir.as_ref().map(|d| d.join(format!("{hash}.txt")));
        if let Some(text) = disk.as_ref().and_then(|p| std::fs::read_to_string(p).ok()) {
            self.memo.lock().expect("memo lock").insert(hash, text.clone());
            return Ok(text);
        }
        self.invocations.fetch_add(1, Ordering::SeqCst);
        let text = self.run(audio_path, bytes)?;
        if let Some(p) = disk {
            if let Some(parent) = p.parent() {
                let _ = std::fs::create_dir_all(parent);
            }
            if let Err(e) = std::fs::write(&p, &text) {
                log::warn!("could not cache transcript at {}: {e}", p.display());
            }
        }
        self.memo.lock().expect("memo lock").insert(hash, text.clone());
        Ok(text)
    }

    fn run(&self, audio_path: &Path, bytes: Vec<u8>) -> Result<String, TranscriptionError> {
        use TranscriptionError::*;
        match &self.adapter {
            TranscriptionAdapter::PrecomputedFile { dir } => {
                let p = precomputed_path(audio_path, dir.as_deref());
                std::fs::read_to_string(&p).map_err(|e| TranscriptionFailed(format!("{}: {e}", p.display())))
            }
            TranscriptionAdapter::ExternalCommand { program, args } => {
                let audio = audio_path.display().to_string();
                let args: Vec<String> = args.iter().map(|a| a.replace("{audio}", &audio)).collect();
                let out = std::process::Command::new(program).args(&args).output().map_err(|e| {
                    if e.kind() == std::io::ErrorKind::NotFound {
                        AdapterUnavailable(format!("`{program}` not found"))
                    } else {
                        TranscriptionFailed(format!("`{program}`: {e}"))
                    }
                })?;
                if !out.status.success() {
                    let err = String::from_utf8_lossy(&out.stderr);
                    return Err(TranscriptionFailed(format!("`{program}` exited with {}: {}", out.status, err.trim())));
                }
                String::from_utf8(out.stdout).map_err(|_| TranscriptionFailed("output is not UTF-8".into()))
            }
            TranscriptionAdapter::HttpEndpoint { url, api_key_env, timeout_s } => {
                let transport: Arc<dyn Transport> = match &self.transport {
                    Some(t) => t.clone(),
                    None => Arc::new(ReqwestTransport::new().map_err(|e| AdapterUnavailable(e.to_string()))?),
                };
                let mut headers = vec![("content-type".to_string(), "application/octet-stream".to_string())];
                if let Some(var) = api_key_env {
                    let key = std::env::var(var).map_err(|_| AdapterUnavailable(format!("{var} is not set")))?;
                    headers.push(("authorization".to_string(), format!("Bearer {key}")));
                }
                let req = HttpRequest { url: url.clone(), headers, body: bytes };
                let resp = transport.send(&req, Duration::from_secs_f64(*timeout_s)).map_err(|e| match e {
                    TransportError::Connect(d) => AdapterUnavailable(d),
                    other => TranscriptionFailed(other.to_string()),
                })?;
                if !(200..300).contains(&resp.status) {
                    return Err(TranscriptionFailed(format!("HTTP {}", resp.status)));
                }
                let body =
                    String::from_utf8(resp.body).map_err(|_| TranscriptionFailed("response is not UTF-8".into()))?;
                match serde_json::from_str::<serde_json::Value>(&body) {
                    Ok(v) => v
                        .get("text")
                        .and_then(|t| t.as_str())
                        .map(str::to_string)
                        .ok_or_else(|| TranscriptionFailed("JSON response has no `text`".into())),
                    Err(_) => Ok(body),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precomputed_name_mapping() {
        assert_eq!(precomputed_path(Path::new("/a/300_AUDIO.wav"), None), PathBuf::from("/a/300_Transcript.txt"));
        assert_eq!(precomputed_path(Path::new("/a/x.wav"), Some(Path::new("/t"))), PathBuf::from("/t/x.txt"));
    }
}
