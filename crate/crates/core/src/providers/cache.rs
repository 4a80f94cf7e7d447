//! Content-addressed response store: `<root>/<first 2 hex>/<key>.response`.
//!
//! A file is a block of `name: value` header lines, one blank line, then the
//! raw response text byte for byte.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CachedResponse {
    pub raw_text: String,
    pub meta: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct ResponseCache {
    root: PathBuf,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl ResponseCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ResponseCache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        let shard = key.get(..2).unwrap_or("00");
        self.root.join(shard).join(format!("{key}.response"))
    }

    /// `Ok(None)` on a miss or on an unreadable/corrupt entry.
    pub fn get(&self, key: &str) -> std::io::Result<Option<CachedResponse>> {
        let bytes = match std::fs::read(self.path_for(key)) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e),
        };
        let parsed = parse_entry(&bytes).filter(|c| c.meta.get("key").map(String::as_str) == Some(key));
        if parsed.is_none() {
            log::warn!("ignoring corrupt cache entry for {key}");
        }
        Ok(parsed.map(|mut c| {
            c.meta.remove("key");
            c.meta.remove("length");
            c
        }))
    }

    /// Writes atomically (temp file then rename); concurrent writers of one key race harmlessly.
    pub fn put(&self, key: &str, raw_text: &str, meta: &BTreeMap<String, String>) -> std::io::Result<()> {
        let path = self.path_for(key);
        let dir = path.parent().expect("cache path has a parent");
        std::fs::create_dir_all(dir)?;
        let mut out = Vec::with_capacity(raw_text.len() + 128);
        out.extend_from_slice(format!("key: {key}\nlength: {}\n", raw_text.len()).as_bytes());
        for (k, v) in meta {
            if k == "key" || k == "length" {
                continue;
            }
            out.extend_from_slice(format!("{}: {}\n", sanitize(k), sanitize(v)).as_bytes());
        }
        out.push(b'\n');
        out.extend_from_slice(raw_text.as_bytes());
        let tmp =
            dir.join(format!(".{key}.{}.{}.tmp", std::process::id(), TMP_COUNTER.fetch_add(1, Ordering::Relaxed)));
        {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(&out)?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp, &path)
    }
}

fn sanitize(s: &str) -> String {
    s.replace(['\n', '\r'], " ")
}

fn parse_entry(bytes: &[u8]) -> Option<CachedResponse> {
    let split = bytes.windows(2).position(|w| w == b"\n\n")?;
    let header = std::str::from_utf8(&bytes[..split]).ok()?;
    let body = &bytes[split + 2..];
    let mut meta = BTreeMap::new();
    for line in header.lines() {
        let (k, v) = line.split_once(": ")?;
        meta.insert(k.to_string(), v.to_string());
    }
    let length: usize = meta.get("length")?.parse().ok()?;
    if length != body.len() {
        return None;
    }
    Some(CachedResponse { raw_text: String::from_utf8(body.to_vec()).ok()?, meta })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_whitespace_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path());
        let raw = "\n\n  Yes \r\n\n";
        let meta = BTreeMap::from([("provider".to_string(), "mock".to_string())]);
        cache.put("ab12", raw, &meta).unwrap();
        assert!(dir.path().join("ab").join("ab12.response").is_file());
        let got = cache.get("ab12").unwrap().unwrap();
        assert_eq!(got.raw_text, raw);
        assert_eq!(got.meta, meta);
        assert_eq!(cache.get("ab13").unwrap(), None);
    }

    #[test]
    fn truncated_entry_is_a_miss() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path());
        cache.put("cd34", "hello", &BTreeMap::new()).unwrap();
        let p = cache.path_for("cd34");
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 2]).unwrap();
        assert_eq!(cache.get("cd34").unwrap(), None);
    }
}
