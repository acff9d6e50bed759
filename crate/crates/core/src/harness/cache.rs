//! On-disk response cache: one JSON file per entry.
//!
//! Layout: `<dir>/<first two hex digits>/<sha256 hex>.json`. The key hashes
//! the backend name, model and input, each length-prefixed. Writes go to a
//! temporary file in the same directory and are renamed into place.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheEntry {
    pub backend: String,
    #[serde(default)]
    pub model: Option<String>,
    pub input: String,
    pub output: String,
}

pub fn cache_key(backend: &str, model: Option<&str>, input: &str) -> String {
    let mut h = Sha256::new();
    for part in [backend, model.unwrap_or(""), input] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    h.update([u8::from(model.is_some())]);
    hex::encode(h.finalize())
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.json"))
    }

    /// `Ok(None)` on a miss; a present but unreadable or mismatched file is an error.
    pub fn get(
        &self,
        backend: &str,
        model: Option<&str>,
        input: &str,
    ) -> Result<Option<String>, HarnessError> {
        let path = self.entry_path(&cache_key(backend, model, input));
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(HarnessError::io(format!("reading {}", path.display()), e)),
        };
        let corrupt = |message: String| HarnessError::CacheCorrupt {
            path: path.display().to_string(),
            message,
        };
        let entry: CacheEntry =
            serde_json::from_slice(&bytes).map_err(|e| corrupt(e.to_string()))?;
        if entry.backend != backend || entry.model.as_deref() != model || entry.input != input {
            return Err(corrupt("entry does not belong to its key".into()));
        }
        Ok(Some(entry.output))
    }

    pub fn put(&self, entry: &CacheEntry) -> Result<(), HarnessError> {
        let key = cache_key(&entry.backend, entry.model.as_deref(), &entry.input);
        let path = self.entry_path(&key);
        let parent = path.parent().expect("entry has a shard directory");
        fs::create_dir_all(parent)
            .map_err(|e| HarnessError::io(format!("creating {}", parent.display()), e))?;
        let tmp = parent.join(format!(
            ".{key}.{}.{}.tmp",
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        let body = serde_json::to_vec_pretty(entry).expect("cache entry serializes");
        fs::write(&tmp, body)
            .map_err(|e| HarnessError::io(format!("writing {}", tmp.display()), e))?;
        fs::rename(&tmp, &path)
            .map_err(|e| HarnessError::io(format!("renaming into {}", path.display()), e))
    }
}
