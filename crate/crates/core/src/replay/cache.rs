use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::llm::{CallKind, LlmCall};

/// Hex SHA-256 over the template version, model, dataset fingerprint, call
/// kind and prompt. Timestamps and credentials never enter the key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CacheKey(String);

impl CacheKey {
    pub fn for_call(call: &LlmCall) -> Self {
        // LlmCall has a fixed field order, so its JSON is canonical.
        let canonical = serde_json::to_vec(call).expect("LlmCall serializes");
        let mut hasher = Sha256::new();
        hasher.update(b"provoscope-cache/1\0");
        hasher.update(&canonical);
        CacheKey(hex::encode(hasher.finalize()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: CacheKey,
    pub kind: CallKind,
    /// The full request as JSON, kept for inspection and substring matching.
    pub request_snapshot: String,
    pub response: String,
    pub recorded_at: DateTime<Utc>,
}

impl CacheEntry {
    pub fn new(call: &LlmCall, response: String) -> Self {
        CacheEntry {
            key: CacheKey::for_call(call),
            kind: call.kind,
            request_snapshot: serde_json::to_string_pretty(call).expect("LlmCall serializes"),
            response,
            recorded_at: Utc::now(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("cache I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt cache entry {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
}

/// One JSON file per entry, named `<key>.json`. Entries are written with a
/// temp-file rename and never overwritten.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, CacheError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|source| CacheError::Io {
            path: dir.clone(),
            source,
        })?;
        Ok(ResponseCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &CacheKey) -> Result<Option<CacheEntry>, CacheError> {
        let path = self.path_for(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(source) => return Err(CacheError::Io { path, source }),
        };
        let entry: CacheEntry = serde_json::from_slice(&bytes).map_err(|e| CacheError::Corrupt {
            path: path.clone(),
            message: e.to_string(),
        })?;
        if &entry.key != key {
            return Err(CacheError::Corrupt {
                path,
                message: format!("file holds key {}", entry.key),
            });
        }
        Ok(Some(entry))
    }

    /// Stores `entry` unless its key is already present. Returns whether it
    /// was written.
    pub fn put(&self, entry: &CacheEntry) -> Result<bool, CacheError> {
        let path = self.path_for(&entry.key);
        if path.exists() {
            return Ok(false);
        }
        let io = |source| CacheError::Io {
            path: path.clone(),
            source,
        };
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(io)?;
        let json = serde_json::to_vec_pretty(entry).expect("CacheEntry serializes");
        tmp.write_all(&json).map_err(io)?;
        tmp.write_all(b"\n").map_err(io)?;
        match tmp.persist_noclobber(&path) {
            Ok(_) => Ok(true),
            Err(e) if e.error.kind() == std::io::ErrorKind::AlreadyExists => Ok(false),
            Err(e) => Err(io(e.error)),
        }
    }

    /// Keys of every stored entry, sorted.
    pub fn keys(&self) -> Result<Vec<CacheKey>, CacheError> {
        let read = fs::read_dir(&self.dir).map_err(|source| CacheError::Io {
            path: self.dir.clone(),
            source,
        })?;
        let mut keys: Vec<CacheKey> = read
            .filter_map(Result::ok)
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                let stem = name.strip_suffix(".json")?;
                (stem.len() == 64 && stem.bytes().all(|b| b.is_ascii_hexdigit())).then(|| CacheKey(stem.to_string()))
            })
            .collect();
        keys.sort();
        Ok(keys)
    }

    pub fn is_empty(&self) -> bool {
        self.keys().map_or(true, |k| k.is_empty())
    }
}
