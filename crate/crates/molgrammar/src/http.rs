//! JSON-over-HTTP transport with cassette record and replay.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("request to {url} failed: {message}")]
    Request { url: String, message: String },
    #[error("no cassette entry for {url} (key {key})")]
    CassetteMiss { url: String, key: String },
    #[error("cassette {path}: {message}")]
    Cassette { path: PathBuf, message: String },
}

/// POSTs a JSON body and returns the JSON reply.
pub trait JsonPost: Send + Sync {
    fn post_json(&self, url: &str, body: &Value) -> Result<Value, TransportError>;
}

impl<T: JsonPost + ?Sized> JsonPost for &T {
    fn post_json(&self, url: &str, body: &Value) -> Result<Value, TransportError> {
        (**self).post_json(url, body)
    }
}

impl<T: JsonPost + ?Sized> JsonPost for Box<T> {
    fn post_json(&self, url: &str, body: &Value) -> Result<Value, TransportError> {
        (**self).post_json(url, body)
    }
}

impl<T: JsonPost + ?Sized> JsonPost for std::sync::Arc<T> {
    fn post_json(&self, url: &str, body: &Value) -> Result<Value, TransportError> {
        (**self).post_json(url, body)
    }
}

pub struct HttpClient {
    agent: ureq::Agent,
    bearer: Option<String>,
}

impl HttpClient {
    pub fn new(timeout: Duration, bearer: Option<String>) -> Self {
        HttpClient { agent: ureq::AgentBuilder::new().timeout(timeout).build(), bearer }
    }
}

impl JsonPost for HttpClient {
    fn post_json(&self, url: &str, body: &Value) -> Result<Value, TransportError> {
        let fail = |message: String| TransportError::Request { url: url.to_owned(), message };
        let mut req = self.agent.post(url);
        if let Some(token) = &self.bearer {
            req = req.set("Authorization", &format!("Bearer {token}"));
        }
        let resp = req.send_json(body).map_err(|e| fail(e.to_string()))?;
        resp.into_json().map_err(|e| fail(e.to_string()))
    }
}

/// Cassette key: SHA-256 of the URL and the body's compact JSON (object keys
/// are sorted by `serde_json`'s default map).
pub fn cassette_key(url: &str, body: &Value) -> String {
    let mut h = Sha256::new();
    h.update(url.as_bytes());
    h.update([0]);
    h.update(body.to_string().as_bytes());
    format!("{:x}", h.finalize())
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct CassetteFile {
    interactions: BTreeMap<String, Interaction>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Interaction {
    url: String,
    request: Value,
    response: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CassetteMode {
    /// Serve recorded replies; a miss is an error.
    Replay,
    /// Forward to the inner transport and store every reply.
    Record,
}

pub struct Cassette<T> {
    inner: Option<T>,
    path: PathBuf,
    mode: CassetteMode,
    entries: Mutex<CassetteFile>,
}

impl<T: JsonPost> Cassette<T> {
    pub fn replay(path: impl Into<PathBuf>) -> Result<Self, TransportError> {
        let path = path.into();
        let entries = Self::load(&path)?;
        Ok(Cassette { inner: None, path, mode: CassetteMode::Replay, entries: Mutex::new(entries) })
    }

    /// Records through `inner`, keeping entries already present in `path`.
    pub fn record(path: impl Into<PathBuf>, inner: T) -> Result<Self, TransportError> {
        let path = path.into();
        let entries = if path.exists() { Self::load(&path)? } else { CassetteFile::default() };
        Ok(Cassette { inner: Some(inner), path, mode: CassetteMode::Record, entries: Mutex::new(entries) })
    }

    fn load(path: &Path) -> Result<CassetteFile, TransportError> {
        let err = |message: String| TransportError::Cassette { path: path.to_owned(), message };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| err(e.to_string()))
    }

    pub fn mode(&self) -> CassetteMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cassette lock").interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes recorded interactions; a no-op in replay mode.
    pub fn save(&self) -> Result<(), TransportError> {
        if self.mode == CassetteMode::Replay {
            return Ok(());
        }
        let err = |message: String| TransportError::Cassette { path: self.path.clone(), message };
        let text = serde_json::to_string_pretty(&*self.entries.lock().expect("cassette lock"))
            .map_err(|e| err(e.to_string()))?;
        crate::files::write_atomic(&self.path, text.as_bytes()).map_err(|e| err(e.to_string()))
    }
}

impl<T: JsonPost> JsonPost for Cassette<T> {
    fn post_json(&self, url: &str, body: &Value) -> Result<Value, TransportError> {
        let key = cassette_key(url, body);
        if let Some(hit) = self.entries.lock().expect("cassette lock").interactions.get(&key) {
            return Ok(hit.response.clone());
        }
        let Some(inner) = &self.inner else {
            return Err(TransportError::CassetteMiss { url: url.to_owned(), key });
        };
        let response = inner.post_json(url, body)?;
        self.entries.lock().expect("cassette lock").interactions.insert(
            key,
            Interaction { url: url.to_owned(), request: body.clone(), response: response.clone() },
        );
        Ok(response)
    }
}
