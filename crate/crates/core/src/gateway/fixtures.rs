use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Backend, CompletionRequest, CompletionResponse, GatewayError};

/// Contents of one fixture file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub request: CompletionRequest,
    pub response: CompletionResponse,
    pub timestamp: String,
}

/// A directory holding one `<key>.json` file per recorded request, where the
/// key is [`CompletionRequest::fixture_key`].
#[derive(Debug, Clone)]
pub struct FixtureStore {
    dir: PathBuf,
}

impl FixtureStore {
    /// Opens an existing store for reading.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, GatewayError> {
        let dir = dir.into();
        if !dir.is_dir() {
            return Err(GatewayError::Fixture(format!(
                "fixture directory {} does not exist",
                dir.display()
            )));
        }
        Ok(Self { dir })
    }

    /// Opens (creating if needed) a store and checks that it is writable.
    pub fn create(dir: impl Into<PathBuf>) -> Result<Self, GatewayError> {
        let dir = dir.into();
        let fail = |e: std::io::Error| GatewayError::Fixture(format!("cannot write to {}: {e}", dir.display()));
        fs::create_dir_all(&dir).map_err(fail)?;
        let probe = dir.join(".write-probe");
        fs::write(&probe, b"").map_err(fail)?;
        fs::remove_file(&probe).map_err(fail)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, req: &CompletionRequest) -> PathBuf {
        self.dir.join(format!("{}.json", req.fixture_key()))
    }

    pub fn load(&self, req: &CompletionRequest) -> Result<Option<FixtureRecord>, GatewayError> {
        let path = self.path_for(req);
        let text = match fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(GatewayError::Fixture(format!("{}: {e}", path.display()))),
        };
        let record: FixtureRecord =
            serde_json::from_str(&text).map_err(|e| GatewayError::Fixture(format!("{}: {e}", path.display())))?;
        // 16 hex chars can collide in principle; the stored request settles it
        if record.request.canonical_hash() != req.canonical_hash() {
            return Ok(None);
        }
        Ok(Some(record))
    }

    pub fn save(&self, req: &CompletionRequest, resp: &CompletionResponse) -> Result<PathBuf, GatewayError> {
        let record = FixtureRecord {
            request: req.clone(),
            response: resp.clone(),
            timestamp: chrono::Utc::now().to_rfc3339(),
        };
        let path = self.path_for(req);
        let fail = |e: std::io::Error| GatewayError::Fixture(format!("{}: {e}", path.display()));
        let mut body = serde_json::to_string_pretty(&record).map_err(|e| GatewayError::Fixture(e.to_string()))?;
        body.push('\n');
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, body).map_err(fail)?;
        fs::rename(&tmp, &path).map_err(fail)?;
        Ok(path)
    }

    /// Number of fixture files in the store.
    pub fn len(&self) -> usize {
        fs::read_dir(&self.dir)
            .map(|entries| {
                entries
                    .filter_map(Result::ok)
                    .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
                    .count()
            })
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Answers each request with the response recorded for it.
#[derive(Debug)]
pub struct ReplayBackend {
    store: FixtureStore,
}

impl ReplayBackend {
    pub fn new(store: FixtureStore) -> Self {
        Self { store }
    }
}

impl Backend for ReplayBackend {
    fn name(&self) -> &str {
        "replay"
    }

    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        match self.store.load(req)? {
            Some(record) => Ok(record.response),
            None => Err(GatewayError::ReplayMiss {
                hash: req.canonical_hash(),
                prompt_digest: req.prompt_digest(),
            }),
        }
    }
}

/// Forwards to another backend and saves every successful exchange.
pub struct RecordingBackend {
    inner: Arc<dyn Backend>,
    store: FixtureStore,
}

impl RecordingBackend {
    pub fn new(inner: Arc<dyn Backend>, store: FixtureStore) -> Self {
        Self { inner, store }
    }
}

impl Backend for RecordingBackend {
    fn name(&self) -> &str {
        "recording"
    }

    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        let resp = self.inner.complete(req)?;
        self.store.save(req, &resp)?;
        Ok(resp)
    }
}
