use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde_json::Value;

use super::{
    Backend, FixtureStore, GatewayError, HttpBackend, RecordingBackend, ReplayBackend, ScriptStep, ScriptedBackend,
};

/// Hands out the backend to use for a given encounter.
///
/// Most providers share one backend across encounters; scripted runs keep a
/// separate script per encounter so parallel runs stay deterministic.
pub trait BackendProvider: Send + Sync {
    fn backend_for(&self, encounter_id: &str) -> Result<Arc<dyn Backend>, GatewayError>;
}

pub struct SharedBackend(pub Arc<dyn Backend>);

impl BackendProvider for SharedBackend {
    fn backend_for(&self, _encounter_id: &str) -> Result<Arc<dyn Backend>, GatewayError> {
        Ok(Arc::clone(&self.0))
    }
}

/// Scripted responses keyed by encounter id, with an optional shared queue
/// for encounters that have no script of their own.
#[derive(Default)]
pub struct ScriptBook {
    per_encounter: HashMap<String, Arc<ScriptedBackend>>,
    shared: Option<Arc<ScriptedBackend>>,
}

impl ScriptBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, encounter_id: impl Into<String>, backend: ScriptedBackend) -> Arc<ScriptedBackend> {
        let backend = Arc::new(backend);
        self.per_encounter.insert(encounter_id.into(), Arc::clone(&backend));
        backend
    }

    pub fn shared(backend: ScriptedBackend) -> Self {
        Self {
            per_encounter: HashMap::new(),
            shared: Some(Arc::new(backend)),
        }
    }

    /// Reads a script document: either an array of steps (one shared queue)
    /// or an object mapping encounter ids to arrays of steps. A step is a
    /// reply string or `{"error": "transport"|"rate_limited"|"bad_request", "message": ...}`.
    pub fn from_json(doc: &Value) -> Result<Self, GatewayError> {
        match doc {
            Value::Array(steps) => Ok(Self::shared(ScriptedBackend::new(parse_steps(steps)?))),
            Value::Object(map) => {
                let mut book = Self::new();
                for (id, steps) in map {
                    let steps = steps
                        .as_array()
                        .ok_or_else(|| GatewayError::Fixture(format!("script for `{id}` must be an array")))?;
                    book.insert(id.clone(), ScriptedBackend::new(parse_steps(steps)?));
                }
                Ok(book)
            }
            _ => Err(GatewayError::Fixture("script must be an array or object".into())),
        }
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| GatewayError::Fixture(format!("{}: {e}", path.display())))?;
        let doc: Value =
            serde_json::from_str(&text).map_err(|e| GatewayError::Fixture(format!("{}: {e}", path.display())))?;
        Self::from_json(&doc)
    }
}

fn parse_steps(steps: &[Value]) -> Result<Vec<ScriptStep>, GatewayError> {
    steps
        .iter()
        .map(|step| match step {
            Value::String(text) => Ok(ScriptStep::reply(text.clone())),
            Value::Object(obj) => {
                let message = obj
                    .get("message")
                    .and_then(Value::as_str)
                    .unwrap_or("scripted failure")
                    .to_owned();
                match obj.get("error").and_then(Value::as_str) {
                    Some("transport") => Ok(ScriptStep::Fail(GatewayError::Transport(message))),
                    Some("rate_limited") => Ok(ScriptStep::Fail(GatewayError::RateLimited { retry_after: None })),
                    Some("bad_request") => Ok(ScriptStep::Fail(GatewayError::BadRequest {
                        status: 400,
                        body: message,
                    })),
                    other => Err(GatewayError::Fixture(format!("unknown scripted error {other:?}"))),
                }
            }
            _ => Err(GatewayError::Fixture(
                "script steps must be strings or error objects".into(),
            )),
        })
        .collect()
}

impl BackendProvider for ScriptBook {
    fn backend_for(&self, encounter_id: &str) -> Result<Arc<dyn Backend>, GatewayError> {
        if let Some(b) = self.per_encounter.get(encounter_id) {
            return Ok(Arc::clone(b) as Arc<dyn Backend>);
        }
        self.shared
            .as_ref()
            .map(|b| Arc::clone(b) as Arc<dyn Backend>)
            .ok_or_else(|| GatewayError::Fixture(format!("no script for encounter `{encounter_id}`")))
    }
}

struct RecordingProvider {
    inner: Arc<dyn BackendProvider>,
    store: FixtureStore,
}

impl BackendProvider for RecordingProvider {
    fn backend_for(&self, encounter_id: &str) -> Result<Arc<dyn Backend>, GatewayError> {
        let inner = self.inner.backend_for(encounter_id)?;
        Ok(Arc::new(RecordingBackend::new(inner, self.store.clone())))
    }
}

/// Settings read by the backend factories.
#[derive(Debug, Clone)]
pub struct BackendConfig {
    pub base_url: String,
    pub timeout: Duration,
    pub api_key: Option<String>,
    /// Fixture directory read by the replay backend.
    pub fixtures: Option<PathBuf>,
    /// Script document read by the scripted backend.
    pub script: Option<PathBuf>,
    /// When set, every exchange is also saved here.
    pub record_to: Option<PathBuf>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8000/v1".into(),
            timeout: Duration::from_secs(300),
            api_key: None,
            fixtures: None,
            script: None,
            record_to: None,
        }
    }
}

pub type BackendFactory = Box<dyn Fn(&BackendConfig) -> Result<Arc<dyn BackendProvider>, GatewayError> + Send + Sync>;

/// Backend constructors addressable by name.
pub struct BackendRegistry {
    factories: BTreeMap<String, BackendFactory>,
}

impl Default for BackendRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl BackendRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    /// `http`, `replay` and `scripted`.
    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register("http", |cfg| {
            let key = cfg.api_key.clone().or_else(|| std::env::var(super::API_KEY_ENV).ok());
            let backend = HttpBackend::with_key(&cfg.base_url, cfg.timeout, key)?;
            Ok(Arc::new(SharedBackend(Arc::new(backend))))
        });
        reg.register("replay", |cfg| {
            let dir = cfg
                .fixtures
                .as_ref()
                .ok_or_else(|| GatewayError::Fixture("replay backend needs a fixture directory".into()))?;
            let backend = ReplayBackend::new(FixtureStore::open(dir)?);
            Ok(Arc::new(SharedBackend(Arc::new(backend))))
        });
        reg.register("scripted", |cfg| {
            let path = cfg
                .script
                .as_ref()
                .or(cfg.fixtures.as_ref())
                .ok_or_else(|| GatewayError::Fixture("scripted backend needs a script file".into()))?;
            Ok(Arc::new(ScriptBook::load(path)?))
        });
        reg
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&BackendConfig) -> Result<Arc<dyn BackendProvider>, GatewayError> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_owned(), Box::new(factory));
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn build(&self, name: &str, cfg: &BackendConfig) -> Result<Arc<dyn BackendProvider>, GatewayError> {
        let factory = self.factories.get(name).ok_or_else(|| {
            GatewayError::InvalidRequest(format!(
                "unknown backend `{name}` (available: {})",
                self.names().join(", ")
            ))
        })?;
        let provider = factory(cfg)?;
        match &cfg.record_to {
            Some(dir) => Ok(Arc::new(RecordingProvider {
                inner: provider,
                store: FixtureStore::create(dir)?,
            })),
            None => Ok(provider),
        }
    }
}
