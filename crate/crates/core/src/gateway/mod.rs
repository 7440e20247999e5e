//! Chat-completion access independent of where completions come from.
//!
//! A [`Backend`] answers [`CompletionRequest`]s. Three implementations ship:
//! an OpenAI-compatible HTTP client, a replay backend answering from recorded
//! fixtures, and a scripted backend for tests. Backends are constructed by
//! name through [`BackendRegistry`].

mod fixtures;
mod http;
mod pool;
mod registry;
mod retry;
mod scripted;

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use fixtures::{FixtureRecord, FixtureStore, RecordingBackend, ReplayBackend};
pub use http::{HttpBackend, API_KEY_ENV};
pub use pool::run_bounded;
pub use registry::{BackendConfig, BackendFactory, BackendProvider, BackendRegistry, ScriptBook, SharedBackend};
pub use retry::{complete_with_retry, Attempted, RetryFailure, RetryPolicy};
pub use scripted::{ScriptStep, ScriptedBackend};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl CompletionRequest {
    pub fn new(model: impl Into<String>, messages: Vec<ChatMessage>) -> Self {
        Self {
            model: model.into(),
            messages,
            temperature: 0.0,
            max_tokens: 2048,
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let invalid = |msg: &str| Err(GatewayError::InvalidRequest(msg.to_owned()));
        if self.messages.is_empty() {
            return invalid("request has no messages");
        }
        if self.messages.iter().skip(1).any(|m| m.role == Role::System) {
            return invalid("a system message may only appear first");
        }
        if self
            .messages
            .iter()
            .any(|m| m.role != Role::Assistant && m.content.is_empty())
        {
            return invalid("system and user messages must not be empty");
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return invalid("temperature must be non-negative");
        }
        if self.max_tokens == 0 {
            return invalid("max_tokens must be at least 1");
        }
        Ok(())
    }

    /// Bytes hashed to key fixtures: model, every message, and temperature,
    /// serialized as compact JSON in that field order.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        #[derive(Serialize)]
        struct Canonical<'a> {
            model: &'a str,
            messages: &'a [ChatMessage],
            temperature: f64,
        }
        serde_json::to_vec(&Canonical {
            model: &self.model,
            messages: &self.messages,
            temperature: self.temperature,
        })
        .expect("request serialization cannot fail")
    }

    /// Hex SHA-256 of [`canonical_bytes`](Self::canonical_bytes).
    pub fn canonical_hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_bytes()))
    }

    /// The 16-character fixture key.
    pub fn fixture_key(&self) -> String {
        self.canonical_hash()[..16].to_owned()
    }

    /// Short human-readable summary of the last message, for error output.
    pub fn prompt_digest(&self) -> String {
        let last = self.messages.last().map_or("", |m| m.content.as_str());
        let flat: String = last.split_whitespace().collect::<Vec<_>>().join(" ");
        let mut digest: String = flat.chars().take(80).collect();
        if flat.chars().count() > 80 {
            digest.push_str("...");
        }
        let hash = hex::encode(Sha256::digest(last.as_bytes()));
        format!("{} chars, sha256 {}: {digest}", last.len(), &hash[..12])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinishReason {
    Stop,
    Length,
    Other,
}

impl FinishReason {
    pub fn from_api(s: Option<&str>) -> Self {
        match s {
            Some("stop") | Some("end_turn") => FinishReason::Stop,
            Some("length") | Some("max_tokens") => FinishReason::Length,
            _ => FinishReason::Other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt: u64,
    pub completion: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    pub finish_reason: FinishReason,
    #[serde(with = "millis")]
    pub latency: Duration,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_usage: Option<TokenUsage>,
}

impl CompletionResponse {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            finish_reason: FinishReason::Stop,
            latency: Duration::ZERO,
            token_usage: None,
        }
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum GatewayError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited{}", .retry_after.map(|d| format!(" (retry after {}s)", d.as_secs())).unwrap_or_default())]
    RateLimited { retry_after: Option<Duration> },
    #[error("bad request (HTTP {status}): {body}")]
    BadRequest { status: u16, body: String },
    #[error("no recorded fixture for request {hash} [{prompt_digest}]")]
    ReplayMiss { hash: String, prompt_digest: String },
    #[error("scripted backend has no responses left")]
    ScriptExhausted,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("malformed completion response: {0}")]
    Decode(String),
    #[error("fixture store: {0}")]
    Fixture(String),
}

impl GatewayError {
    /// Transport failures and rate limits are worth retrying; everything else
    /// will fail the same way again.
    pub fn is_retryable(&self) -> bool {
        matches!(self, GatewayError::Transport(_) | GatewayError::RateLimited { .. })
    }
}

/// Something that turns a chat request into a completion.
pub trait Backend: Send + Sync {
    fn name(&self) -> &str;

    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, GatewayError>;
}

impl fmt::Debug for dyn Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Backend({})", self.name())
    }
}

/// Validates `req` and forwards it to `backend`.
pub fn complete(backend: &dyn Backend, req: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
    req.validate()?;
    backend.complete(req)
}
