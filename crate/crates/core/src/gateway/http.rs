use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::{Backend, CompletionRequest, CompletionResponse, FinishReason, GatewayError, TokenUsage};

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "ORDERPIPE_API_KEY";

/// Client for an OpenAI-compatible `POST {base_url}/chat/completions` endpoint.
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: Option<String>,
}

impl HttpBackend {
    /// Reads the API key from [`API_KEY_ENV`] if set.
    pub fn new(base_url: &str, timeout: Duration) -> Result<Self, GatewayError> {
        Self::with_key(base_url, timeout, std::env::var(API_KEY_ENV).ok())
    }

    pub fn with_key(base_url: &str, timeout: Duration, api_key: Option<String>) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        Ok(Self {
            client,
            endpoint: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key: api_key.filter(|k| !k.is_empty()),
        })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub(crate) fn request_body(req: &CompletionRequest) -> Value {
        let mut body = json!({
            "model": req.model,
            "messages": req.messages,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        if let Some(seed) = req.seed {
            body["seed"] = json!(seed);
        }
        body
    }

    pub(crate) fn parse_body(body: &Value, latency: Duration) -> Result<CompletionResponse, GatewayError> {
        let choice = body
            .get("choices")
            .and_then(|c| c.get(0))
            .ok_or_else(|| GatewayError::Decode("response has no choices".into()))?;
        let text = choice
            .pointer("/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| GatewayError::Decode("choice has no message content".into()))?;
        let token_usage = body.get("usage").map(|u| TokenUsage {
            prompt: u.get("prompt_tokens").and_then(Value::as_u64).unwrap_or(0),
            completion: u.get("completion_tokens").and_then(Value::as_u64).unwrap_or(0),
        });
        Ok(CompletionResponse {
            text: text.to_owned(),
            finish_reason: FinishReason::from_api(choice.get("finish_reason").and_then(Value::as_str)),
            latency,
            token_usage,
        })
    }
}

impl Backend for HttpBackend {
    fn name(&self) -> &str {
        "http"
    }

    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        let started = Instant::now();
        let mut call = self.client.post(&self.endpoint).json(&Self::request_body(req));
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let resp = call.send().map_err(|e| GatewayError::Transport(e.to_string()))?;
        let status = resp.status();
        let retry_after = resp
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let text = resp.text().map_err(|e| GatewayError::Transport(e.to_string()))?;

        if status.as_u16() == 429 {
            return Err(GatewayError::RateLimited { retry_after });
        }
        if status.is_server_error() {
            return Err(GatewayError::Transport(format!("HTTP {}: {}", status.as_u16(), text)));
        }
        if !status.is_success() {
            return Err(GatewayError::BadRequest {
                status: status.as_u16(),
                body: text,
            });
        }
        let body: Value = serde_json::from_str(&text).map_err(|e| GatewayError::Decode(e.to_string()))?;
        Self::parse_body(&body, started.elapsed())
    }
}
