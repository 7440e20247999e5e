use std::collections::VecDeque;
use std::sync::Mutex;

use super::{Backend, CompletionRequest, CompletionResponse, GatewayError};

#[derive(Debug, Clone, PartialEq)]
pub enum ScriptStep {
    Reply(String),
    Fail(GatewayError),
}

impl ScriptStep {
    pub fn reply(text: impl Into<String>) -> Self {
        ScriptStep::Reply(text.into())
    }
}

/// Answers requests from a fixed queue, in order, and remembers every
/// request it saw. Calls are serialized so the script order is deterministic.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    inner: Mutex<State>,
}

#[derive(Debug, Default)]
struct State {
    steps: VecDeque<ScriptStep>,
    calls: Vec<CompletionRequest>,
}

impl ScriptedBackend {
    pub fn new(steps: impl IntoIterator<Item = ScriptStep>) -> Self {
        Self {
            inner: Mutex::new(State {
                steps: steps.into_iter().collect(),
                calls: Vec::new(),
            }),
        }
    }

    /// Backend that replies with each of `texts` in turn.
    pub fn replies<I, S>(texts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(texts.into_iter().map(ScriptStep::reply))
    }

    /// Every request received so far, in arrival order.
    pub fn calls(&self) -> Vec<CompletionRequest> {
        self.lock().calls.clone()
    }

    pub fn remaining(&self) -> usize {
        self.lock().steps.len()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, State> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }
}

impl Backend for ScriptedBackend {
    fn name(&self) -> &str {
        "scripted"
    }

    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        let mut state = self.lock();
        state.calls.push(req.clone());
        match state.steps.pop_front() {
            Some(ScriptStep::Reply(text)) => Ok(CompletionResponse::text(text)),
            Some(ScriptStep::Fail(err)) => Err(err),
            None => Err(GatewayError::ScriptExhausted),
        }
    }
}
