//! Extraction strategies. Each one turns an [`Encounter`] into cleaned
//! orders by talking to a [`Backend`]; they differ only in how they prompt.
//!
//! | name      | calls per encounter        |
//! |-----------|----------------------------|
//! | `oneshot` | 1                          |
//! | `react`   | 1 ..= `max_iterations`     |
//! | `agentic` | 4                          |
//!
//! Strategies are looked up by name in a [`StrategyRegistry`].

mod agentic;
mod oneshot;
mod parse;
pub mod prompts;
mod react;
mod validate;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::gateway::{complete_with_retry, Backend, ChatMessage, CompletionRequest, RetryFailure, RetryPolicy};
use crate::orders::{postprocess_orders, MedicalOrder, PostprocessConfig, RepairLog};
use crate::transcript::Encounter;

pub use agentic::{extract_agentic, Agentic};
pub use oneshot::{extract_oneshot, OneShot};
pub use parse::{parse_orders_response, NoParsableOutput, ParsedResponse, RejectedElement};
pub use prompts::{build_oneshot_messages, PromptCatalog};
pub use react::{build_react_messages, extract_react, React};
pub use validate::{is_compound, validate_candidates, ReactConfig, Violation, ViolationKind};

/// Where a candidate order came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Stage {
    #[serde(rename = "ONESHOT")]
    OneShot,
    ReactAction,
    Identifier,
    Mapper,
    Structurer,
    Validator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    #[serde(rename = "oneshot")]
    OneShot,
    React,
    Agentic,
}

impl StrategyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::OneShot => "oneshot",
            StrategyKind::React => "react",
            StrategyKind::Agentic => "agentic",
        }
    }
}

/// A schema-valid order as proposed by the model, before post-processing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateOrder {
    pub order: MedicalOrder,
    pub raw: Value,
    pub source_stage: Stage,
}

/// One backend call made while extracting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CallRecord {
    pub stage: Stage,
    pub attempts: u32,
    pub response: String,
}

/// Problems found while reading one response.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParseNote {
    /// Index into [`Diagnostics::calls`].
    pub call: usize,
    pub no_parsable_output: bool,
    pub rejected: Vec<RejectedElement>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub calls: Vec<CallRecord>,
    pub parse_notes: Vec<ParseNote>,
    /// ReAct only: violations found after each iteration.
    pub violations: Vec<Vec<Violation>>,
    pub iterations: usize,
    /// ReAct only: the loop ended with violations still present.
    pub exhausted: bool,
    /// Agentic only: the Validator output was unusable and the Structurer
    /// output was parsed instead.
    pub fallback: bool,
    pub repair_log: RepairLog,
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Run-independent digest of [`Diagnostics`] written next to predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub calls: usize,
    pub iterations: usize,
    pub violations: usize,
    pub rejected_elements: usize,
    pub unparsable_responses: usize,
    pub repairs: usize,
    pub exhausted: bool,
    pub fallback: bool,
}

impl Diagnostics {
    pub fn summary(&self) -> DiagnosticsSummary {
        DiagnosticsSummary {
            calls: self.calls.len(),
            iterations: self.iterations,
            violations: self.violations.iter().map(Vec::len).sum(),
            rejected_elements: self.parse_notes.iter().map(|n| n.rejected.len()).sum(),
            unparsable_responses: self.parse_notes.iter().filter(|n| n.no_parsable_output).count(),
            repairs: self.repair_log.len(),
            exhausted: self.exhausted,
            fallback: self.fallback,
        }
    }

    fn note_parse(&mut self, call: usize, parsed: &Result<ParsedResponse, NoParsableOutput>) {
        let note = match parsed {
            Ok(p) if p.rejected.is_empty() => return,
            Ok(p) => ParseNote {
                call,
                no_parsable_output: false,
                rejected: p.rejected.clone(),
            },
            Err(NoParsableOutput) => ParseNote {
                call,
                no_parsable_output: true,
                rejected: Vec::new(),
            },
        };
        self.parse_notes.push(note);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractionResult {
    pub encounter_id: String,
    pub strategy: StrategyKind,
    pub orders: Vec<MedicalOrder>,
    pub diagnostics: Diagnostics,
}

/// Request parameters shared by every call a strategy makes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmSettings {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub seed: Option<u64>,
    pub retry: RetryPolicy,
}

impl Default for LlmSettings {
    fn default() -> Self {
        Self {
            model: "google/medgemma-4b-it".into(),
            temperature: 0.0,
            max_tokens: 2048,
            seed: None,
            retry: RetryPolicy::default(),
        }
    }
}

impl LlmSettings {
    fn request(&self, messages: Vec<ChatMessage>) -> CompletionRequest {
        CompletionRequest {
            model: self.model.clone(),
            messages,
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            seed: self.seed,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StrategyError {
    #[error("{stage:?} call failed: {source}")]
    Backend {
        stage: Stage,
        #[source]
        source: RetryFailure,
    },
    #[error("unknown strategy `{name}` (available: {available})")]
    UnknownStrategy { name: String, available: String },
}

/// Common interface of the extraction strategies.
pub trait ExtractionStrategy: Send + Sync {
    fn kind(&self) -> StrategyKind;

    fn extract(&self, encounter: &Encounter, backend: &dyn Backend) -> Result<ExtractionResult, StrategyError>;
}

/// Tracks calls and timing for one extraction.
struct Session<'a> {
    backend: &'a dyn Backend,
    llm: &'a LlmSettings,
    diagnostics: Diagnostics,
    started: Instant,
}

impl<'a> Session<'a> {
    fn new(backend: &'a dyn Backend, llm: &'a LlmSettings) -> Self {
        Self {
            backend,
            llm,
            diagnostics: Diagnostics::default(),
            started: Instant::now(),
        }
    }

    /// Sends one request; returns the call index and response text.
    fn call(&mut self, stage: Stage, messages: Vec<ChatMessage>) -> Result<(usize, String), StrategyError> {
        let req = self.llm.request(messages);
        let out = complete_with_retry(self.backend, &req, &self.llm.retry)
            .map_err(|source| StrategyError::Backend { stage, source })?;
        let text = out.value.text;
        self.diagnostics.calls.push(CallRecord {
            stage,
            attempts: out.attempts,
            response: text.clone(),
        });
        Ok((self.diagnostics.calls.len() - 1, text))
    }

    fn finish(
        mut self,
        encounter: &Encounter,
        strategy: StrategyKind,
        candidates: Vec<CandidateOrder>,
        cfg: &PostprocessConfig,
    ) -> ExtractionResult {
        let raw: Vec<MedicalOrder> = candidates.into_iter().map(|c| c.order).collect();
        let (orders, log) = postprocess_orders(&raw, &encounter.transcript, cfg);
        self.diagnostics.repair_log = log;
        self.diagnostics.wall_time = self.started.elapsed();
        ExtractionResult {
            encounter_id: encounter.id.clone(),
            strategy,
            orders,
            diagnostics: self.diagnostics,
        }
    }
}

/// Everything a strategy factory may need.
#[derive(Debug, Clone, Default)]
pub struct StrategySettings {
    pub llm: LlmSettings,
    pub postprocess: PostprocessConfig,
    pub react: ReactConfig,
    pub catalog: Arc<PromptCatalog>,
}

pub type StrategyFactory = Box<dyn Fn(&StrategySettings) -> Box<dyn ExtractionStrategy> + Send + Sync>;

/// Strategy constructors addressable by name.
pub struct StrategyRegistry {
    factories: BTreeMap<String, StrategyFactory>,
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    /// `oneshot`, `react` and `agentic`.
    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register("oneshot", |s| {
            Box::new(OneShot::new(s.llm.clone(), s.postprocess, Arc::clone(&s.catalog)))
        });
        reg.register("react", |s| {
            let mut cfg = s.react;
            cfg.postprocess = s.postprocess;
            Box::new(React::new(s.llm.clone(), cfg, Arc::clone(&s.catalog)))
        });
        reg.register("agentic", |s| {
            Box::new(Agentic::new(s.llm.clone(), s.postprocess, Arc::clone(&s.catalog)))
        });
        reg
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&StrategySettings) -> Box<dyn ExtractionStrategy> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_owned(), Box::new(factory));
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn build(&self, name: &str, settings: &StrategySettings) -> Result<Box<dyn ExtractionStrategy>, StrategyError> {
        self.factories
            .get(name)
            .map(|f| f(settings))
            .ok_or_else(|| StrategyError::UnknownStrategy {
                name: name.to_owned(),
                available: self.names().join(", "),
            })
    }
}

/// The JSON answer shown in the one-shot worked example.
pub fn oneshot_example_output() -> &'static str {
    let user = include_str!("../../prompts/oneshot/user.txt");
    let start = user
        .find("EXPECTED OUTPUT:\n")
        .map_or(0, |i| i + "EXPECTED OUTPUT:\n".len());
    let end = user.find("\n\nNOW EXTRACT").unwrap_or(user.len());
    &user[start..end]
}
