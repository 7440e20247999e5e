use std::collections::BTreeSet;
use std::sync::Arc;

use super::prompts::{fill, REACT_OBSERVATION, REACT_SYSTEM, REACT_USER};
use super::{
    parse_orders_response, validate_candidates, CandidateOrder, ExtractionResult, ExtractionStrategy, LlmSettings,
    NoParsableOutput, ParsedResponse, PromptCatalog, ReactConfig, Session, Stage, StrategyError, StrategyKind,
    Violation, ViolationKind,
};
use crate::gateway::{Backend, ChatMessage};
use crate::transcript::{doctor_turns, render_transcript, Encounter};

/// Thought/Action/Observation loop: each Action is checked and the problems
/// are fed back until the answer is clean or the iteration budget runs out.
pub struct React {
    llm: LlmSettings,
    cfg: ReactConfig,
    catalog: Arc<PromptCatalog>,
}

impl React {
    pub fn new(llm: LlmSettings, cfg: ReactConfig, catalog: Arc<PromptCatalog>) -> Self {
        Self { llm, cfg, catalog }
    }
}

impl ExtractionStrategy for React {
    fn kind(&self) -> StrategyKind {
        StrategyKind::React
    }

    fn extract(&self, encounter: &Encounter, backend: &dyn Backend) -> Result<ExtractionResult, StrategyError> {
        extract_react(encounter, backend, &self.llm, &self.cfg, &self.catalog)
    }
}

/// Messages for the first iteration.
pub fn build_react_messages(e: &Encounter, cfg: &ReactConfig, catalog: &PromptCatalog) -> Vec<ChatMessage> {
    let caps = &cfg.postprocess;
    let system = fill(
        catalog.get(REACT_SYSTEM),
        &[
            ("max_words", &caps.max_words.to_string()),
            ("max_orders", &caps.max_orders.to_string()),
            ("max_provenance", &caps.max_provenance.to_string()),
        ],
    );
    let doctors = join_turns(&doctor_turns(&e.transcript));
    let user = fill(
        catalog.get(REACT_USER),
        &[
            ("conversation", &render_transcript(&e.transcript)),
            ("doctor_turns", &doctors),
        ],
    );
    vec![ChatMessage::system(system), ChatMessage::user(user)]
}

fn join_turns(turns: &BTreeSet<u32>) -> String {
    if turns.is_empty() {
        return "none".into();
    }
    turns.iter().map(u32::to_string).collect::<Vec<_>>().join(", ")
}

fn observation(violations: &[Violation], catalog: &PromptCatalog) -> String {
    let lines: Vec<String> = violations
        .iter()
        .map(|v| {
            let kind = serde_json::to_value(v.kind)
                .ok()
                .and_then(|k| k.as_str().map(str::to_owned))
                .unwrap_or_default();
            format!("- {kind}: {}", v.message)
        })
        .collect();
    fill(catalog.get(REACT_OBSERVATION), &[("violations", &lines.join("\n"))])
}

/// The JSON is read from after the last `Action:` marker, or from the whole
/// reply when the model skipped the marker.
fn action_section(text: &str) -> &str {
    text.rfind("Action:").map_or(text, |i| &text[i + "Action:".len()..])
}

fn schema_violations(parsed: &Result<ParsedResponse, NoParsableOutput>) -> Vec<Violation> {
    match parsed {
        Err(NoParsableOutput) => vec![Violation {
            kind: ViolationKind::BadSchema,
            candidate: None,
            message:
                "No JSON array was found after \"Action:\". Answer with a Thought and an Action holding a JSON array."
                    .into(),
        }],
        Ok(p) => p
            .rejected
            .iter()
            .map(|r| Violation {
                kind: ViolationKind::BadSchema,
                candidate: None,
                message: format!(
                    "Element {} of the Action array is invalid: {}.",
                    r.index + 1,
                    r.problems.join("; ")
                ),
            })
            .collect(),
    }
}

pub fn extract_react(
    encounter: &Encounter,
    backend: &dyn Backend,
    llm: &LlmSettings,
    cfg: &ReactConfig,
    catalog: &PromptCatalog,
) -> Result<ExtractionResult, StrategyError> {
    let max_iterations = cfg.max_iterations.max(1);
    let mut session = Session::new(backend, llm);
    let mut messages = build_react_messages(encounter, cfg, catalog);
    let mut candidates: Vec<CandidateOrder> = Vec::new();
    let mut violations: Vec<Violation> = Vec::new();

    for iteration in 1..=max_iterations {
        if iteration > 1 {
            let obs = observation(&violations, catalog);
            if cfg.include_prior_output {
                messages.push(ChatMessage::user(obs));
            } else {
                // single user turn: original request followed by the feedback
                let user = messages.last_mut().expect("user message present");
                user.content = format!("{}\n\n{obs}", user.content);
            }
        }
        let (call, text) = session.call(Stage::ReactAction, messages.clone())?;
        let parsed = parse_orders_response(action_section(&text), Stage::ReactAction);
        session.diagnostics.note_parse(call, &parsed);

        violations = schema_violations(&parsed);
        candidates = parsed.map(|p| p.candidates).unwrap_or_default();
        violations.extend(validate_candidates(&candidates, &encounter.transcript, cfg));
        session.diagnostics.violations.push(violations.clone());
        session.diagnostics.iterations = iteration;

        if violations.is_empty() {
            break;
        }
        if iteration < max_iterations {
            if cfg.include_prior_output {
                messages.push(ChatMessage::assistant(text));
            } else {
                messages.truncate(2);
                messages[1] = build_react_messages(encounter, cfg, catalog).swap_remove(1);
            }
        }
    }

    if !violations.is_empty() {
        session.diagnostics.exhausted = true;
        let flagged: BTreeSet<usize> = violations.iter().filter_map(|v| v.candidate).collect();
        candidates = candidates
            .into_iter()
            .enumerate()
            .filter(|(i, _)| !flagged.contains(i))
            .map(|(_, c)| c)
            .collect();
    }
    Ok(session.finish(encounter, StrategyKind::React, candidates, &cfg.postprocess))
}
