use std::sync::Arc;

use super::prompts::{
    fill, AGENTIC_IDENTIFIER, AGENTIC_MAPPER, AGENTIC_STRUCTURER, AGENTIC_VALIDATOR, AGENTIC_VALIDATOR_INPUT,
};
use super::{
    parse_orders_response, ExtractionResult, ExtractionStrategy, LlmSettings, PromptCatalog, Session, Stage,
    StrategyError, StrategyKind,
};
use crate::gateway::{Backend, ChatMessage};
use crate::orders::PostprocessConfig;
use crate::transcript::{render_transcript, Encounter};

/// Sent in place of an empty upstream answer so no stage sees a blank prompt.
const EMPTY_INPUT: &str = "(no output)";

/// Identifier, Mapper, Structurer and Validator run in sequence, each fed
/// the previous stage's text.
pub struct Agentic {
    llm: LlmSettings,
    postprocess: PostprocessConfig,
    catalog: Arc<PromptCatalog>,
}

impl Agentic {
    pub fn new(llm: LlmSettings, postprocess: PostprocessConfig, catalog: Arc<PromptCatalog>) -> Self {
        Self {
            llm,
            postprocess,
            catalog,
        }
    }
}

impl ExtractionStrategy for Agentic {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Agentic
    }

    fn extract(&self, encounter: &Encounter, backend: &dyn Backend) -> Result<ExtractionResult, StrategyError> {
        extract_agentic(encounter, backend, &self.llm, &self.postprocess, &self.catalog)
    }
}

fn or_placeholder(text: &str) -> &str {
    if text.trim().is_empty() {
        EMPTY_INPUT
    } else {
        text
    }
}

pub fn extract_agentic(
    encounter: &Encounter,
    backend: &dyn Backend,
    llm: &LlmSettings,
    postprocess: &PostprocessConfig,
    catalog: &PromptCatalog,
) -> Result<ExtractionResult, StrategyError> {
    let mut session = Session::new(backend, llm);
    let conversation = render_transcript(&encounter.transcript);
    let stage = |key: &str, input: &str| {
        vec![
            ChatMessage::system(catalog.get(key)),
            ChatMessage::user(or_placeholder(input)),
        ]
    };

    let (_, identified) = session.call(Stage::Identifier, stage(AGENTIC_IDENTIFIER, &conversation))?;
    let (_, mapped) = session.call(Stage::Mapper, stage(AGENTIC_MAPPER, &identified))?;
    let (structurer_call, structured) = session.call(Stage::Structurer, stage(AGENTIC_STRUCTURER, &mapped))?;
    let validator_input = fill(
        catalog.get(AGENTIC_VALIDATOR_INPUT),
        &[
            ("structured", or_placeholder(&structured)),
            ("conversation", &conversation),
        ],
    );
    let (validator_call, validated) = session.call(Stage::Validator, stage(AGENTIC_VALIDATOR, &validator_input))?;
    session.diagnostics.iterations = 1;

    let mut parsed = parse_orders_response(&validated, Stage::Validator);
    session.diagnostics.note_parse(validator_call, &parsed);
    if parsed.is_err() {
        session.diagnostics.fallback = true;
        parsed = parse_orders_response(&structured, Stage::Structurer);
        session.diagnostics.note_parse(structurer_call, &parsed);
    }
    let candidates = parsed.map(|p| p.candidates).unwrap_or_default();
    Ok(session.finish(encounter, StrategyKind::Agentic, candidates, postprocess))
}
