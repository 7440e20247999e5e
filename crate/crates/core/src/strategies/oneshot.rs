use std::sync::Arc;

use super::{
    build_oneshot_messages, parse_orders_response, ExtractionResult, ExtractionStrategy, LlmSettings, PromptCatalog,
    Session, Stage, StrategyError, StrategyKind,
};
use crate::gateway::Backend;
use crate::orders::PostprocessConfig;
use crate::transcript::Encounter;

/// A single call with a worked example in the prompt.
pub struct OneShot {
    llm: LlmSettings,
    postprocess: PostprocessConfig,
    catalog: Arc<PromptCatalog>,
}

impl OneShot {
    pub fn new(llm: LlmSettings, postprocess: PostprocessConfig, catalog: Arc<PromptCatalog>) -> Self {
        Self {
            llm,
            postprocess,
            catalog,
        }
    }
}

impl ExtractionStrategy for OneShot {
    fn kind(&self) -> StrategyKind {
        StrategyKind::OneShot
    }

    fn extract(&self, encounter: &Encounter, backend: &dyn Backend) -> Result<ExtractionResult, StrategyError> {
        extract_oneshot(encounter, backend, &self.llm, &self.postprocess, &self.catalog)
    }
}

pub fn extract_oneshot(
    encounter: &Encounter,
    backend: &dyn Backend,
    llm: &LlmSettings,
    postprocess: &PostprocessConfig,
    catalog: &PromptCatalog,
) -> Result<ExtractionResult, StrategyError> {
    let mut session = Session::new(backend, llm);
    let (call, text) = session.call(Stage::OneShot, build_oneshot_messages(encounter, catalog))?;
    let parsed = parse_orders_response(&text, Stage::OneShot);
    session.diagnostics.note_parse(call, &parsed);
    session.diagnostics.iterations = 1;
    let candidates = parsed.map(|p| p.candidates).unwrap_or_default();
    Ok(session.finish(encounter, StrategyKind::OneShot, candidates, postprocess))
}
