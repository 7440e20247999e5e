use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::gateway::ChatMessage;
use crate::transcript::{render_transcript, Encounter};

pub const ONESHOT_SYSTEM: &str = "oneshot/system";
pub const ONESHOT_INSTRUCTION: &str = "oneshot/instruction";
pub const ONESHOT_USER: &str = "oneshot/user";
pub const REACT_SYSTEM: &str = "react/system";
pub const REACT_USER: &str = "react/user";
pub const REACT_OBSERVATION: &str = "react/observation";
pub const AGENTIC_IDENTIFIER: &str = "agentic/identifier";
pub const AGENTIC_MAPPER: &str = "agentic/mapper";
pub const AGENTIC_STRUCTURER: &str = "agentic/structurer";
pub const AGENTIC_VALIDATOR: &str = "agentic/validator";
pub const AGENTIC_VALIDATOR_INPUT: &str = "agentic/validator_input";

const BUILTIN: [(&str, &str); 11] = [
    (ONESHOT_SYSTEM, include_str!("../../prompts/oneshot/system.txt")),
    (
        ONESHOT_INSTRUCTION,
        include_str!("../../prompts/oneshot/instruction.txt"),
    ),
    (ONESHOT_USER, include_str!("../../prompts/oneshot/user.txt")),
    (REACT_SYSTEM, include_str!("../../prompts/react/system.txt")),
    (REACT_USER, include_str!("../../prompts/react/user.txt")),
    (REACT_OBSERVATION, include_str!("../../prompts/react/observation.txt")),
    (AGENTIC_IDENTIFIER, include_str!("../../prompts/agentic/identifier.txt")),
    (AGENTIC_MAPPER, include_str!("../../prompts/agentic/mapper.txt")),
    (AGENTIC_STRUCTURER, include_str!("../../prompts/agentic/structurer.txt")),
    (AGENTIC_VALIDATOR, include_str!("../../prompts/agentic/validator.txt")),
    (
        AGENTIC_VALIDATOR_INPUT,
        include_str!("../../prompts/agentic/validator_input.txt"),
    ),
];

/// Prompt text for every strategy stage, keyed `<strategy>/<stage>`.
///
/// The built-in set is compiled in from `prompts/`. A directory laid out the
/// same way (`<strategy>/<stage>.txt`) can override any subset of entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptCatalog {
    entries: BTreeMap<String, String>,
}

impl Default for PromptCatalog {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PromptCatalog {
    pub fn builtin() -> Self {
        Self {
            entries: BUILTIN
                .iter()
                .map(|(k, v)| ((*k).to_owned(), (*v).to_owned()))
                .collect(),
        }
    }

    pub fn load_dir(dir: &Path) -> std::io::Result<Self> {
        let mut catalog = Self::builtin();
        for (key, _) in BUILTIN {
            let path = dir.join(format!("{key}.txt"));
            if path.is_file() {
                catalog.entries.insert(key.to_owned(), std::fs::read_to_string(path)?);
            }
        }
        Ok(catalog)
    }

    pub fn get(&self, key: &str) -> &str {
        self.entries.get(key).map_or("", String::as_str)
    }

    pub fn set(&mut self, key: &str, text: impl Into<String>) {
        self.entries.insert(key.to_owned(), text.into());
    }

    /// Short content hash identifying this exact prompt set.
    pub fn version(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in &self.entries {
            h.update(k.as_bytes());
            h.update([0]);
            h.update(v.as_bytes());
            h.update([0]);
        }
        hex::encode(h.finalize())[..12].to_owned()
    }
}

/// Replaces each `{name}` in `template` whose name appears in `vars`.
/// Substituted text is not scanned again, and unknown placeholders (or
/// literal JSON braces) are left alone.
pub fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let hit = after.find('}').and_then(|close| {
            let name = &after[..close];
            vars.iter().find(|(k, _)| *k == name).map(|(_, v)| (close, *v))
        });
        match hit {
            Some((close, value)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// System prompt plus the worked example, followed by the instruction with
/// this encounter's transcript.
pub fn build_oneshot_messages(e: &Encounter, catalog: &PromptCatalog) -> Vec<ChatMessage> {
    let conversation = render_transcript(&e.transcript);
    let instruction = fill(catalog.get(ONESHOT_INSTRUCTION), &[("conversation", &conversation)]);
    let user = fill(catalog.get(ONESHOT_USER), &[("instruction", &instruction)]);
    vec![
        ChatMessage::system(catalog.get(ONESHOT_SYSTEM)),
        ChatMessage::user(user),
    ]
}
