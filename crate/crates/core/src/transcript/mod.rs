//! Encounter transcripts: speaker-tagged turns, rendering, and dataset loading.

mod dataset;
mod record;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::orders::MedicalOrder;

pub use dataset::{
    load_dataset, load_dataset_with, DatasetError, DatasetStats, LoadMode, LoadReport, RecordIssue, Split,
};
pub use record::{encounter_to_record, parse_encounter, FieldMap, RecordError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Speaker {
    Doctor,
    Patient,
    Other,
}

impl Speaker {
    /// Case-insensitive prefix match: `doctor`/`dr`/`physician` map to
    /// [`Speaker::Doctor`], `patient`/`pt` to [`Speaker::Patient`], anything
    /// else to [`Speaker::Other`]. Leading punctuation such as `[` is skipped.
    pub fn normalize(label: &str) -> Speaker {
        let label = label.trim_start_matches(|c: char| !c.is_alphanumeric()).to_lowercase();
        if ["doctor", "dr", "physician"].iter().any(|p| label.starts_with(p)) {
            Speaker::Doctor
        } else if ["patient", "pt"].iter().any(|p| label.starts_with(p)) {
            Speaker::Patient
        } else {
            Speaker::Other
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Speaker::Doctor => "DOCTOR",
            Speaker::Patient => "PATIENT",
            Speaker::Other => "OTHER",
        }
    }
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub index: u32,
    pub speaker: Speaker,
    pub text: String,
}

impl Turn {
    pub fn new(index: u32, speaker: Speaker, text: impl Into<String>) -> Self {
        Self {
            index,
            speaker,
            text: text.into(),
        }
    }
}

/// How turn indices were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnIdMode {
    /// Indices came from the source record.
    #[default]
    Preserved,
    /// The source had none; 0-based positions were assigned.
    Sequential,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("turn index {index} at position {position} does not increase on the previous turn")]
pub struct TurnOrderError {
    pub position: usize,
    pub index: u32,
}

/// An ordered list of turns with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Transcript {
    turns: Vec<Turn>,
    id_mode: TurnIdMode,
}

impl Transcript {
    /// Builds a transcript whose indices come from the source.
    pub fn new(turns: Vec<Turn>) -> Result<Self, TurnOrderError> {
        if let Some(pos) = turns.windows(2).position(|w| w[0].index >= w[1].index) {
            return Err(TurnOrderError {
                position: pos + 1,
                index: turns[pos + 1].index,
            });
        }
        Ok(Self {
            turns,
            id_mode: TurnIdMode::Preserved,
        })
    }

    /// Builds a transcript from unindexed `(speaker, text)` pairs, numbering
    /// them from 0.
    pub fn sequential<I, S>(turns: I) -> Self
    where
        I: IntoIterator<Item = (Speaker, S)>,
        S: Into<String>,
    {
        let turns = turns
            .into_iter()
            .enumerate()
            .map(|(i, (speaker, text))| Turn::new(i as u32, speaker, text))
            .collect();
        Self {
            turns,
            id_mode: TurnIdMode::Sequential,
        }
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    pub fn id_mode(&self) -> TurnIdMode {
        self.id_mode
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    pub fn turn(&self, index: u32) -> Option<&Turn> {
        self.turns
            .binary_search_by_key(&index, |t| t.index)
            .ok()
            .map(|pos| &self.turns[pos])
    }

    pub fn speaker_of(&self, index: u32) -> Option<Speaker> {
        self.turn(index).map(|t| t.speaker)
    }

    pub fn indices(&self) -> BTreeSet<u32> {
        self.turns.iter().map(|t| t.index).collect()
    }

    pub fn turns_by(&self, speaker: Speaker) -> BTreeSet<u32> {
        self.turns
            .iter()
            .filter(|t| t.speaker == speaker)
            .map(|t| t.index)
            .collect()
    }
}

/// Indices of the turns spoken by the doctor.
pub fn doctor_turns(t: &Transcript) -> BTreeSet<u32> {
    t.turns_by(Speaker::Doctor)
}

/// Renders one `Turn {index} - {SPEAKER}: {text}` line per turn, newline
/// separated with no trailing newline. This is the exact form embedded in
/// prompts.
pub fn render_transcript(t: &Transcript) -> String {
    t.turns
        .iter()
        .map(|turn| format!("Turn {} - {}: {}", turn.index, turn.speaker, turn.text))
        .collect::<Vec<_>>()
        .join("\n")
}

/// One dialogue plus its optional gold annotation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Encounter {
    pub id: String,
    pub transcript: Transcript,
    pub gold_orders: Option<Vec<MedicalOrder>>,
}
