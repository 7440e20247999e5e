//! Medical order data model, schema validation and deterministic post-processing.

mod postprocess;
mod schema;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use postprocess::{
    dedup_key, postprocess_orders, ConfigError, PostprocessConfig, ProvenanceDrop, Repair, RepairLog,
};
pub use schema::{validate_order_schema, SchemaViolation};

/// Order category. Variant order is the tie-break order used when sorting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderType {
    Medication,
    Lab,
    Imaging,
    Followup,
}

impl OrderType {
    pub const ALL: [OrderType; 4] = [
        OrderType::Medication,
        OrderType::Lab,
        OrderType::Imaging,
        OrderType::Followup,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OrderType::Medication => "medication",
            OrderType::Lab => "lab",
            OrderType::Imaging => "imaging",
            OrderType::Followup => "followup",
        }
    }
}

impl fmt::Display for OrderType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Maps a free-form label onto an [`OrderType`].
///
/// Case, whitespace and punctuation are ignored, so `"Follow-up"`, `"follow up"`
/// and `"FOLLOWUP"` all resolve the same way. `None` means the label is unknown.
pub fn normalize_order_type(label: &str) -> Option<OrderType> {
    let folded: String = label
        .chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect();
    match folded.as_str() {
        "medication" | "med" | "prescription" => Some(OrderType::Medication),
        "lab" | "laboratory" | "labtest" => Some(OrderType::Lab),
        "imaging" | "radiology" => Some(OrderType::Imaging),
        "followup" | "referral" => Some(OrderType::Followup),
        _ => None,
    }
}

/// One extracted or annotated order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MedicalOrder {
    pub order_type: OrderType,
    pub description: String,
    pub reason: String,
    pub provenance: Vec<u32>,
}

impl MedicalOrder {
    pub fn new(
        order_type: OrderType,
        description: impl Into<String>,
        reason: impl Into<String>,
        provenance: impl Into<Vec<u32>>,
    ) -> Self {
        Self {
            order_type,
            description: description.into(),
            reason: reason.into(),
            provenance: provenance.into(),
        }
    }
}

/// Number of words in `s`, where a word is a maximal run of non-whitespace.
pub fn word_count(s: &str) -> usize {
    s.split_whitespace().count()
}

/// Keeps the first `n` words of `s`, rejoined with single spaces.
///
/// Shorter strings only have their whitespace normalized.
pub fn truncate_words(s: &str, n: usize) -> String {
    s.split_whitespace().take(n).collect::<Vec<_>>().join(" ")
}
