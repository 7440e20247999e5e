use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{truncate_words, word_count, MedicalOrder, OrderType};
use crate::transcript::{Speaker, Transcript};

/// Limits applied by [`postprocess_orders`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PostprocessConfig {
    pub max_words: usize,
    pub max_orders: usize,
    pub max_provenance: usize,
    pub require_doctor_provenance: bool,
}

impl Default for PostprocessConfig {
    fn default() -> Self {
        Self {
            max_words: 20,
            max_orders: 10,
            max_provenance: 5,
            require_doctor_provenance: true,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("`{0}` must be at least 1")]
pub struct ConfigError(pub &'static str);

impl PostprocessConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_words == 0 {
            return Err(ConfigError("max_words"));
        }
        if self.max_orders == 0 {
            return Err(ConfigError("max_orders"));
        }
        if self.max_provenance == 0 {
            return Err(ConfigError("max_provenance"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProvenanceDrop {
    NotInTranscript,
    NotDoctor,
}

/// A single mutation made during post-processing. `order` is the position in
/// the list as it stood when the step ran.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "repair", rename_all = "snake_case")]
pub enum Repair {
    DroppedProvenance {
        order: usize,
        turn: u32,
        cause: ProvenanceDrop,
    },
    DroppedOrder {
        order: usize,
        description: String,
        cause: String,
    },
    Truncated {
        order: usize,
        field: String,
        words_before: usize,
    },
    NormalizedWhitespace {
        order: usize,
        field: String,
    },
    MergedDuplicate {
        kept: usize,
        dropped: usize,
    },
    DedupedProvenance {
        order: usize,
    },
    SortedProvenance {
        order: usize,
    },
    CappedProvenance {
        order: usize,
        dropped: Vec<u32>,
    },
    ReorderedOrders,
    CappedOrders {
        dropped: usize,
    },
}

pub type RepairLog = Vec<Repair>;

/// Key under which two orders count as the same clinical order.
pub fn dedup_key(order: &MedicalOrder) -> (OrderType, String) {
    let desc = order
        .description
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ");
    (order.order_type, desc)
}

/// Cleans a validated order list against its transcript.
///
/// Steps, in order:
/// 1. drop provenance turns missing from the transcript (or not spoken by the
///    doctor when `require_doctor_provenance`), then orders left without any;
/// 2. cap description and reason at `max_words`;
/// 3. merge duplicates by [`dedup_key`], keeping the first and uniting provenance;
/// 4. sort and dedupe provenance, cap it at `max_provenance`;
/// 5. sort orders by smallest provenance turn, then type, then description;
/// 6. cap the list at `max_orders`.
///
/// The function is idempotent.
pub fn postprocess_orders(
    raw: &[MedicalOrder],
    transcript: &Transcript,
    cfg: &PostprocessConfig,
) -> (Vec<MedicalOrder>, RepairLog) {
    let mut log = RepairLog::new();

    // 1. provenance validity
    let mut orders: Vec<MedicalOrder> = Vec::with_capacity(raw.len());
    for (i, order) in raw.iter().enumerate() {
        let mut order = order.clone();
        order.provenance.retain(|&turn| {
            let cause = match transcript.speaker_of(turn) {
                None => Some(ProvenanceDrop::NotInTranscript),
                Some(s) if cfg.require_doctor_provenance && s != Speaker::Doctor => Some(ProvenanceDrop::NotDoctor),
                Some(_) => None,
            };
            if let Some(cause) = cause {
                log.push(Repair::DroppedProvenance { order: i, turn, cause });
            }
            cause.is_none()
        });
        if order.provenance.is_empty() {
            log.push(Repair::DroppedOrder {
                order: i,
                description: order.description,
                cause: "no valid provenance".into(),
            });
            continue;
        }
        orders.push(order);
    }

    // 2. word caps
    let mut kept = Vec::with_capacity(orders.len());
    for (i, mut order) in orders.into_iter().enumerate() {
        cap_field(&mut order.description, "description", i, cfg.max_words, &mut log);
        cap_field(&mut order.reason, "reason", i, cfg.max_words, &mut log);
        if order.description.is_empty() {
            log.push(Repair::DroppedOrder {
                order: i,
                description: order.description,
                cause: "empty description".into(),
            });
            continue;
        }
        kept.push(order);
    }
    let orders = kept;

    // 3. duplicate merge
    let mut merged: Vec<MedicalOrder> = Vec::with_capacity(orders.len());
    let mut first_seen: HashMap<(OrderType, String), usize> = HashMap::new();
    for (i, order) in orders.into_iter().enumerate() {
        match first_seen.get(&dedup_key(&order)) {
            Some(&slot) => {
                merged[slot].provenance.extend(order.provenance);
                log.push(Repair::MergedDuplicate { kept: slot, dropped: i });
            }
            None => {
                first_seen.insert(dedup_key(&order), merged.len());
                merged.push(order);
            }
        }
    }
    let mut orders = merged;

    // 4. provenance order, uniqueness, cap
    for (i, order) in orders.iter_mut().enumerate() {
        if order.provenance.windows(2).any(|w| w[0] > w[1]) {
            log.push(Repair::SortedProvenance { order: i });
        }
        let unique: BTreeSet<u32> = order.provenance.iter().copied().collect();
        if unique.len() != order.provenance.len() {
            log.push(Repair::DedupedProvenance { order: i });
        }
        let mut prov: Vec<u32> = unique.into_iter().collect();
        if prov.len() > cfg.max_provenance {
            let dropped = prov.split_off(cfg.max_provenance);
            log.push(Repair::CappedProvenance { order: i, dropped });
        }
        order.provenance = prov;
    }

    // 5. order by provenance
    let before = orders.clone();
    orders.sort_by(|a, b| {
        a.provenance[0]
            .cmp(&b.provenance[0])
            .then(a.order_type.cmp(&b.order_type))
            .then_with(|| a.description.cmp(&b.description))
    });
    if orders != before {
        log.push(Repair::ReorderedOrders);
    }

    // 6. list cap
    if orders.len() > cfg.max_orders {
        let dropped = orders.len() - cfg.max_orders;
        orders.truncate(cfg.max_orders);
        log.push(Repair::CappedOrders { dropped });
    }

    (orders, log)
}

fn cap_field(value: &mut String, field: &str, order: usize, max_words: usize, log: &mut RepairLog) {
    let words = word_count(value);
    let capped = truncate_words(value, max_words);
    if capped != *value {
        if words > max_words {
            log.push(Repair::Truncated {
                order,
                field: field.into(),
                words_before: words,
            });
        } else {
            log.push(Repair::NormalizedWhitespace {
                order,
                field: field.into(),
            });
        }
        *value = capped;
    }
}
