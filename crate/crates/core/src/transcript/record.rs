use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{Encounter, Speaker, Transcript, Turn, TurnIdMode};
use crate::orders::{validate_order_schema, MedicalOrder};

/// Field names used by the on-disk encounter records.
///
/// Datasets with different key names are read by supplying a remapped
/// `FieldMap` (for example from a small JSON file) instead of changing code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldMap {
    pub id: String,
    pub transcript: String,
    pub turn_id: String,
    pub speaker: String,
    pub text: String,
    pub orders: String,
}

impl Default for FieldMap {
    fn default() -> Self {
        Self {
            id: "id".into(),
            transcript: "transcript".into(),
            turn_id: "turn_id".into(),
            speaker: "speaker".into(),
            text: "text".into(),
            orders: "expected_orders".into(),
        }
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum RecordError {
    #[error("malformed record{}: {reason}", id_suffix(.id))]
    MalformedRecord { id: Option<String>, reason: String },
    #[error("encounter {encounter}: gold order {order} cites turn {turn}, which is not in the transcript")]
    BadProvenance { encounter: String, order: usize, turn: u32 },
}

fn id_suffix(id: &Option<String>) -> String {
    id.as_ref().map(|id| format!(" {id}")).unwrap_or_default()
}

impl RecordError {
    fn malformed(id: Option<&str>, reason: impl Into<String>) -> Self {
        RecordError::MalformedRecord {
            id: id.map(str::to_owned),
            reason: reason.into(),
        }
    }
}

/// Parses one encounter record.
///
/// The transcript may be an array of turn objects or a single string with one
/// `[speaker] text` or `speaker: text` line per turn. Turn indices are kept
/// when every turn carries one and assigned from 0 when none does.
pub fn parse_encounter(doc: &Value, fields: &FieldMap) -> Result<Encounter, RecordError> {
    let obj = doc
        .as_object()
        .ok_or_else(|| RecordError::malformed(None, "record is not an object"))?;

    let id = match obj.get(&fields.id) {
        Some(Value::String(s)) if !s.trim().is_empty() => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => return Err(RecordError::malformed(None, format!("missing `{}`", fields.id))),
    };

    let transcript = match obj.get(&fields.transcript) {
        Some(Value::Array(turns)) => parse_turns(&id, turns, fields)?,
        Some(Value::String(text)) => parse_flat_transcript(text),
        _ => {
            return Err(RecordError::malformed(
                Some(&id),
                format!("missing `{}`", fields.transcript),
            ))
        }
    };

    let gold_orders = match obj.get(&fields.orders) {
        None | Some(Value::Null) => None,
        Some(Value::Array(items)) => {
            let mut orders = Vec::with_capacity(items.len());
            for (i, item) in items.iter().enumerate() {
                let order = validate_order_schema(item).map_err(|violations| {
                    let detail: Vec<String> = violations.iter().map(ToString::to_string).collect();
                    RecordError::malformed(Some(&id), format!("gold order {i}: {}", detail.join("; ")))
                })?;
                if let Some(&turn) = order.provenance.iter().find(|&&turn| transcript.turn(turn).is_none()) {
                    return Err(RecordError::BadProvenance {
                        encounter: id,
                        order: i,
                        turn,
                    });
                }
                orders.push(order);
            }
            Some(orders)
        }
        Some(_) => {
            return Err(RecordError::malformed(
                Some(&id),
                format!("`{}` must be an array", fields.orders),
            ))
        }
    };

    Ok(Encounter {
        id,
        transcript,
        gold_orders,
    })
}

fn parse_turns(id: &str, turns: &[Value], fields: &FieldMap) -> Result<Transcript, RecordError> {
    let mut parsed = Vec::with_capacity(turns.len());
    for (pos, turn) in turns.iter().enumerate() {
        let obj = turn
            .as_object()
            .ok_or_else(|| RecordError::malformed(Some(id), format!("turn {pos} is not an object")))?;
        let index = match obj.get(&fields.turn_id) {
            None | Some(Value::Null) => None,
            Some(v) => Some(v.as_u64().and_then(|n| u32::try_from(n).ok()).ok_or_else(|| {
                RecordError::malformed(
                    Some(id),
                    format!("turn {pos}: `{}` must be a non-negative integer", fields.turn_id),
                )
            })?),
        };
        let speaker = obj.get(&fields.speaker).and_then(Value::as_str).unwrap_or("");
        let text = match obj.get(&fields.text) {
            None | Some(Value::Null) => "",
            Some(Value::String(s)) => s.as_str(),
            Some(_) => {
                return Err(RecordError::malformed(
                    Some(id),
                    format!("turn {pos}: `{}` must be a string", fields.text),
                ))
            }
        };
        parsed.push((index, Speaker::normalize(speaker), text.to_owned()));
    }

    let with_ids = parsed.iter().filter(|(index, _, _)| index.is_some()).count();
    if with_ids == 0 {
        return Ok(Transcript::sequential(
            parsed.into_iter().map(|(_, speaker, text)| (speaker, text)),
        ));
    }
    if with_ids != parsed.len() {
        return Err(RecordError::malformed(
            Some(id),
            "some turns carry an index and others do not",
        ));
    }
    let turns = parsed
        .into_iter()
        .map(|(index, speaker, text)| Turn::new(index.unwrap_or_default(), speaker, text))
        .collect();
    Transcript::new(turns).map_err(|e| RecordError::malformed(Some(id), e.to_string()))
}

fn parse_flat_transcript(text: &str) -> Transcript {
    let turns = text.lines().map(str::trim).filter(|line| !line.is_empty()).map(|line| {
        if let Some(rest) = line.strip_prefix('[') {
            if let Some((label, body)) = rest.split_once(']') {
                return (Speaker::normalize(label), body.trim().to_owned());
            }
        }
        match line.split_once(':') {
            Some((label, body)) if label.len() <= 24 && !label.contains(' ') => {
                (Speaker::normalize(label), body.trim().to_owned())
            }
            _ => (Speaker::Other, line.to_owned()),
        }
    });
    Transcript::sequential(turns)
}

/// Serializes an encounter back into the record format read by
/// [`parse_encounter`]. Turn indices are written only when they came from the
/// source, so sequentially numbered transcripts round-trip unchanged.
pub fn encounter_to_record(e: &Encounter, fields: &FieldMap) -> Value {
    let preserve = e.transcript.id_mode() == TurnIdMode::Preserved;
    let turns: Vec<Value> = e
        .transcript
        .turns()
        .iter()
        .map(|t| {
            let mut obj = Map::new();
            if preserve {
                obj.insert(fields.turn_id.clone(), json!(t.index));
            }
            obj.insert(fields.speaker.clone(), json!(t.speaker.as_str().to_lowercase()));
            obj.insert(fields.text.clone(), json!(t.text));
            Value::Object(obj)
        })
        .collect();
    let mut obj = Map::new();
    obj.insert(fields.id.clone(), json!(e.id));
    obj.insert(fields.transcript.clone(), Value::Array(turns));
    if let Some(orders) = &e.gold_orders {
        obj.insert(fields.orders.clone(), orders_to_value(orders));
    }
    Value::Object(obj)
}

pub(crate) fn orders_to_value(orders: &[MedicalOrder]) -> Value {
    serde_json::to_value(orders).unwrap_or(Value::Null)
}
