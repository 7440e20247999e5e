use std::fmt;

use serde_json::Value;

use super::{normalize_order_type, MedicalOrder};

/// One reason a structured value could not be read as a [`MedicalOrder`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SchemaViolation {
    MissingField(&'static str),
    BadType {
        field: &'static str,
        expected: &'static str,
    },
    UnknownOrderType(String),
    EmptyProvenance,
}

impl fmt::Display for SchemaViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemaViolation::MissingField(field) => write!(f, "missing field `{field}`"),
            SchemaViolation::BadType { field, expected } => {
                write!(f, "field `{field}` must be {expected}")
            }
            SchemaViolation::UnknownOrderType(label) => write!(
                f,
                "unknown order type {label:?} (expected medication, lab, imaging or followup)"
            ),
            SchemaViolation::EmptyProvenance => f.write_str("provenance must list at least one turn"),
        }
    }
}

const TYPE_KEYS: [&str; 3] = ["order_type", "order type", "type"];

/// Reads one order from an arbitrary JSON value.
///
/// Both `order_type` and `order type` keys are accepted. Provenance entries
/// may be integers, integral floats or numeric strings (optionally prefixed by
/// `turn`); a bare scalar is treated as a one-element list. A missing or null
/// reason becomes the empty string.
pub fn validate_order_schema(raw: &Value) -> Result<MedicalOrder, Vec<SchemaViolation>> {
    let Some(obj) = raw.as_object() else {
        return Err(vec![SchemaViolation::BadType {
            field: "order",
            expected: "an object",
        }]);
    };
    let mut violations = Vec::new();

    let type_value = TYPE_KEYS.iter().find_map(|k| obj.get(*k)).filter(|v| !v.is_null());
    let order_type = match type_value {
        None => {
            violations.push(SchemaViolation::MissingField("order_type"));
            None
        }
        Some(Value::String(label)) => match normalize_order_type(label) {
            Some(t) => Some(t),
            None => {
                violations.push(SchemaViolation::UnknownOrderType(label.clone()));
                None
            }
        },
        Some(_) => {
            violations.push(SchemaViolation::BadType {
                field: "order_type",
                expected: "a string",
            });
            None
        }
    };

    let description = match obj.get("description") {
        None | Some(Value::Null) => {
            violations.push(SchemaViolation::MissingField("description"));
            None
        }
        Some(Value::String(s)) if s.trim().is_empty() => {
            violations.push(SchemaViolation::MissingField("description"));
            None
        }
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => {
            violations.push(SchemaViolation::BadType {
                field: "description",
                expected: "a string",
            });
            None
        }
    };

    let reason = match obj.get("reason") {
        None | Some(Value::Null) => Some(String::new()),
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => {
            violations.push(SchemaViolation::BadType {
                field: "reason",
                expected: "a string",
            });
            None
        }
    };

    let provenance = match obj.get("provenance") {
        None | Some(Value::Null) => {
            violations.push(SchemaViolation::EmptyProvenance);
            None
        }
        Some(Value::Array(items)) => {
            let parsed: Option<Vec<u32>> = items.iter().map(coerce_turn).collect();
            match parsed {
                None => {
                    violations.push(SchemaViolation::BadType {
                        field: "provenance",
                        expected: "a list of non-negative turn numbers",
                    });
                    None
                }
                Some(p) if p.is_empty() => {
                    violations.push(SchemaViolation::EmptyProvenance);
                    None
                }
                Some(p) => Some(p),
            }
        }
        Some(scalar) => match coerce_turn(scalar) {
            Some(i) => Some(vec![i]),
            None => {
                violations.push(SchemaViolation::BadType {
                    field: "provenance",
                    expected: "a list of non-negative turn numbers",
                });
                None
            }
        },
    };

    match (order_type, description, reason, provenance) {
        (Some(order_type), Some(description), Some(reason), Some(provenance)) if violations.is_empty() => {
            Ok(MedicalOrder {
                order_type,
                description,
                reason,
                provenance,
            })
        }
        _ => Err(violations),
    }
}

fn coerce_turn(v: &Value) -> Option<u32> {
    match v {
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                u32::try_from(u).ok()
            } else {
                let f = n.as_f64()?;
                (f >= 0.0 && f.fract() == 0.0 && f <= u32::MAX as f64).then_some(f as u32)
            }
        }
        Value::String(s) => {
            let s = s.trim();
            let digits = s
                .get(..4)
                .filter(|p| p.eq_ignore_ascii_case("turn"))
                .map_or(s, |_| s[4..].trim());
            digits.parse().ok()
        }
        _ => None,
    }
}
