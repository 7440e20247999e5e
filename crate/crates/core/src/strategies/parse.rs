//! Pulls an order array out of free-form model output.

use serde::Serialize;
use serde_json::Value;

use super::{CandidateOrder, Stage};
use crate::orders::validate_order_schema;

/// An array element that failed schema validation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectedElement {
    pub index: usize,
    pub raw: Value,
    pub problems: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParsedResponse {
    pub candidates: Vec<CandidateOrder>,
    pub rejected: Vec<RejectedElement>,
    /// A lone object was found and treated as a one-element array.
    pub wrapped_object: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("no JSON array or object found in model output")]
pub struct NoParsableOutput;

/// Finds the order list in `text` and validates each element.
///
/// Code fences are looked inside first. The first balanced top-level `[...]`
/// that parses as JSON wins; failing that, the first top-level `{...}` is
/// wrapped into a one-element list (or, when it holds a single array field
/// such as `{"orders": [...]}`, that array is used). Bracket matching ignores
/// brackets inside string literals. Elements that fail validation are
/// returned in [`ParsedResponse::rejected`].
pub fn parse_orders_response(text: &str, stage: Stage) -> Result<ParsedResponse, NoParsableOutput> {
    let (items, wrapped_object) = locate(text).ok_or(NoParsableOutput)?;
    let mut parsed = ParsedResponse {
        candidates: Vec::new(),
        rejected: Vec::new(),
        wrapped_object,
    };
    for (index, raw) in items.into_iter().enumerate() {
        match validate_order_schema(&raw) {
            Ok(order) => parsed.candidates.push(CandidateOrder {
                order,
                raw,
                source_stage: stage,
            }),
            Err(violations) => parsed.rejected.push(RejectedElement {
                index,
                raw,
                problems: violations.iter().map(ToString::to_string).collect(),
            }),
        }
    }
    Ok(parsed)
}

fn locate(text: &str) -> Option<(Vec<Value>, bool)> {
    let mut sources = fenced_blocks(text);
    sources.push(text);

    for src in &sources {
        for span in top_level_spans(src).into_iter().filter(|s| s.starts_with('[')) {
            if let Some(Value::Array(items)) = parse_lenient(span) {
                return Some((items, false));
            }
        }
    }
    for src in &sources {
        for span in top_level_spans(src).into_iter().filter(|s| s.starts_with('{')) {
            if let Some(Value::Object(obj)) = parse_lenient(span) {
                let looks_like_order = ["description", "order_type", "order type", "provenance"]
                    .iter()
                    .any(|k| obj.contains_key(*k));
                let arrays: Vec<&Value> = obj.values().filter(|v| v.is_array()).collect();
                if !looks_like_order && arrays.len() == 1 {
                    if let Value::Array(items) = arrays[0] {
                        return Some((items.clone(), true));
                    }
                }
                return Some((vec![Value::Object(obj)], true));
            }
        }
    }
    None
}

/// Contents of every ``` fenced block, language tag removed.
fn fenced_blocks(text: &str) -> Vec<&str> {
    let mut blocks = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        let body_start = after.find('\n').map_or(after.len(), |n| n + 1);
        let tag = &after[..body_start];
        // ```json[...] on one line: no newline before the payload
        let (body, consumed) = if tag.trim().chars().all(|c| c.is_ascii_alphanumeric()) {
            (&after[body_start..], body_start)
        } else {
            (after, 0)
        };
        match body.find("```") {
            Some(close) => {
                blocks.push(&body[..close]);
                rest = &after[consumed + close + 3..];
            }
            None => {
                // unterminated fence, e.g. output cut off at max_tokens
                blocks.push(body);
                break;
            }
        }
    }
    blocks
}

/// Balanced `[...]` / `{...}` spans starting at nesting depth zero. Prose
/// between spans is skipped, so quotes there do not open strings.
fn top_level_spans(text: &str) -> Vec<&str> {
    let bytes = text.as_bytes();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'[' || bytes[i] == b'{' {
            match balanced_end(bytes, i) {
                Some(end) => {
                    spans.push(&text[i..=end]);
                    i = end + 1;
                }
                None => i += 1,
            }
        } else {
            i += 1;
        }
    }
    spans
}

fn balanced_end(bytes: &[u8], start: usize) -> Option<usize> {
    let mut stack = Vec::new();
    let mut in_string = false;
    let mut escaped = false;
    for (offset, &b) in bytes[start..].iter().enumerate() {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'[' => stack.push(b']'),
            b'{' => stack.push(b'}'),
            b']' | b'}' => {
                if stack.pop() != Some(b) {
                    return None;
                }
                if stack.is_empty() {
                    return Some(start + offset);
                }
            }
            _ => {}
        }
    }
    None
}

/// Strict JSON first, then again with trailing commas removed.
fn parse_lenient(span: &str) -> Option<Value> {
    serde_json::from_str(span)
        .ok()
        .or_else(|| serde_json::from_str(&strip_trailing_commas(span)).ok())
}

fn strip_trailing_commas(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut in_string = false;
    let mut escaped = false;
    let chars: Vec<char> = s.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if in_string {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            out.push(c);
            continue;
        }
        if c == '"' {
            in_string = true;
        }
        if c == ',' {
            let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
            if matches!(next, Some(']') | Some('}')) {
                continue;
            }
        }
        out.push(c);
    }
    out
}
