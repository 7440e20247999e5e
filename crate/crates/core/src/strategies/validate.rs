//! Constraint checks run on each ReAct Action before it is accepted.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::CandidateOrder;
use crate::metrics::tokenize;
use crate::orders::{dedup_key, word_count, OrderType, PostprocessConfig};
use crate::transcript::{Speaker, Transcript};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationKind {
    NotDoctorInitiated,
    WordingMismatch,
    TooLong,
    Compound,
    Duplicate,
    OverCap,
    BadSchema,
}

/// One broken constraint. `message` is written for the model: it is pasted
/// into the next Observation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Index into the candidate list; `None` for problems with the response
    /// as a whole or with elements that never became candidates.
    pub candidate: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReactConfig {
    pub max_iterations: usize,
    /// Share of a description's content words that must occur in the cited
    /// turns.
    pub wording_overlap_threshold: f64,
    /// Send the previous raw answer back along with the Observation.
    pub include_prior_output: bool,
    pub postprocess: PostprocessConfig,
}

impl Default for ReactConfig {
    fn default() -> Self {
        Self {
            max_iterations: 3,
            wording_overlap_threshold: 0.6,
            include_prior_output: true,
            postprocess: PostprocessConfig::default(),
        }
    }
}

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "of", "for", "to", "and", "or", "in", "on", "at", "by", "with", "some", "your", "you", "is",
    "be", "go", "ahead", "get", "let", "s", "i", "we", "will", "want", "um", "uh", "just",
];

/// Keywords marking a distinct orderable item, with the order type they
/// usually signal.
const ORDER_KEYWORDS: &[(&str, OrderType)] = &[
    ("test", OrderType::Lab),
    ("tests", OrderType::Lab),
    ("panel", OrderType::Lab),
    ("level", OrderType::Lab),
    ("levels", OrderType::Lab),
    ("a1c", OrderType::Lab),
    ("scan", OrderType::Imaging),
    ("xray", OrderType::Imaging),
    ("mri", OrderType::Imaging),
    ("ct", OrderType::Imaging),
    ("ultrasound", OrderType::Imaging),
    ("prescription", OrderType::Medication),
    ("refill", OrderType::Medication),
    ("follow", OrderType::Followup),
    ("followup", OrderType::Followup),
];

fn content_tokens(text: &str) -> Vec<String> {
    let all = tokenize(text);
    let content: Vec<String> = all
        .iter()
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .cloned()
        .collect();
    if content.is_empty() {
        all
    } else {
        content
    }
}

/// Keyword hits in `tokens`, with "x ray" folded to "xray".
fn keyword_hits(tokens: &[String]) -> Vec<(usize, &'static str, OrderType)> {
    let mut hits = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let (word, width) = if tokens[i] == "x" && tokens.get(i + 1).is_some_and(|t| t == "ray" || t == "rays") {
            ("xray".to_owned(), 2)
        } else {
            (tokens[i].clone(), 1)
        };
        if let Some((kw, t)) = ORDER_KEYWORDS.iter().find(|(kw, _)| *kw == word) {
            hits.push((i, *kw, *t));
        }
        i += width;
    }
    hits
}

/// Whether `and` joins two separately orderable items, e.g.
/// "covid test and blood test".
pub fn is_compound(description: &str) -> bool {
    let tokens = tokenize(description);
    let hits = keyword_hits(&tokens);
    let mut segment_has_keyword = vec![false];
    let mut hit_iter = hits.iter().peekable();
    for (i, tok) in tokens.iter().enumerate() {
        while hit_iter.peek().is_some_and(|(pos, _, _)| *pos == i) {
            *segment_has_keyword.last_mut().unwrap() = true;
            hit_iter.next();
        }
        if tok == "and" {
            segment_has_keyword.push(false);
        }
    }
    segment_has_keyword.iter().filter(|&&k| k).count() >= 2
}

/// Checks every candidate against the extraction constraints.
pub fn validate_candidates(cands: &[CandidateOrder], t: &Transcript, cfg: &ReactConfig) -> Vec<Violation> {
    let caps = &cfg.postprocess;
    let mut out = Vec::new();
    let mut seen: HashMap<(OrderType, String), usize> = HashMap::new();

    for (i, cand) in cands.iter().enumerate() {
        let order = &cand.order;
        let label = format!("Order {} (\"{}\")", i + 1, order.description);
        let mut push = |kind, message: String| {
            out.push(Violation {
                kind,
                candidate: Some(i),
                message,
            })
        };

        let bad_turns: Vec<String> = order
            .provenance
            .iter()
            .filter_map(|&turn| match t.speaker_of(turn) {
                Some(Speaker::Doctor) => None,
                Some(s) => Some(format!("turn {turn} is spoken by the {}", s.as_str().to_lowercase())),
                None => Some(format!("turn {turn} does not exist")),
            })
            .collect();
        if !bad_turns.is_empty() {
            push(
                ViolationKind::NotDoctorInitiated,
                format!(
                    "{label}: {}. Keep only orders the doctor gives and cite doctor turns only.",
                    bad_turns.join("; ")
                ),
            );
        }

        let desc_tokens = content_tokens(&order.description);
        let cited: HashSet<String> = order
            .provenance
            .iter()
            .filter_map(|&turn| t.turn(turn))
            .flat_map(|turn| tokenize(&turn.text))
            .collect();
        if !desc_tokens.is_empty() {
            let found = desc_tokens.iter().filter(|tok| cited.contains(*tok)).count();
            let coverage = found as f64 / desc_tokens.len() as f64;
            if coverage < cfg.wording_overlap_threshold {
                push(
                    ViolationKind::WordingMismatch,
                    format!(
                        "{label}: only {found} of {} description words appear in the cited turns. Use the doctor's exact wording.",
                        desc_tokens.len()
                    ),
                );
            }
        }

        for (field, text) in [("description", &order.description), ("reason", &order.reason)] {
            let n = word_count(text);
            if n > caps.max_words {
                push(
                    ViolationKind::TooLong,
                    format!(
                        "{label}: the {field} has {n} words; shorten it to at most {}.",
                        caps.max_words
                    ),
                );
            }
        }

        if is_compound(&order.description) {
            push(
                ViolationKind::Compound,
                format!("{label}: combines several items joined by \"and\". Emit a separate order for each item."),
            );
        }

        let key = dedup_key(order);
        if let Some(&first) = seen.get(&key) {
            push(
                ViolationKind::Duplicate,
                format!(
                    "{label}: repeats order {}. List each order once and merge their provenance.",
                    first + 1
                ),
            );
        } else {
            seen.insert(key, i);
        }

        if order.provenance.len() > caps.max_provenance {
            push(
                ViolationKind::OverCap,
                format!(
                    "{label}: cites {} turns; cite at most {}.",
                    order.provenance.len(),
                    caps.max_provenance
                ),
            );
        }
        if i >= caps.max_orders {
            push(
                ViolationKind::OverCap,
                format!(
                    "{label}: exceeds the limit of {} orders; keep only the most important ones.",
                    caps.max_orders
                ),
            );
        }
    }
    out
}
