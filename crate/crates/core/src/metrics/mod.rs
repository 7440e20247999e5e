//! Evaluation suite: ROUGE-1 F1 on descriptions and reasons, strict F1 on
//! order type, multi-label F1 on provenance, and corpus aggregation.

mod align;
mod report;
mod score;

use std::collections::{BTreeSet, HashMap};

pub use align::{align_orders, AlignOptions, Alignment};
pub use report::{aggregate, AggregateOptions, CorpusReport, Granularity, HeadlineMetrics, MetricsError};
pub use score::{score_encounter, EncounterScore};

/// Lowercases and splits on every non-alphanumeric character. No stemming
/// and no stopword removal.
pub fn tokenize(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Unigram F1 between two texts using clipped multiset overlap.
///
/// Two empty texts score 1; one empty text scores 0.
pub fn rouge1_f1(pred: &str, reference: &str) -> f64 {
    let pred = tokenize(pred);
    let reference = tokenize(reference);
    match (pred.is_empty(), reference.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &reference {
        *counts.entry(t).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in &pred {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    // 2PR/(P+R) reduces to 2·overlap/(|pred|+|ref|)
    2.0 * overlap as f64 / (pred.len() + reference.len()) as f64
}

/// Set F1 between predicted and gold turn indices; 1 when both are empty.
pub fn multilabel_f1(pred: &BTreeSet<u32>, gold: &BTreeSet<u32>) -> f64 {
    if pred.is_empty() && gold.is_empty() {
        return 1.0;
    }
    let common = pred.intersection(gold).count();
    2.0 * common as f64 / (pred.len() + gold.len()) as f64
}

/// Convenience wrapper over slices; duplicates are ignored.
pub fn provenance_f1(pred: &[u32], gold: &[u32]) -> f64 {
    multilabel_f1(&pred.iter().copied().collect(), &gold.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[u32]) -> BTreeSet<u32> {
        v.iter().copied().collect()
    }

    #[test]
    fn tokenizer() {
        assert_eq!(
            tokenize("Lasix 40 milligrams a day"),
            ["lasix", "40", "milligrams", "a", "day"]
        );
        assert_eq!(tokenize("hemoglobin a1c"), ["hemoglobin", "a1c"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("X-ray, chest!"), ["x", "ray", "chest"]);
    }

    #[test]
    fn rouge_examples() {
        assert_eq!(rouge1_f1("hemoglobin a1c", "hemoglobin a1c"), 1.0);
        // overlap 2, P = 2/4, R = 2/5 → F1 = 4/9
        let f = rouge1_f1("lasix 40 mg daily", "lasix 40 milligrams a day");
        assert!((f - 4.0 / 9.0).abs() < 1e-12);
        assert_eq!(rouge1_f1("", "hemoglobin a1c"), 0.0);
        assert_eq!(rouge1_f1("", "  "), 1.0);
        assert_eq!(rouge1_f1("mri", "ct scan"), 0.0);
    }

    #[test]
    fn rouge_clips_repeated_tokens() {
        // pred has "the" ×3, ref has it once → overlap 1 on "the" plus "scan"
        let f = rouge1_f1("the the the scan", "the scan");
        assert!((f - 2.0 * 2.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn multilabel_examples() {
        assert_eq!(multilabel_f1(&set(&[126, 127]), &set(&[126, 127])), 1.0);
        assert!((multilabel_f1(&set(&[126]), &set(&[126, 127])) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(multilabel_f1(&set(&[5]), &set(&[9])), 0.0);
        assert_eq!(multilabel_f1(&set(&[]), &set(&[])), 1.0);
        assert_eq!(multilabel_f1(&set(&[]), &set(&[1])), 0.0);
        assert_eq!(provenance_f1(&[3, 3, 4], &[4, 3]), 1.0);
    }
}
