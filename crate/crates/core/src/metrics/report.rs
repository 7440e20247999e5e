use serde::{Deserialize, Serialize};

use super::score::{strict_f1, EncounterScore};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("cannot aggregate an empty score list")]
    EmptyInput,
}

/// How per-encounter values are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    /// Mean of per-encounter values.
    Macro,
    /// Pool counts (or slot sums) across the corpus, then compute once.
    Micro,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AggregateOptions {
    /// Applies to description, reason and provenance.
    pub text: Granularity,
    pub order_type: Granularity,
}

impl Default for AggregateOptions {
    fn default() -> Self {
        Self {
            text: Granularity::Macro,
            order_type: Granularity::Micro,
        }
    }
}

/// The four headline numbers reported per system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadlineMetrics {
    pub description_rouge1_f1: f64,
    pub reason_rouge1_f1: f64,
    pub order_type_strict_f1: f64,
    pub provenance_multilabel_f1: f64,
}

impl HeadlineMetrics {
    pub fn new(description: f64, reason: f64, order_type: f64, provenance: f64) -> Self {
        Self {
            description_rouge1_f1: description,
            reason_rouge1_f1: reason,
            order_type_strict_f1: order_type,
            provenance_multilabel_f1: provenance,
        }
    }

    /// Arithmetic mean of the four metrics.
    pub fn average(&self) -> f64 {
        (self.description_rouge1_f1 + self.reason_rouge1_f1 + self.order_type_strict_f1 + self.provenance_multilabel_f1)
            / 4.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    #[serde(flatten)]
    pub metrics: HeadlineMetrics,
    pub average_score: f64,
    pub options: AggregateOptions,
    pub per_encounter: Vec<EncounterScore>,
}

pub const TABLE_HEADER: &str = "| System | Description (Rouge1_F1) | Reason (Rouge1_F1) | Order Type (Strict_F1) | Provenance (MultiLabel_F1) | Avg. Score |";
pub const TABLE_RULE: &str = "|---|---|---|---|---|---|";

impl CorpusReport {
    /// One markdown table row in the layout of [`TABLE_HEADER`].
    pub fn table_row(&self, label: &str) -> String {
        let m = &self.metrics;
        format!(
            "| {label} | {:.3} | {:.3} | {:.3} | {:.3} | {:.3} |",
            m.description_rouge1_f1,
            m.reason_rouge1_f1,
            m.order_type_strict_f1,
            m.provenance_multilabel_f1,
            self.average_score
        )
    }

    pub fn table(rows: &[(String, &CorpusReport)]) -> String {
        let mut out = vec![TABLE_HEADER.to_owned(), TABLE_RULE.to_owned()];
        out.extend(rows.iter().map(|(label, r)| r.table_row(label)));
        out.join("\n")
    }
}

/// Combines per-encounter scores into corpus-level metrics.
pub fn aggregate(scores: &[EncounterScore], opts: AggregateOptions) -> Result<CorpusReport, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let n = scores.len() as f64;
    let slots: usize = scores.iter().map(EncounterScore::slots).sum();

    let text = |per_encounter: fn(&EncounterScore) -> f64, sum: fn(&EncounterScore) -> f64| match opts.text {
        Granularity::Macro => scores.iter().map(per_encounter).sum::<f64>() / n,
        Granularity::Micro if slots == 0 => 1.0,
        Granularity::Micro => scores.iter().map(sum).sum::<f64>() / slots as f64,
    };

    let order_type = match opts.order_type {
        Granularity::Micro => strict_f1(
            scores.iter().map(|s| s.ordertype_tp).sum(),
            scores.iter().map(|s| s.ordertype_fp).sum(),
            scores.iter().map(|s| s.ordertype_fn).sum(),
        ),
        Granularity::Macro => scores.iter().map(EncounterScore::ordertype_f1).sum::<f64>() / n,
    };

    let metrics = HeadlineMetrics::new(
        text(|s| s.description_rouge1, |s| s.description_sum),
        text(|s| s.reason_rouge1, |s| s.reason_sum),
        order_type,
        text(|s| s.provenance_f1, |s| s.provenance_sum),
    );
    Ok(CorpusReport {
        average_score: metrics.average(),
        metrics,
        options: opts,
        per_encounter: scores.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn score(desc: f64, tp: usize, fp: usize, fn_: usize, slots: usize) -> EncounterScore {
        EncounterScore {
            encounter_id: String::new(),
            description_rouge1: desc,
            reason_rouge1: desc,
            ordertype_tp: tp,
            ordertype_fp: fp,
            ordertype_fn: fn_,
            provenance_f1: desc,
            n_pred: tp + fp,
            n_gold: slots,
            description_sum: desc * slots as f64,
            reason_sum: desc * slots as f64,
            provenance_sum: desc * slots as f64,
        }
    }

    #[test]
    fn empty_input() {
        assert_eq!(
            aggregate(&[], AggregateOptions::default()).unwrap_err(),
            MetricsError::EmptyInput
        );
    }

    #[test]
    fn macro_text_micro_type() {
        let scores = vec![score(1.0, 1, 0, 0, 1), score(0.5, 0, 2, 4, 4)];
        let r = aggregate(&scores, AggregateOptions::default()).unwrap();
        assert_eq!(r.metrics.description_rouge1_f1, 0.75);
        // pooled tp=1 fp=2 fn=4 → 2/(2+6)
        assert_eq!(r.metrics.order_type_strict_f1, 0.25);
        assert!((r.average_score - r.metrics.average()).abs() < 1e-15);
    }

    #[test]
    fn switchable_granularity() {
        let scores = vec![score(1.0, 1, 0, 0, 1), score(0.5, 0, 2, 4, 4)];
        let opts = AggregateOptions {
            text: Granularity::Micro,
            order_type: Granularity::Macro,
        };
        let r = aggregate(&scores, opts).unwrap();
        // (1 + 2) / 5
        assert!((r.metrics.description_rouge1_f1 - 0.6).abs() < 1e-12);
        // (1 + 0) / 2
        assert_eq!(r.metrics.order_type_strict_f1, 0.5);
    }

    #[test]
    fn row_format() {
        let r = aggregate(&[score(1.0, 1, 0, 0, 1)], AggregateOptions::default()).unwrap();
        assert_eq!(
            r.table_row("1-Shot"),
            "| 1-Shot | 1.000 | 1.000 | 1.000 | 1.000 | 1.000 |"
        );
        let table = CorpusReport::table(&[("x".into(), &r)]);
        assert_eq!(table.lines().count(), 3);
    }
}
