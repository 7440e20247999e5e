use serde::{Deserialize, Serialize};

use super::{align_orders, provenance_f1, rouge1_f1, AlignOptions};
use crate::orders::MedicalOrder;

/// Per-encounter metric values.
///
/// The rouge and provenance fields are means over `max(n_pred, n_gold)`
/// slots, where unmatched orders fill their slot with 0. The `*_sum` fields
/// hold the undivided totals for pooled aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncounterScore {
    #[serde(default)]
    pub encounter_id: String,
    pub description_rouge1: f64,
    pub reason_rouge1: f64,
    pub ordertype_tp: usize,
    pub ordertype_fp: usize,
    pub ordertype_fn: usize,
    pub provenance_f1: f64,
    pub n_pred: usize,
    pub n_gold: usize,
    pub description_sum: f64,
    pub reason_sum: f64,
    pub provenance_sum: f64,
}

impl EncounterScore {
    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.encounter_id = id.into();
        self
    }

    /// Strict order-type F1 for this encounter alone; 1 when neither side has
    /// orders.
    pub fn ordertype_f1(&self) -> f64 {
        strict_f1(self.ordertype_tp, self.ordertype_fp, self.ordertype_fn)
    }

    /// Number of slots the text and provenance means are taken over.
    pub fn slots(&self) -> usize {
        self.n_pred.max(self.n_gold)
    }
}

pub(crate) fn strict_f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        1.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Aligns predictions to gold and scores the pairs.
pub fn score_encounter(pred: &[MedicalOrder], gold: &[MedicalOrder], opts: AlignOptions) -> EncounterScore {
    let alignment = align_orders(pred, gold, opts);
    let slots = pred.len().max(gold.len());

    let mut description_sum = 0.0;
    let mut reason_sum = 0.0;
    let mut provenance_sum = 0.0;
    let mut tp = 0;
    for &(p, g) in &alignment.pairs {
        let (p, g) = (&pred[p], &gold[g]);
        description_sum += rouge1_f1(&p.description, &g.description);
        reason_sum += rouge1_f1(&p.reason, &g.reason);
        provenance_sum += provenance_f1(&p.provenance, &g.provenance);
        if p.order_type == g.order_type {
            tp += 1;
        }
    }

    let mean = |sum: f64| if slots == 0 { 1.0 } else { sum / slots as f64 };
    EncounterScore {
        encounter_id: String::new(),
        description_rouge1: mean(description_sum),
        reason_rouge1: mean(reason_sum),
        ordertype_tp: tp,
        ordertype_fp: pred.len() - tp,
        ordertype_fn: gold.len() - tp,
        provenance_f1: mean(provenance_sum),
        n_pred: pred.len(),
        n_gold: gold.len(),
        description_sum,
        reason_sum,
        provenance_sum,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orders::OrderType;

    fn worked_gold() -> Vec<MedicalOrder> {
        vec![
            MedicalOrder::new(
                OrderType::Medication,
                "lasix 40 milligrams a day",
                "shortness of breath acute heart failure exacerbation",
                [126, 127],
            ),
            MedicalOrder::new(OrderType::Lab, "hemoglobin a1c", "type i diabetes", [138]),
        ]
    }

    #[test]
    fn identity_is_perfect() {
        let gold = worked_gold();
        let s = score_encounter(&gold, &gold, AlignOptions::default());
        assert_eq!(s.description_rouge1, 1.0);
        assert_eq!(s.reason_rouge1, 1.0);
        assert_eq!(s.provenance_f1, 1.0);
        assert_eq!((s.ordertype_tp, s.ordertype_fp, s.ordertype_fn), (2, 0, 0));
        assert_eq!(s.ordertype_f1(), 1.0);
    }

    #[test]
    fn flipped_type_only_hits_strict_f1() {
        let gold = worked_gold();
        let mut pred = gold.clone();
        pred[1].order_type = OrderType::Imaging;
        let s = score_encounter(&pred, &gold, AlignOptions::default());
        assert_eq!((s.ordertype_tp, s.ordertype_fp, s.ordertype_fn), (1, 1, 1));
        assert_eq!(s.description_rouge1, 1.0);
        assert_eq!(s.reason_rouge1, 1.0);
        assert_eq!(s.provenance_f1, 1.0);
        assert_eq!(s.ordertype_f1(), 0.5);
    }

    #[test]
    fn empty_predictions() {
        let s = score_encounter(&[], &worked_gold(), AlignOptions::default());
        assert_eq!(s.description_rouge1, 0.0);
        assert_eq!(s.reason_rouge1, 0.0);
        assert_eq!(s.provenance_f1, 0.0);
        assert_eq!((s.ordertype_tp, s.ordertype_fn), (0, 2));
    }

    #[test]
    fn empty_vs_empty() {
        let s = score_encounter(&[], &[], AlignOptions::default());
        assert_eq!(s.description_rouge1, 1.0);
        assert_eq!(s.provenance_f1, 1.0);
        assert_eq!(s.ordertype_f1(), 1.0);
    }

    #[test]
    fn missing_provenance_turn() {
        let gold = worked_gold();
        let mut pred = gold.clone();
        pred[0].provenance = vec![126];
        let s = score_encounter(&pred, &gold, AlignOptions::default());
        // (2/3 + 1) / 2
        assert!((s.provenance_f1 - (2.0 / 3.0 + 1.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn hallucinated_order_dilutes() {
        let gold = worked_gold();
        let mut pred = gold.clone();
        pred.push(MedicalOrder::new(OrderType::Imaging, "chest x-ray", "", [130]));
        let s = score_encounter(&pred, &gold, AlignOptions::default());
        assert!((s.description_rouge1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.ordertype_fp, 1);
    }
}
