use serde::{Deserialize, Serialize};

use super::rouge1_f1;
use crate::orders::MedicalOrder;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignOptions {
    /// Only pair orders of the same type.
    pub require_type_match: bool,
}

/// A one-to-one pairing between predicted and gold orders.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Alignment {
    /// `(pred index, gold index)`, sorted by pred index.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_pred: Vec<usize>,
    pub unmatched_gold: Vec<usize>,
    pub total_weight: f64,
}

/// Maximum-weight matching of predictions to gold orders, where the weight of
/// a pair is the ROUGE-1 F1 of their descriptions. Zero-weight pairs are never
/// formed. Among optimal matchings the one whose sorted pair list is
/// lexicographically smallest is returned.
pub fn align_orders(pred: &[MedicalOrder], gold: &[MedicalOrder], opts: AlignOptions) -> Alignment {
    let weights: Vec<Vec<f64>> = pred
        .iter()
        .map(|p| {
            gold.iter()
                .map(|g| {
                    if opts.require_type_match && p.order_type != g.order_type {
                        0.0
                    } else {
                        rouge1_f1(&p.description, &g.description)
                    }
                })
                .collect()
        })
        .collect();
    align_weights(&weights, gold.len())
}

/// Matching over an explicit `pred × gold` weight matrix (entries ≥ 0).
pub(crate) fn align_weights(weights: &[Vec<f64>], n_gold: usize) -> Alignment {
    let n_pred = weights.len();
    let mut available: Vec<usize> = (0..n_gold).collect();
    let mut pairs = Vec::new();
    let mut total = 0.0;

    for i in 0..n_pred {
        let rows: Vec<usize> = (i..n_pred).collect();
        let target = assignment_value(weights, &rows, &available);
        if target <= EPS {
            break;
        }
        let rest = &rows[1..];
        let mut chosen = None;
        for (slot, &j) in available.iter().enumerate() {
            let w = weights[i][j];
            if w <= 0.0 {
                continue;
            }
            let mut remaining = available.clone();
            remaining.remove(slot);
            if w + assignment_value(weights, rest, &remaining) >= target - EPS {
                chosen = Some((slot, j, w));
                break;
            }
        }
        if let Some((slot, j, w)) = chosen {
            available.remove(slot);
            pairs.push((i, j));
            total += w;
        }
    }

    let matched_pred: Vec<bool> = {
        let mut m = vec![false; n_pred];
        pairs.iter().for_each(|&(p, _)| m[p] = true);
        m
    };
    let mut matched_gold = vec![false; n_gold];
    pairs.iter().for_each(|&(_, g)| matched_gold[g] = true);

    Alignment {
        unmatched_pred: (0..n_pred).filter(|&i| !matched_pred[i]).collect(),
        unmatched_gold: (0..n_gold).filter(|&j| !matched_gold[j]).collect(),
        pairs,
        total_weight: total,
    }
}

/// Best total weight achievable by matching `rows` into `cols`.
fn assignment_value(weights: &[Vec<f64>], rows: &[usize], cols: &[usize]) -> f64 {
    if rows.is_empty() || cols.is_empty() {
        return 0.0;
    }
    // Hungarian method needs rows ≤ cols; transpose otherwise.
    let matrix: Vec<Vec<f64>> = if rows.len() <= cols.len() {
        rows.iter()
            .map(|&r| cols.iter().map(|&c| weights[r][c]).collect())
            .collect()
    } else {
        cols.iter()
            .map(|&c| rows.iter().map(|&r| weights[r][c]).collect())
            .collect()
    };
    hungarian_max(&matrix)
}

/// Maximum-weight assignment of every row of an `n × m` matrix (`n ≤ m`) to a
/// distinct column, via shortest augmenting paths with potentials.
fn hungarian_max(w: &[Vec<f64>]) -> f64 {
    let n = w.len();
    let m = w[0].len();
    debug_assert!(n <= m);
    // 1-based arrays; column 0 is the virtual source.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let cost = |i: usize, j: usize| -w[i - 1][j - 1];

    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    (1..=m).filter(|&j| owner[j] != 0).map(|j| w[owner[j] - 1][j - 1]).sum()
}
