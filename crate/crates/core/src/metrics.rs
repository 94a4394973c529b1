//! Retrieval and classification metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRanking {
    #[serde(alias = "id", alias = "query")]
    pub query_id: String,
    /// 1-based position of the ground-truth item.
    pub rank: u64,
}

/// Mean reciprocal rank.
pub fn mrr(rankings: &[QueryRanking]) -> Result<f64> {
    if rankings.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut total = 0.0;
    for r in rankings {
        if r.rank == 0 {
            return Err(Error::InvalidRank(r.query_id.clone()));
        }
        total += 1.0 / r.rank as f64;
    }
    Ok(total / rankings.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub class: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub macro_f1: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub per_class: Vec<ClassMetrics>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class precision, recall and F1 plus their unweighted means.
/// A zero denominator yields 0.
pub fn classification_metrics(
    pred: &[usize],
    truth: &[usize],
    classes: usize,
) -> Result<ClassificationReport> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    if let Some(&label) = pred.iter().chain(truth).find(|&&l| l >= classes) {
        return Err(Error::UnknownLabel { label, classes });
    }
    let mut tp = vec![0usize; classes];
    let mut predicted = vec![0usize; classes];
    let mut actual = vec![0usize; classes];
    for (&p, &t) in pred.iter().zip(truth) {
        predicted[p] += 1;
        actual[t] += 1;
        if p == t {
            tp[p] += 1;
        }
    }
    let per_class: Vec<ClassMetrics> = (0..classes)
        .map(|c| {
            let precision = ratio(tp[c], predicted[c]);
            let recall = ratio(tp[c], actual[c]);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                class: c,
                precision,
                recall,
                f1,
                support: actual[c],
            }
        })
        .collect();
    let mean = |f: fn(&ClassMetrics) -> f64| {
        if classes == 0 {
            0.0
        } else {
            per_class.iter().map(f).sum::<f64>() / classes as f64
        }
    };
    Ok(ClassificationReport {
        macro_f1: mean(|m| m.f1),
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        per_class,
    })
}
