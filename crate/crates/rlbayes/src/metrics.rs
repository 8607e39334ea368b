//! Structure-recovery metrics: edgewise confusion counts, F1, a
//! balanced-accuracy AUC summary, and structural Hamming distance.

use crate::graph::Dag;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    #[serde(rename = "tp")]
    pub true_positives: u64,
    #[serde(rename = "fp")]
    pub false_positives: u64,
    #[serde(rename = "fn")]
    pub false_negatives: u64,
    #[serde(rename = "tn")]
    pub true_negatives: u64,
}

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("graphs have {learned} and {truth} nodes")]
    NodeCountMismatch { learned: usize, truth: usize },
    #[error("the reference graph has no edges, so the metric is undefined")]
    DegenerateTruth,
}

/// Classify every ordered node pair of `learned` against `truth`.
pub fn confusion(learned: &Dag, truth: &Dag) -> Result<ConfusionCounts, MetricsError> {
    if learned.n_nodes() != truth.n_nodes() {
        return Err(MetricsError::NodeCountMismatch {
            learned: learned.n_nodes(),
            truth: truth.n_nodes(),
        });
    }
    let n = truth.n_nodes();
    let mut c = ConfusionCounts {
        true_positives: 0,
        false_positives: 0,
        false_negatives: 0,
        true_negatives: 0,
    };
    for s in 0..n {
        for t in 0..n {
            if s == t {
                continue;
            }
            match (learned.has_edge(s, t), truth.has_edge(s, t)) {
                (true, true) => c.true_positives += 1,
                (true, false) => c.false_positives += 1,
                (false, true) => c.false_negatives += 1,
                (false, false) => c.true_negatives += 1,
            }
        }
    }
    Ok(c)
}

/// Harmonic mean of edge precision and recall. An undefined precision or
/// recall (zero denominator) counts as zero, so two empty graphs score 0.
pub fn f1_score(c: &ConfusionCounts) -> f64 {
    let precision_den = c.true_positives + c.false_positives;
    let recall_den = c.true_positives + c.false_negatives;
    let precision =
        if precision_den == 0 { 0.0 } else { c.true_positives as f64 / precision_den as f64 };
    let recall = if recall_den == 0 { 0.0 } else { c.true_positives as f64 / recall_den as f64 };
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Balanced accuracy over ordered pairs: the mean of the true-positive
/// and true-negative rates. Errors when the reference graph has no edges
/// (or, impossibly for a DAG, no non-edges).
pub fn auc_score(c: &ConfusionCounts) -> Result<f64, MetricsError> {
    let pos = c.true_positives + c.false_negatives;
    let neg = c.true_negatives + c.false_positives;
    if pos == 0 || neg == 0 {
        return Err(MetricsError::DegenerateTruth);
    }
    let tpr = c.true_positives as f64 / pos as f64;
    let tnr = c.true_negatives as f64 / neg as f64;
    Ok((tpr + tnr) / 2.0)
}

/// Structural Hamming distance: the number of unordered node pairs whose
/// edge status (absent, forward, backward) differs, so one reversed edge
/// costs 1. Both graphs must share a node count.
pub fn shd(learned: &Dag, truth: &Dag) -> u64 {
    assert_eq!(
        learned.n_nodes(),
        truth.n_nodes(),
        "structural Hamming distance needs a shared node set"
    );
    let n = truth.n_nodes();
    let mut distance = 0;
    for i in 0..n {
        for j in i + 1..n {
            let a = (learned.has_edge(i, j), learned.has_edge(j, i));
            let b = (truth.has_edge(i, j), truth.has_edge(j, i));
            if a != b {
                distance += 1;
            }
        }
    }
    distance
}
