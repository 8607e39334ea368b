//! Decomposable scores for DAG structures on discrete data: plain
//! log-likelihood and its AIC / BIC penalized forms.
//!
//! Every score is a sum of per-family terms, so the scorer caches local
//! scores by (child, parent set) and evaluates a candidate move by
//! touching only the one or two families it changes. Parent sets are
//! canonicalized to ascending order before counting, which keeps the
//! floating-point result a function of the set rather than the call site.

use crate::data::{DataError, Dataset, FamilyCounts};
use crate::graph::{Dag, OpKind, Operation, OperationError};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

/// Scorer limit on variable count, from the 128-bit parent-set keys.
pub const MAX_SCORED_VARS: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    #[serde(rename = "ll")]
    LogLikelihood,
    Aic,
    Bic,
}

impl std::fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScoreKind::LogLikelihood => "ll",
            ScoreKind::Aic => "aic",
            ScoreKind::Bic => "bic",
        })
    }
}

impl std::str::FromStr for ScoreKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ll" => Ok(ScoreKind::LogLikelihood),
            "aic" => Ok(ScoreKind::Aic),
            "bic" => Ok(ScoreKind::Bic),
            other => Err(format!("unknown score '{other}', expected ll, aic, or bic")),
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ScoreError {
    #[error(transparent)]
    NotApplicable(#[from] OperationError),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub entries: usize,
}

/// Score evaluator bound to one dataset. Holds the local-score cache, so
/// reuse one scorer across a whole search.
pub struct Scorer<'a> {
    kind: ScoreKind,
    data: &'a Dataset,
    cache: HashMap<(usize, [u64; 2]), f64>,
    hits: u64,
    misses: u64,
}

fn parent_mask(parents: &[usize]) -> [u64; 2] {
    let mut mask = [0u64; 2];
    for &p in parents {
        mask[p / 64] |= 1 << (p % 64);
    }
    mask
}

/// Maximized log-likelihood contribution of one family: each parent
/// configuration contributes sum_k n_jk ln(n_jk / n_j), with empty cells
/// contributing zero.
fn family_log_likelihood(counts: &FamilyCounts) -> f64 {
    let mut total = 0.0;
    for config in 0..counts.n_configs {
        let row = counts.config(config);
        let n_j: u64 = row.iter().sum();
        if n_j == 0 {
            continue;
        }
        for &n_jk in row {
            if n_jk > 0 {
                total += n_jk as f64 * (n_jk as f64 / n_j as f64).ln();
            }
        }
    }
    total
}

impl<'a> Scorer<'a> {
    pub fn new(kind: ScoreKind, data: &'a Dataset) -> Self {
        assert!(data.n_rows() >= 1, "scores are undefined on an empty dataset");
        assert!(
            data.n_vars() >= 1 && data.n_vars() <= MAX_SCORED_VARS,
            "scorer supports 1..={MAX_SCORED_VARS} variables"
        );
        Scorer { kind, data, cache: HashMap::new(), hits: 0, misses: 0 }
    }

    pub fn kind(&self) -> ScoreKind {
        self.kind
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    pub fn cache_stats(&self) -> CacheStats {
        CacheStats { hits: self.hits, misses: self.misses, entries: self.cache.len() }
    }

    /// Penalized local score of `child` given a parent set (any order).
    pub fn local_score(&mut self, child: usize, parents: &[usize]) -> Result<f64, DataError> {
        let key = (child, parent_mask(parents));
        if let Some(&v) = self.cache.get(&key) {
            self.hits += 1;
            return Ok(v);
        }
        self.misses += 1;
        let mut sorted: Vec<usize> = parents.to_vec();
        sorted.sort_unstable();
        let counts = self.data.count_family(child, &sorted)?;
        let ll = family_log_likelihood(&counts);
        let params = ((counts.child_card - 1) * counts.n_configs) as f64;
        let penalty = match self.kind {
            ScoreKind::LogLikelihood => 0.0,
            ScoreKind::Aic => 2.0 * params,
            ScoreKind::Bic => (self.data.n_rows() as f64).ln() * params,
        };
        let v = ll - penalty;
        self.cache.insert(key, v);
        Ok(v)
    }

    /// Score of a whole structure: the sum of its local scores, child by
    /// child in index order.
    pub fn total_score(&mut self, dag: &Dag) -> Result<f64, DataError> {
        assert_eq!(dag.n_nodes(), self.data.n_vars(), "structure and data disagree on variables");
        let mut total = 0.0;
        for child in 0..dag.n_nodes() {
            total += self.local_score(child, &dag.parents(child))?;
        }
        Ok(total)
    }

    /// Score change from applying `op` to `dag`, touching only the family
    /// of the target (add, delete) or of both endpoints (reverse).
    pub fn delta_score(&mut self, dag: &Dag, op: Operation) -> Result<f64, ScoreError> {
        // Surface the same error apply() would.
        if let Err(e) = dag.apply(op) {
            return Err(e.into());
        }
        let (s, t) = (op.source, op.target);
        match op.kind {
            OpKind::Add => {
                let old = dag.parents(t);
                let mut new = old.clone();
                new.push(s);
                Ok(self.local_score(t, &new)? - self.local_score(t, &old)?)
            }
            OpKind::Delete => {
                let old = dag.parents(t);
                let new: Vec<usize> = old.iter().copied().filter(|&p| p != s).collect();
                Ok(self.local_score(t, &new)? - self.local_score(t, &old)?)
            }
            OpKind::Reverse => {
                let old_s = dag.parents(s);
                let old_t = dag.parents(t);
                let mut new_s = old_s.clone();
                new_s.push(t);
                let new_t: Vec<usize> = old_t.iter().copied().filter(|&p| p != s).collect();
                // Two-term sums, kept in this shape so that the delta of
                // the inverse reversal is the exact negation.
                let new_sum = self.local_score(s, &new_s)? + self.local_score(t, &new_t)?;
                let old_sum = self.local_score(s, &old_s)? + self.local_score(t, &old_t)?;
                Ok(new_sum - old_sum)
            }
        }
    }
}
