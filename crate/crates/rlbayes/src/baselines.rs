//! Baseline structure learners to benchmark against: greedy hill
//! climbing with random restarts, and simulated annealing. Both walk the
//! same operation space as the main search and report the same
//! [`SearchResult`] shape.

use crate::data::Dataset;
use crate::graph::{all_operations, operation_count, Dag, Operation};
use crate::rng::Rng;
use crate::scoring::{ScoreError, ScoreKind, Scorer};
use crate::search::{SearchCounters, SearchError, SearchResult, TracePoint};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HillClimbConfig {
    /// Total climbs: the first starts from the empty graph, later ones
    /// from a random structure. The best result across climbs wins.
    pub restarts: u64,
    pub seed: u64,
}

impl Default for HillClimbConfig {
    fn default() -> Self {
        HillClimbConfig { restarts: 1, seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealConfig {
    pub steps: u64,
    pub initial_temperature: f64,
    /// Geometric cooling factor applied every step.
    pub cooling: f64,
    pub seed: u64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig { steps: 100_000, initial_temperature: 10.0, cooling: 0.999, seed: 0 }
    }
}

fn unwrap_delta(r: Result<f64, ScoreError>) -> Result<f64, SearchError> {
    match r {
        Ok(d) => Ok(d),
        Err(ScoreError::Data(e)) => Err(e.into()),
        Err(ScoreError::NotApplicable(_)) => unreachable!("applicability was checked"),
    }
}

/// Greedy hill climbing: from the start structure, repeatedly apply the
/// applicable operation with the largest strictly positive score change
/// (first in canonical order on ties) until none exists. The trace holds
/// the best score across all climbs after every accepted move.
pub fn hill_climb(
    data: &Dataset,
    score: ScoreKind,
    config: &HillClimbConfig,
) -> Result<SearchResult, SearchError> {
    if config.restarts < 1 {
        return Err(SearchError::Config("hill climbing needs at least one restart".into()));
    }
    let n = data.n_vars();
    if n < 2 {
        return Err(SearchError::Config("structure search needs at least two variables".into()));
    }
    let mut scorer = Scorer::new(score, data);
    let mut rng = Rng::new(config.seed);
    let operations = all_operations(n);

    let empty = Dag::empty(n);
    let empty_score = scorer.total_score(&empty)?;
    let mut best_dag = empty.clone();
    let mut best_score = empty_score;
    let mut counters = SearchCounters::default();
    let mut trace = vec![TracePoint { iteration: 0, best_score: empty_score }];
    let mut moves = 0u64;

    for restart in 0..config.restarts {
        let mut current = if restart == 0 {
            empty.clone()
        } else {
            // Random start: a handful of random edge additions.
            let mut dag = empty.clone();
            for _ in 0..2 * n {
                let s = rng.below(n as u64) as usize;
                let t = rng.below(n as u64) as usize;
                if s != t {
                    if let Ok(next) = dag.apply(Operation::add(s, t)) {
                        dag = next;
                    }
                }
            }
            dag
        };
        let mut current_score = scorer.total_score(&current)?;
        if current_score > best_score {
            best_dag = current.clone();
            best_score = current_score;
        }

        loop {
            let mut best_move: Option<(Operation, f64)> = None;
            for &op in &operations {
                if !current.is_applicable(op) {
                    continue;
                }
                let delta = unwrap_delta(scorer.delta_score(&current, op))?;
                // Strict comparisons keep the first best in canonical order.
                if delta > 0.0 && best_move.is_none_or(|(_, d)| delta > d) {
                    best_move = Some((op, delta));
                }
            }
            let Some((op, delta)) = best_move else { break };
            current = current.apply(op).expect("applicability was checked");
            current_score += delta;
            counters.applied += 1;
            moves += 1;
            if current_score > best_score {
                best_dag = current.clone();
                best_score = current_score;
            }
            trace.push(TracePoint { iteration: moves, best_score });
        }
    }

    Ok(SearchResult { best_dag, best_score, trace, counters })
}

/// Simulated annealing: each step proposes one uniformly random
/// operation; an applicable proposal is accepted when it does not lower
/// the score, or with probability exp(delta / temperature) when it does.
/// The temperature decays geometrically every step, and the best
/// structure ever accepted is returned. The trace samples the best score
/// at most 1000 times plus the endpoints.
pub fn simulated_anneal(
    data: &Dataset,
    score: ScoreKind,
    config: &AnnealConfig,
) -> Result<SearchResult, SearchError> {
    // The negated forms also reject NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(config.initial_temperature > 0.0) {
        return Err(SearchError::Config("initial temperature must be positive".into()));
    }
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(config.cooling > 0.0 && config.cooling <= 1.0) {
        return Err(SearchError::Config("cooling factor must lie in (0, 1]".into()));
    }
    let n = data.n_vars();
    if n < 2 {
        return Err(SearchError::Config("structure search needs at least two variables".into()));
    }
    let mut scorer = Scorer::new(score, data);
    let mut rng = Rng::new(config.seed);
    let total = operation_count(n);

    let mut current = Dag::empty(n);
    let mut current_score = scorer.total_score(&current)?;
    let mut best_dag = current.clone();
    let mut best_score = current_score;
    let mut temperature = config.initial_temperature;
    let mut counters = SearchCounters::default();
    let interval = (config.steps / 1000).max(1);
    let mut trace = vec![TracePoint { iteration: 0, best_score }];

    for step in 1..=config.steps {
        let op = Operation::from_id(n, rng.below(total) as u32);
        if current.is_applicable(op) {
            let delta = unwrap_delta(scorer.delta_score(&current, op))?;
            let accept = delta >= 0.0 || rng.next_f64() < (delta / temperature).exp();
            if accept {
                current = current.apply(op).expect("applicability was checked");
                current_score += delta;
                counters.applied += 1;
                if current_score > best_score {
                    best_dag = current.clone();
                    best_score = current_score;
                }
            } else {
                counters.rejected += 1;
            }
        } else {
            counters.rejected += 1;
        }
        temperature *= config.cooling;
        if step % interval == 0 || step == config.steps {
            trace.push(TracePoint { iteration: step, best_score });
        }
    }

    Ok(SearchResult { best_dag, best_score, trace, counters })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Schema, SchemaVariable};

    fn chain_dataset(n_vars: usize, n_rows: usize, seed: u64) -> Dataset {
        let mut rng = Rng::new(seed);
        let schema = Schema {
            variables: (0..n_vars)
                .map(|i| SchemaVariable {
                    name: format!("v{i}"),
                    states: vec!["0".into(), "1".into()],
                })
                .collect(),
        };
        let mut columns: Vec<Vec<u8>> = vec![Vec::new(); n_vars];
        for _ in 0..n_rows {
            let mut prev = rng.below(2) as u8;
            for (i, col) in columns.iter_mut().enumerate() {
                if i > 0 && rng.next_f64() >= 0.85 {
                    prev ^= 1;
                }
                col.push(prev);
            }
        }
        Dataset::new(schema, columns).unwrap()
    }

    #[test]
    fn hill_climbing_reaches_a_local_optimum() {
        let ds = chain_dataset(4, 400, 7);
        let result = hill_climb(&ds, ScoreKind::Bic, &HillClimbConfig::default()).unwrap();
        let mut scorer = Scorer::new(ScoreKind::Bic, &ds);
        // No applicable operation may improve the returned structure.
        for op in all_operations(4) {
            if result.best_dag.is_applicable(op) {
                let delta = scorer.delta_score(&result.best_dag, op).unwrap();
                assert!(delta <= 1e-9, "{op:?} still improves the result by {delta}");
            }
        }
        assert!(result.best_dag.edge_count() >= 2, "chain data should yield edges");
    }

    #[test]
    fn hill_climbing_is_deterministic() {
        let ds = chain_dataset(4, 300, 8);
        let cfg = HillClimbConfig { restarts: 3, seed: 5 };
        let a = hill_climb(&ds, ScoreKind::Bic, &cfg).unwrap();
        let b = hill_climb(&ds, ScoreKind::Bic, &cfg).unwrap();
        assert_eq!(a.best_dag, b.best_dag);
        assert_eq!(a.best_score, b.best_score);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn restarts_never_hurt() {
        let ds = chain_dataset(5, 300, 9);
        let one = hill_climb(&ds, ScoreKind::Bic, &HillClimbConfig { restarts: 1, seed: 4 })
            .unwrap();
        let many = hill_climb(&ds, ScoreKind::Bic, &HillClimbConfig { restarts: 4, seed: 4 })
            .unwrap();
        assert!(many.best_score >= one.best_score);
    }

    #[test]
    fn hill_climb_trace_is_monotone() {
        let ds = chain_dataset(5, 300, 10);
        let result =
            hill_climb(&ds, ScoreKind::Bic, &HillClimbConfig { restarts: 3, seed: 2 }).unwrap();
        for w in result.trace.windows(2) {
            assert!(w[1].best_score >= w[0].best_score);
        }
        assert_eq!(result.trace.last().unwrap().best_score, result.best_score);
    }

    #[test]
    fn annealing_improves_on_the_empty_graph_and_is_deterministic() {
        let ds = chain_dataset(4, 400, 11);
        let cfg = AnnealConfig { steps: 5000, seed: 3, ..Default::default() };
        let a = simulated_anneal(&ds, ScoreKind::Bic, &cfg).unwrap();
        let b = simulated_anneal(&ds, ScoreKind::Bic, &cfg).unwrap();
        assert_eq!(a.best_dag, b.best_dag);
        assert_eq!(a.counters, b.counters);
        assert_eq!(a.counters.applied + a.counters.rejected, 5000);
        let mut scorer = Scorer::new(ScoreKind::Bic, &ds);
        let empty_score = scorer.total_score(&Dag::empty(4)).unwrap();
        assert!(a.best_score > empty_score);
        for w in a.trace.windows(2) {
            assert!(w[1].best_score >= w[0].best_score);
        }
    }

    #[test]
    fn annealing_accumulated_scores_track_true_scores() {
        let ds = chain_dataset(4, 200, 12);
        let cfg = AnnealConfig { steps: 2000, seed: 6, ..Default::default() };
        let result = simulated_anneal(&ds, ScoreKind::Bic, &cfg).unwrap();
        let mut scorer = Scorer::new(ScoreKind::Bic, &ds);
        let fresh = scorer.total_score(&result.best_dag).unwrap();
        assert!(
            (fresh - result.best_score).abs() <= 1e-9 * fresh.abs().max(1.0),
            "accumulated {} drifted from fresh {fresh}",
            result.best_score
        );
    }

    #[test]
    fn config_validation() {
        let ds = chain_dataset(2, 50, 1);
        assert!(matches!(
            hill_climb(&ds, ScoreKind::Bic, &HillClimbConfig { restarts: 0, seed: 0 }),
            Err(SearchError::Config(_))
        ));
        assert!(matches!(
            simulated_anneal(
                &ds,
                ScoreKind::Bic,
                &AnnealConfig { initial_temperature: 0.0, ..Default::default() }
            ),
            Err(SearchError::Config(_))
        ));
        assert!(matches!(
            simulated_anneal(
                &ds,
                ScoreKind::Bic,
                &AnnealConfig { cooling: 1.5, ..Default::default() }
            ),
            Err(SearchError::Config(_))
        ));
    }
}
