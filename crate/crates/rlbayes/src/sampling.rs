//! Forward sampling from a discrete network, plus exact marginals for
//! small networks (used to validate the sampler against ground truth).

use crate::data::Dataset;
use crate::graph::Dag;
use crate::netio::DiscreteNetwork;
use crate::rng::Rng;
use thiserror::Error;

/// Upper bound on joint configurations [`exact_joint_marginals`] will
/// enumerate.
pub const MAX_JOINT_STATES: usize = 1 << 20;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum SamplingError {
    #[error("joint state space has {states} configurations, the maximum is {max}", max = MAX_JOINT_STATES)]
    StateSpaceTooLarge { states: u128 },
}

/// Topological order of `dag`, choosing the smallest-indexed ready node
/// at every step. Deterministic for a given DAG.
pub fn topological_order(dag: &Dag) -> Vec<usize> {
    let n = dag.n_nodes();
    let mut indegree: Vec<usize> = (0..n).map(|t| dag.parents(t).len()).collect();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let next = (0..n)
            .find(|&i| !placed[i] && indegree[i] == 0)
            .expect("a DAG always has a ready node");
        placed[next] = true;
        order.push(next);
        for c in dag.children(next) {
            indegree[c] -= 1;
        }
    }
    order
}

/// Draw `n_rows` complete rows from `net` by sampling each variable in
/// topological order, inverse-CDF in state order. Consumes exactly one
/// uniform per variable per row, so a (network, seed) pair fixes the
/// dataset bit for bit.
pub fn forward_sample(net: &DiscreteNetwork, n_rows: usize, rng: &mut Rng) -> Dataset {
    assert!(n_rows >= 1, "forward_sample needs at least one row");
    let n = net.n_nodes();
    let order = topological_order(net.dag());
    let mut columns: Vec<Vec<u8>> = vec![Vec::with_capacity(n_rows); n];
    let mut assignment = vec![0u8; n];
    for _ in 0..n_rows {
        for &v in &order {
            let row = net.row_for(v, &assignment);
            let u = rng.next_f64();
            let mut cum = 0.0;
            let mut chosen = row.len() - 1;
            for (k, &p) in row.iter().enumerate() {
                cum += p;
                if u < cum {
                    chosen = k;
                    break;
                }
            }
            assignment[v] = chosen as u8;
        }
        for (v, col) in columns.iter_mut().enumerate() {
            col.push(assignment[v]);
        }
    }
    Dataset::new(net.schema(), columns).expect("sampled values match the schema")
}

/// Exact single-variable marginals `out[v][k] = P(v = k)` by enumerating
/// the full joint. Only feasible for small networks.
pub fn exact_joint_marginals(net: &DiscreteNetwork) -> Result<Vec<Vec<f64>>, SamplingError> {
    let n = net.n_nodes();
    let cards: Vec<usize> = (0..n).map(|v| net.variable(v).states.len()).collect();
    let states = cards.iter().fold(1u128, |acc, &c| acc.saturating_mul(c as u128));
    if states > MAX_JOINT_STATES as u128 {
        return Err(SamplingError::StateSpaceTooLarge { states });
    }
    let mut marginals: Vec<Vec<f64>> = cards.iter().map(|&c| vec![0.0; c]).collect();
    let mut assignment = vec![0u8; n];
    loop {
        let mut p = 1.0;
        for v in 0..n {
            p *= net.row_for(v, &assignment)[assignment[v] as usize];
        }
        for v in 0..n {
            marginals[v][assignment[v] as usize] += p;
        }
        // Mixed-radix increment, last variable fastest.
        let mut v = n;
        loop {
            if v == 0 {
                return Ok(marginals);
            }
            v -= 1;
            assignment[v] += 1;
            if (assignment[v] as usize) < cards[v] {
                break;
            }
            assignment[v] = 0;
        }
    }
}
