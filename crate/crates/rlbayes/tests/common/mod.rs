//! Helpers shared by the integration test targets.
#![allow(dead_code)] // Each test binary uses its own subset.

use rlbayes::graph::Dag;
use rlbayes::netio::{parse_bif, Cpt, DiscreteNetwork, Variable};
use rlbayes::rng::Rng;
use std::path::PathBuf;

pub fn networks_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../networks")
}

pub fn fixture(name: &str) -> PathBuf {
    networks_dir().join(format!("{name}.bif"))
}

pub fn load_network(name: &str) -> DiscreteNetwork {
    let text = std::fs::read_to_string(fixture(name))
        .unwrap_or_else(|e| panic!("reading {name}.bif: {e}"));
    let outcome = parse_bif(&text).unwrap_or_else(|e| panic!("parsing {name}.bif: {e}"));
    assert!(
        outcome.warnings.is_empty(),
        "{name}.bif should parse without renormalization: {:?}",
        outcome.warnings
    );
    outcome.network
}

/// Every labeled DAG on `n` nodes, by filtering all off-diagonal edge
/// subsets for acyclicity. Only sane for n <= 4 (4096 subsets).
pub fn all_dags(n: usize) -> Vec<Dag> {
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|s| (0..n).filter(move |&t| t != s).map(move |t| (s, t)))
        .collect();
    let mut out = Vec::new();
    for mask in 0u32..1 << pairs.len() {
        let edges: Vec<(usize, usize)> = pairs
            .iter()
            .enumerate()
            .filter(|&(i, _)| mask >> i & 1 == 1)
            .map(|(_, &p)| p)
            .collect();
        if let Ok(d) = Dag::from_edges(n, &edges) {
            out.push(d);
        }
    }
    out
}

/// A random small network for oracle tests: random structure (2..=5
/// arcs), cardinalities 2 or 3, and conditional rows whose dominant
/// state rotates with the parent configuration so that every arc is
/// statistically visible.
pub fn random_network(n: usize, seed: u64) -> DiscreteNetwork {
    let mut rng = Rng::new(seed);
    let dag = loop {
        let mut edges = Vec::new();
        for s in 0..n {
            for t in s + 1..n {
                if rng.next_f64() < 0.5 {
                    edges.push((s, t));
                }
            }
        }
        let d = Dag::from_edges(n, &edges).expect("forward edges cannot cycle");
        if (2..=5).contains(&d.edge_count()) {
            break d;
        }
    };

    let cards: Vec<usize> = (0..n).map(|_| 2 + rng.below(2) as usize).collect();
    let variables: Vec<Variable> = (0..n)
        .map(|i| Variable {
            name: format!("v{i}"),
            states: (0..cards[i]).map(|k| format!("s{k}")).collect(),
        })
        .collect();

    let cpts: Vec<Cpt> = (0..n)
        .map(|child| {
            let parents: Vec<usize> = dag.parents(child);
            let n_configs: usize = parents.iter().map(|&p| cards[p]).product();
            let rows: Vec<Vec<f64>> = (0..n_configs)
                .map(|config| {
                    // Decompose with the first parent most significant.
                    let mut rem = config;
                    let mut state_sum = 0usize;
                    for &p in parents.iter().rev() {
                        state_sum += rem % cards[p];
                        rem /= cards[p];
                    }
                    let card = cards[child];
                    let dominant = (state_sum + child) % card;
                    let w = 0.6 + 0.25 * rng.next_f64();
                    let mut rest: Vec<f64> =
                        (0..card - 1).map(|_| rng.next_f64() + 0.05).collect();
                    let scale = (1.0 - w) / rest.iter().sum::<f64>();
                    for r in &mut rest {
                        *r *= scale;
                    }
                    rest.insert(dominant, w);
                    rest
                })
                .collect();
            Cpt { child, parents, rows }
        })
        .collect();

    DiscreteNetwork::new(format!("random{seed}"), variables, cpts)
        .expect("generated network is valid")
}
