//! Score-based Bayesian network structure learning over discrete data.
//!
//! The centerpiece is [`search::run`], a learner that walks the space of
//! DAGs while maintaining a bounded table of visited structures and the
//! score benefit of every edge operation it has tried from each of them.
//! Around it sit the pieces needed to benchmark such a learner end to end:
//! BIF network I/O ([`netio`]), forward sampling ([`sampling`]), tabular
//! datasets ([`data`]), decomposable scores ([`scoring`]), hill-climbing
//! and annealing baselines ([`baselines`]), structure-recovery metrics
//! ([`metrics`]), and the command implementations behind the `rlbayes`
//! binary ([`cli`]).

pub mod baselines;
pub mod cli;
pub mod data;
pub mod graph;
pub mod metrics;
pub mod netio;
pub mod rng;
pub mod sampling;
pub mod scoring;
pub mod search;
