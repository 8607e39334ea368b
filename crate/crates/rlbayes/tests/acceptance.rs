//! The release gate: one checkable criterion per guarantee the project
//! makes, each printed as a PASS/FAIL line. Run with
//! `cargo test --test acceptance -- --nocapture` to see the lines.

// ensure!(a >= b) negates the comparison, so a NaN statistic fails the
// criterion instead of passing it.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::type_complexity)]

mod common;

use rlbayes::graph::{all_operations, operation_count, reverse_of, Dag, Operation};
use rlbayes::metrics::{auc_score, confusion, f1_score};
use rlbayes::netio::{parse_bif, write_bif};
use rlbayes::rng::{derive_seed, Rng};
use rlbayes::sampling::{exact_joint_marginals, forward_sample};
use rlbayes::scoring::{ScoreKind, Scorer};
use rlbayes::search::{self, choose_operation, QTable, SearchConfig};
use std::sync::OnceLock;
use std::time::Instant;

type CriterionResult = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !($cond) {
            return Err(format!($($arg)+));
        }
    };
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

// -------------------------------------------------------------- criteria

/// 10 datasets from random 4-node networks; exhaustive enumeration of all
/// 543 4-node DAGs gives the true BIC optimum; the search must reach it
/// in at least 9 of 10 seeds on every dataset, within 2 minutes total.
fn c1_exhaustive_global_optimum() -> CriterionResult {
    let started = Instant::now();
    let dags = common::all_dags(4);
    ensure!(dags.len() == 543, "expected 543 4-node DAGs, enumerated {}", dags.len());

    let mut worst_hits = 10;
    for d in 0..10u64 {
        let net = common::random_network(4, 9100 + d);
        let mut rng = Rng::new(derive_seed(3000, d));
        let data = forward_sample(&net, 5000, &mut rng);

        let mut scorer = Scorer::new(ScoreKind::Bic, &data);
        let optimum = dags
            .iter()
            .map(|g| scorer.total_score(g).expect("4 nodes always scorable"))
            .fold(f64::NEG_INFINITY, f64::max);

        let mut hits = 0;
        for s in 0..10u64 {
            let config = SearchConfig {
                max_iter: 50_000,
                max_length: 200,
                theta: 0.01,
                explore_probability: 0.5,
                score: ScoreKind::Bic,
                seed: derive_seed(3100 + d, s),
            };
            let result = search::run(&data, &config).map_err(|e| e.to_string())?;
            if result.best_score >= optimum - 1e-9 * optimum.abs() {
                hits += 1;
            }
        }
        ensure!(hits >= 9, "dataset {d}: optimum {optimum:.4} reached in only {hits}/10 seeds");
        worst_hits = worst_hits.min(hits);
    }
    let secs = started.elapsed().as_secs_f64();
    ensure!(secs < 120.0, "took {secs:.1}s, budget is 120s");
    Ok(format!("worst dataset {worst_hits}/10 seeds, {secs:.1}s"))
}

/// Shared runs for the asia F1/AUC bands: 10 seeds, n=2000, 100k
/// iterations, table bound 500.
static ASIA_BAND: OnceLock<Result<(f64, f64, f64), String>> = OnceLock::new();

fn asia_band() -> Result<(f64, f64, f64), String> {
    ASIA_BAND
        .get_or_init(|| {
            let net = common::load_network("asia");
            let truth = net.dag();
            let started = Instant::now();
            let mut f1s = Vec::new();
            let mut aucs = Vec::new();
            for s in 0..10u64 {
                let mut rng = Rng::new(derive_seed(4242, 2 * s));
                let data = forward_sample(&net, 2000, &mut rng);
                let config = SearchConfig {
                    max_iter: 100_000,
                    max_length: 500,
                    seed: derive_seed(4242, 2 * s + 1),
                    ..Default::default()
                };
                let result = search::run(&data, &config).map_err(|e| e.to_string())?;
                let c = confusion(&result.best_dag, truth).map_err(|e| e.to_string())?;
                f1s.push(f1_score(&c));
                aucs.push(auc_score(&c).map_err(|e| e.to_string())?);
            }
            Ok((mean(&f1s), mean(&aucs), started.elapsed().as_secs_f64()))
        })
        .clone()
}

fn c2_asia_f1_band() -> CriterionResult {
    let (mean_f1, _, secs) = asia_band()?;
    ensure!(secs < 300.0, "took {secs:.1}s, budget is 300s");
    ensure!(mean_f1 >= 0.43, "mean F1 {mean_f1:.4} below the 0.43 band");
    Ok(format!("mean F1 {mean_f1:.4} over 10 seeds, {secs:.1}s"))
}

fn c3_asia_auc_band() -> CriterionResult {
    let (_, mean_auc, _) = asia_band()?;
    ensure!(mean_auc >= 0.67, "mean AUC {mean_auc:.4} below the 0.67 band");
    Ok(format!("mean AUC {mean_auc:.4} over 10 seeds"))
}

/// Larger tables retain more guidance: on insurance, best-so-far traces
/// never decrease (hard), and mean final AUC at max_length=1000 is at
/// least that at max_length=100 over 20 paired seeds (soft trend; the
/// per-seed effect is noisy, so the check uses well above the minimum
/// five seeds).
fn c4_table_length_trend() -> CriterionResult {
    let net = common::load_network("insurance");
    let truth = net.dag();
    let mut mean_auc = [0.0f64; 2];
    for (i, max_length) in [100usize, 1000].into_iter().enumerate() {
        let mut aucs = Vec::new();
        for s in 0..20u64 {
            let mut rng = Rng::new(derive_seed(778, 2 * s));
            let data = forward_sample(&net, 2000, &mut rng);
            let config = SearchConfig {
                max_iter: 200_000,
                max_length,
                seed: derive_seed(778, 2 * s + 1),
                ..Default::default()
            };
            let result = search::run(&data, &config).map_err(|e| e.to_string())?;
            for pair in result.trace.windows(2) {
                ensure!(
                    pair[1].best_score >= pair[0].best_score,
                    "seed {s}, max_length {max_length}: best-so-far dropped from {} to {} at iteration {}",
                    pair[0].best_score,
                    pair[1].best_score,
                    pair[1].iteration
                );
            }
            let c = confusion(&result.best_dag, truth).map_err(|e| e.to_string())?;
            aucs.push(auc_score(&c).map_err(|e| e.to_string())?);
        }
        mean_auc[i] = mean(&aucs);
    }
    ensure!(
        mean_auc[1] >= mean_auc[0],
        "mean AUC at max_length=1000 ({:.4}) fell below max_length=100 ({:.4})",
        mean_auc[1],
        mean_auc[0]
    );
    Ok(format!("mean AUC {:.4} @100 vs {:.4} @1000, traces monotone", mean_auc[0], mean_auc[1]))
}

/// 1000 random (DAG, operation) pairs across three datasets: the
/// incremental score delta must match a full re-score to 1e-9 relative.
fn c5_delta_score_oracle() -> CriterionResult {
    let started = Instant::now();
    let mut rng = Rng::new(55_001);
    let mut checked = 0u32;
    let mut worst = 0.0f64;
    for (i, name) in ["asia", "sachs", "child"].iter().enumerate() {
        let net = common::load_network(name);
        let mut data_rng = Rng::new(derive_seed(5500, i as u64));
        let data = forward_sample(&net, 500, &mut data_rng);
        let n = net.n_nodes();
        let kind = [ScoreKind::Bic, ScoreKind::Aic, ScoreKind::LogLikelihood][i];
        let mut scorer = Scorer::new(kind, &data);
        let ops = all_operations(n);

        let mut dag = Dag::empty(n);
        let mut drawn = 0;
        while drawn < 334 {
            // Random walk keeps the pair distribution away from the
            // empty graph.
            for _ in 0..3 {
                let op = ops[rng.below(ops.len() as u64) as usize];
                if let Ok(next) = dag.apply(op) {
                    dag = next;
                }
            }
            let op = loop {
                let op = ops[rng.below(ops.len() as u64) as usize];
                if dag.is_applicable(op) {
                    break op;
                }
            };
            let delta = scorer.delta_score(&dag, op).map_err(|e| e.to_string())?;
            let before = scorer.total_score(&dag).map_err(|e| e.to_string())?;
            let after =
                scorer.total_score(&dag.apply(op).unwrap()).map_err(|e| e.to_string())?;
            let full = after - before;
            let tol = 1e-9 * before.abs().max(after.abs()).max(1.0);
            ensure!(
                (delta - full).abs() <= tol,
                "{name}: delta {delta} vs full {full} for {op:?} on {dag:?}"
            );
            worst = worst.max((delta - full).abs() / before.abs().max(after.abs()).max(1.0));
            drawn += 1;
            checked += 1;
            if dag.edge_count() > 2 * n {
                dag = Dag::empty(n);
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    ensure!(secs < 10.0, "took {secs:.1}s, budget is 10s");
    Ok(format!("{checked} pairs, worst relative gap {worst:.2e}, {secs:.1}s"))
}

/// Every applied operation has an applicable reverse, and applying it
/// restores the predecessor bit-exactly: 10000 round trips.
fn c6_reverse_round_trips() -> CriterionResult {
    let mut rng = Rng::new(660_660);
    let mut trips = 0u32;
    for &n in &[4usize, 8, 12] {
        let ops = all_operations(n);
        let mut dag = Dag::empty(n);
        let per_size = 10_000 / 3 + 1;
        let mut done = 0;
        while done < per_size {
            let op = ops[rng.below(ops.len() as u64) as usize];
            if !dag.is_applicable(op) {
                continue;
            }
            let next = dag.apply(op).map_err(|e| e.to_string())?;
            let rev = reverse_of(op);
            ensure!(
                next.is_applicable(rev),
                "reverse {rev:?} inapplicable after {op:?} on {dag:?}"
            );
            let undone = next.apply(rev).map_err(|e| e.to_string())?;
            ensure!(undone == dag, "{op:?} then {rev:?} did not restore {dag:?}");
            ensure!(
                undone.canonical_key() == dag.canonical_key(),
                "round trip changed the canonical key for {dag:?}"
            );
            // Keep walking so round trips cover dense and sparse graphs.
            dag = next;
            if dag.edge_count() >= 2 * n {
                dag = Dag::empty(n);
            }
            done += 1;
            trips += 1;
        }
    }
    ensure!(trips >= 10_000, "only {trips} round trips executed");
    Ok(format!("{trips} round trips bit-exact"))
}

/// After every iteration of a 10000-iteration run on sachs data, each
/// stored finite benefit whose successor row is present equals the exact
/// negation of the successor's stored reverse benefit.
fn c7_benefit_antisymmetry() -> CriterionResult {
    let net = common::load_network("sachs");
    let n = net.n_nodes();
    let mut rng = Rng::new(derive_seed(7700, 0));
    let data = forward_sample(&net, 2000, &mut rng);
    let config = SearchConfig {
        max_iter: 10_000,
        max_length: 200,
        seed: derive_seed(7700, 1),
        ..Default::default()
    };
    let mut checks = 0u64;
    let mut violation: Option<String> = None;
    search::run_with_observer(&data, &config, |iteration, table| {
        if violation.is_some() {
            return;
        }
        for (_, row) in table.rows_by_stamp() {
            for (op_id, b) in row.stored() {
                if !b.is_finite() {
                    continue; // -inf marks a failed operation, not a benefit
                }
                let op = Operation::from_id(n, op_id);
                if !row.dag().is_applicable(op) {
                    violation = Some(format!(
                        "iteration {iteration}: stored benefit on inapplicable {op:?}"
                    ));
                    return;
                }
                let successor = row.dag().apply(op).expect("applicability just checked");
                let Some(partner) = table.row(&successor.canonical_key()) else { continue };
                let rev_id = reverse_of(op).id(n);
                let Some((_, rb)) = partner.stored().find(|&(id, _)| id == rev_id) else {
                    continue;
                };
                checks += 1;
                if b != -rb {
                    violation = Some(format!(
                        "iteration {iteration}: {op:?} stores {b} but its reverse stores {rb}"
                    ));
                    return;
                }
            }
        }
    })
    .map_err(|e| e.to_string())?;
    if let Some(v) = violation {
        return Err(v);
    }
    ensure!(checks > 0, "no benefit pairs were ever present to compare");
    Ok(format!("{checks} stored pairs antisymmetric across 10000 iterations"))
}

/// Masked operations are never selected over 100000 seeded draws, and the
/// table never reaches its length bound after trimming.
fn c8_masking_and_trim_bound() -> CriterionResult {
    let net = common::load_network("child");
    let n = net.n_nodes();
    let mut rng = Rng::new(derive_seed(8800, 0));
    let data = forward_sample(&net, 1000, &mut rng);
    let config = SearchConfig {
        max_iter: 20_000,
        max_length: 50,
        seed: derive_seed(8800, 1),
        ..Default::default()
    };
    let mut bound_violation = None;
    let mut snapshot = None;
    search::run_with_observer(&data, &config, |iteration, table| {
        if table.len() >= config.max_length && bound_violation.is_none() {
            bound_violation =
                Some(format!("table held {} rows at iteration {iteration}", table.len()));
        }
        if iteration == config.max_iter {
            snapshot = Some(table.snapshot());
        }
    })
    .map_err(|e| e.to_string())?;
    if let Some(v) = bound_violation {
        return Err(v);
    }

    let table = QTable::from_snapshot(&snapshot.expect("observer ran on the final iteration"))
        .map_err(|e| e.to_string())?;
    let rows = table.rows_by_stamp();
    let total = operation_count(n);
    let mut draw_rng = Rng::new(derive_seed(8800, 2));
    let mut masked_rows = 0u32;
    for i in 0..100_000u64 {
        let (_, row) = rows[(i % rows.len() as u64) as usize];
        let explore = [0.0, 0.3, 1.0][(i % 3) as usize];
        match choose_operation(row, &mut draw_rng, explore) {
            Ok(op) => {
                ensure!(
                    !row.is_masked(op.id(n)),
                    "draw {i} returned the masked operation {op:?}"
                );
            }
            Err(_) => {
                ensure!(
                    (0..total as u32).all(|id| row.is_masked(id)),
                    "draw {i} failed although selectable operations remain"
                );
                masked_rows += 1;
            }
        }
    }
    Ok(format!(
        "100000 draws clean over {} rows ({masked_rows} fully-masked draws), bound held",
        rows.len()
    ))
}

/// Forward sampling matches the exact joint marginals on asia at
/// n=50000 within 0.02 absolute per state.
fn c9_sampler_marginals() -> CriterionResult {
    let net = common::load_network("asia");
    let exact = exact_joint_marginals(&net).map_err(|e| e.to_string())?;
    let mut rng = Rng::new(99_099);
    let n_rows = 50_000usize;
    let data = forward_sample(&net, n_rows, &mut rng);
    let mut worst = 0.0f64;
    for (v, marginal) in exact.iter().enumerate() {
        for (k, &p) in marginal.iter().enumerate() {
            let freq = data.column(v).iter().filter(|&&x| x as usize == k).count() as f64
                / n_rows as f64;
            let gap = (freq - p).abs();
            worst = worst.max(gap);
            ensure!(
                gap < 0.02,
                "variable {} state {k}: sampled {freq:.4} vs exact {p:.4}",
                net.variable(v).name
            );
        }
    }
    Ok(format!("worst marginal gap {worst:.4} at n=50000"))
}

/// All six fixtures parse with their classic node/arc counts, and
/// write/parse is a fixed point.
fn c10_fixture_counts_and_fixed_point() -> CriterionResult {
    let expected =
        [("asia", 8, 8), ("sachs", 11, 17), ("child", 20, 25), ("insurance", 27, 52), ("hailfinder", 56, 66), ("win95pts", 76, 112)];
    for (name, nodes, arcs) in expected {
        let text = std::fs::read_to_string(common::fixture(name)).map_err(|e| e.to_string())?;
        let first = parse_bif(&text).map_err(|e| format!("{name}: {e}"))?;
        ensure!(
            first.warnings.is_empty(),
            "{name}: unexpected renormalization {:?}",
            first.warnings
        );
        ensure!(
            first.network.n_nodes() == nodes,
            "{name}: {} nodes, expected {nodes}",
            first.network.n_nodes()
        );
        ensure!(
            first.network.edge_count() == arcs,
            "{name}: {} arcs, expected {arcs}",
            first.network.edge_count()
        );
        let written = write_bif(&first.network);
        let second = parse_bif(&written).map_err(|e| format!("{name} rewrite: {e}"))?;
        ensure!(second.warnings.is_empty(), "{name}: rewrite introduced warnings");
        ensure!(
            second.network == first.network,
            "{name}: rewrite changed the network"
        );
        ensure!(
            write_bif(&second.network) == written,
            "{name}: write is not a fixed point"
        );
    }
    Ok("six fixtures at classic counts, write/parse fixed point".into())
}

/// Two identical sample -> learn -> eval pipelines through the binary
/// produce byte-identical artifacts (timing fields excluded).
fn c11_pipeline_determinism() -> CriterionResult {
    let bin = env!("CARGO_BIN_EXE_rlbayes");
    let asia = std::fs::read(common::fixture("asia")).map_err(|e| e.to_string())?;

    let run_pipeline = |dir: &std::path::Path| -> Result<(Vec<u8>, Vec<u8>, String, Vec<u8>), String> {
        std::fs::write(dir.join("asia.bif"), &asia).map_err(|e| e.to_string())?;
        let steps: [&[&str]; 3] = [
            &["sample", "--network", "asia.bif", "--n", "1000", "--seed", "11", "--out", "data.csv"],
            &["learn", "--data", "data.csv", "--schema", "data.schema.json", "--algo", "rlbayes", "--max-iter", "20000", "--seed", "12", "--out", "run.json"],
            &["eval", "--result", "run.json", "--truth", "asia.bif", "--out", "eval.json"],
        ];
        for args in steps {
            let status = std::process::Command::new(bin)
                .args(args)
                .current_dir(dir)
                .status()
                .map_err(|e| e.to_string())?;
            ensure!(status.success(), "{:?} exited with {status}", args[0]);
        }
        let run_text =
            std::fs::read_to_string(dir.join("run.json")).map_err(|e| e.to_string())?;
        let mut run: serde_json::Value =
            serde_json::from_str(&run_text).map_err(|e| e.to_string())?;
        let removed = run
            .as_object_mut()
            .map(|m| m.remove("runtime_seconds").is_some())
            .unwrap_or(false);
        ensure!(removed, "run record lacks the runtime_seconds field");
        Ok((
            std::fs::read(dir.join("data.csv")).map_err(|e| e.to_string())?,
            std::fs::read(dir.join("data.schema.json")).map_err(|e| e.to_string())?,
            run.to_string(),
            std::fs::read(dir.join("eval.json")).map_err(|e| e.to_string())?,
        ))
    };

    let dir_a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir_b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = run_pipeline(dir_a.path())?;
    let b = run_pipeline(dir_b.path())?;
    ensure!(a.0 == b.0, "datasets differ between identical pipelines");
    ensure!(a.1 == b.1, "schemas differ between identical pipelines");
    ensure!(a.2 == b.2, "run records differ (timing excluded)");
    ensure!(a.3 == b.3, "metrics files differ between identical pipelines");
    Ok("dataset, schema, run record, and metrics byte-identical".into())
}

/// The 76-node fixture runs 50000 iterations within 15 minutes and under
/// 2 GB peak memory, exercising the 17100-operation action space.
fn c12_large_network_smoke() -> CriterionResult {
    let net = common::load_network("win95pts");
    ensure!(
        operation_count(net.n_nodes()) == 17_100,
        "expected a 17100-operation space, got {}",
        operation_count(net.n_nodes())
    );
    let mut rng = Rng::new(derive_seed(1200, 0));
    let data = forward_sample(&net, 2000, &mut rng);
    let started = Instant::now();
    let config = SearchConfig {
        max_iter: 50_000,
        max_length: 500,
        seed: derive_seed(1200, 1),
        ..Default::default()
    };
    let result = search::run(&data, &config).map_err(|e| e.to_string())?;
    let secs = started.elapsed().as_secs_f64();
    ensure!(secs < 900.0, "took {secs:.1}s, budget is 900s");
    ensure!(result.best_dag.n_nodes() == 76, "wrong result arity");

    let status = std::fs::read_to_string("/proc/self/status").map_err(|e| e.to_string())?;
    let hwm_kb: u64 = status
        .lines()
        .find_map(|l| l.strip_prefix("VmHWM:"))
        .and_then(|l| l.trim().strip_suffix("kB"))
        .and_then(|l| l.trim().parse().ok())
        .ok_or("could not read VmHWM from /proc/self/status")?;
    ensure!(
        hwm_kb < 2_000_000,
        "peak memory {hwm_kb} kB exceeds the 2 GB budget"
    );
    Ok(format!("{secs:.1}s, peak memory {} MB", hwm_kb / 1024))
}

// ---------------------------------------------------------------- runner

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> CriterionResult); 12] = [
        ("C1 exhaustive-oracle global optimality", c1_exhaustive_global_optimum),
        ("C2 asia mean F1 band", c2_asia_f1_band),
        ("C3 asia mean AUC band", c3_asia_auc_band),
        ("C4 table-length trend on insurance", c4_table_length_trend),
        ("C5 delta-score oracle", c5_delta_score_oracle),
        ("C6 reverse-operation round trips", c6_reverse_round_trips),
        ("C7 benefit antisymmetry", c7_benefit_antisymmetry),
        ("C8 masking and trim bound", c8_masking_and_trim_bound),
        ("C9 sampler marginals", c9_sampler_marginals),
        ("C10 fixture counts and fixed point", c10_fixture_counts_and_fixed_point),
        ("C11 pipeline determinism", c11_pipeline_determinism),
        ("C12 large-network smoke", c12_large_network_smoke),
    ];

    let mut failures = Vec::new();
    for (name, criterion) in criteria {
        match std::panic::catch_unwind(criterion) {
            Ok(Ok(detail)) => println!("PASS {name} — {detail}"),
            Ok(Err(msg)) => {
                println!("FAIL {name} — {msg}");
                failures.push(name);
            }
            Err(_) => {
                println!("FAIL {name} — panicked");
                failures.push(name);
            }
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
