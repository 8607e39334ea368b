//! Implementations of the `rlbayes` binary's subcommands, kept in the
//! library so they can be driven and tested without spawning processes.
//!
//! All randomness flows from explicit seeds, and no wall-clock value
//! other than `runtime_seconds` enters any output, so rerunning a
//! command with the same inputs reproduces its files byte for byte
//! (timing aside).

use crate::baselines::{hill_climb, simulated_anneal, AnnealConfig, HillClimbConfig};
use crate::data::{DataError, Dataset, Schema};
use crate::graph::Dag;
use crate::metrics::{auc_score, confusion, f1_score, shd, ConfusionCounts, MetricsError};
use crate::netio::{parse_bif, BifError, DiscreteNetwork};
use crate::rng::{derive_seed, Rng};
use crate::sampling::forward_sample;
use crate::scoring::ScoreKind;
use crate::search::{self, SearchConfig, SearchCounters, SearchError, SearchResult, TracePoint};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Caller misuse: bad flag values, unknown names. Exit code 1.
    #[error("{0}")]
    Usage(String),
    /// Problems with input files or their contents. Exit code 2.
    #[error("{0}")]
    Data(String),
    /// Violated internal expectations. Exit code 3.
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<BifError> for CliError {
    fn from(e: BifError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::Config(msg) => CliError::Usage(msg),
            SearchError::Data(e) => CliError::Data(e.to_string()),
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn load_network(path: &Path) -> Result<DiscreteNetwork, CliError> {
    let outcome = parse_bif(&read_file(path)?)?;
    for warning in &outcome.warnings {
        eprintln!("warning: {}: {warning}", path.display());
    }
    Ok(outcome.network)
}

fn to_json(value: &impl Serialize) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Internal(format!("serialization failed: {e}")))
}

// ---------------------------------------------------------------- sample

#[derive(Clone, Debug)]
pub struct SampleArgs {
    pub network: PathBuf,
    pub n_rows: u64,
    pub seed: u64,
    pub out: PathBuf,
}

/// Draw rows from a network into `out` as CSV, writing the variable
/// schema alongside it as `<out stem>.schema.json`.
pub fn cmd_sample(args: &SampleArgs) -> Result<(), CliError> {
    if args.n_rows == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let net = load_network(&args.network)?;
    let mut rng = Rng::new(args.seed);
    let dataset = forward_sample(&net, args.n_rows as usize, &mut rng);
    write_file(&args.out, &dataset.write_csv())?;
    let sidecar = args.out.with_extension("schema.json");
    write_file(&sidecar, &(net.schema().to_json() + "\n"))
}

// ----------------------------------------------------------------- learn

#[derive(Clone, Debug)]
pub struct LearnArgs {
    pub data: PathBuf,
    pub schema: Option<PathBuf>,
    pub algo: String,
    pub score: String,
    pub max_iter: u64,
    pub max_length: usize,
    pub theta: f64,
    pub explore: f64,
    pub restarts: u64,
    pub initial_temperature: f64,
    pub cooling: f64,
    pub seed: u64,
    pub out: PathBuf,
}

/// Echo of every learner knob, applicable to the chosen algorithm or
/// not, so a record always documents the full invocation.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LearnConfig {
    pub max_iter: u64,
    pub max_length: usize,
    pub theta: f64,
    pub explore: f64,
    pub restarts: u64,
    pub initial_temperature: f64,
    pub cooling: f64,
}

/// JSON result of `learn`: the structure found, its score, and the run's
/// trace and counters. Edges are written as `source -> target` using
/// variable names.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: String,
    pub score_kind: String,
    pub seed: u64,
    pub config: LearnConfig,
    pub data_path: String,
    pub schema_path: Option<String>,
    pub variables: Vec<String>,
    pub edges: Vec<String>,
    pub score: f64,
    pub counters: SearchCounters,
    pub trace: Vec<TracePoint>,
    pub runtime_seconds: f64,
}

fn edge_names(dag: &Dag, names: &[String]) -> Vec<String> {
    dag.edges().iter().map(|&(s, t)| format!("{} -> {}", names[s], names[t])).collect()
}

pub fn cmd_learn(args: &LearnArgs) -> Result<(), CliError> {
    let score: ScoreKind = args.score.parse().map_err(CliError::Usage)?;
    let schema = match &args.schema {
        Some(path) => Some(Schema::from_json(&read_file(path)?)?),
        None => None,
    };
    let dataset = Dataset::read_csv(&read_file(&args.data)?, schema.as_ref())?;
    if dataset.n_rows() == 0 {
        return Err(CliError::Data(format!("{}: dataset has no rows", args.data.display())));
    }

    let started = Instant::now();
    let result = run_algorithm(
        &args.algo,
        &dataset,
        score,
        &LearnConfig {
            max_iter: args.max_iter,
            max_length: args.max_length,
            theta: args.theta,
            explore: args.explore,
            restarts: args.restarts,
            initial_temperature: args.initial_temperature,
            cooling: args.cooling,
        },
        args.seed,
    )?;
    let runtime_seconds = started.elapsed().as_secs_f64();

    let names: Vec<String> =
        dataset.schema().variables.iter().map(|v| v.name.clone()).collect();
    let record = RunRecord {
        algorithm: args.algo.clone(),
        score_kind: score.to_string(),
        seed: args.seed,
        config: LearnConfig {
            max_iter: args.max_iter,
            max_length: args.max_length,
            theta: args.theta,
            explore: args.explore,
            restarts: args.restarts,
            initial_temperature: args.initial_temperature,
            cooling: args.cooling,
        },
        data_path: args.data.display().to_string(),
        schema_path: args.schema.as_ref().map(|p| p.display().to_string()),
        variables: names.clone(),
        edges: edge_names(&result.best_dag, &names),
        score: result.best_score,
        counters: result.counters,
        trace: result.trace,
        runtime_seconds,
    };
    write_file(&args.out, &to_json(&record)?)
}

fn run_algorithm(
    algo: &str,
    dataset: &Dataset,
    score: ScoreKind,
    config: &LearnConfig,
    seed: u64,
) -> Result<SearchResult, CliError> {
    match algo {
        "rlbayes" => Ok(search::run(
            dataset,
            &SearchConfig {
                max_iter: config.max_iter,
                max_length: config.max_length,
                theta: config.theta,
                explore_probability: config.explore,
                score,
                seed,
            },
        )?),
        "hc" => Ok(hill_climb(dataset, score, &HillClimbConfig { restarts: config.restarts, seed })?),
        "sa" => Ok(simulated_anneal(
            dataset,
            score,
            &AnnealConfig {
                steps: config.max_iter,
                initial_temperature: config.initial_temperature,
                cooling: config.cooling,
                seed,
            },
        )?),
        other => Err(CliError::Usage(format!(
            "unknown algorithm '{other}', expected rlbayes, hc, or sa"
        ))),
    }
}

// ------------------------------------------------------------------ eval

#[derive(Clone, Debug)]
pub struct EvalArgs {
    pub result: PathBuf,
    pub truth: PathBuf,
    pub out: PathBuf,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalRecord {
    pub result_path: String,
    pub truth_path: String,
    pub confusion: ConfusionCounts,
    pub f1: f64,
    pub auc: f64,
    pub shd: u64,
}

/// Compare a run record's structure against a reference network.
pub fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let record: RunRecord = serde_json::from_str(&read_file(&args.result)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.result.display())))?;
    let truth = load_network(&args.truth)?;

    let truth_names: HashSet<&str> =
        (0..truth.n_nodes()).map(|i| truth.variable(i).name.as_str()).collect();
    let record_names: HashSet<&str> = record.variables.iter().map(String::as_str).collect();
    if truth_names != record_names {
        return Err(CliError::Data(format!(
            "run record variables do not match '{}'",
            args.truth.display()
        )));
    }

    let mut edges = Vec::with_capacity(record.edges.len());
    for edge in &record.edges {
        let (s, t) = edge
            .split_once(" -> ")
            .ok_or_else(|| CliError::Data(format!("malformed edge '{edge}'")))?;
        let si = truth
            .var_index(s)
            .ok_or_else(|| CliError::Data(format!("edge endpoint '{s}' is not a variable")))?;
        let ti = truth
            .var_index(t)
            .ok_or_else(|| CliError::Data(format!("edge endpoint '{t}' is not a variable")))?;
        edges.push((si, ti));
    }
    let learned = Dag::from_edges(truth.n_nodes(), &edges)
        .map_err(|e| CliError::Data(format!("recorded edges are not a DAG: {e}")))?;

    let c = confusion(&learned, truth.dag())?;
    let record = EvalRecord {
        result_path: args.result.display().to_string(),
        truth_path: args.truth.display().to_string(),
        confusion: c,
        f1: f1_score(&c),
        auc: auc_score(&c)?,
        shd: shd(&learned, truth.dag()),
    };
    write_file(&args.out, &to_json(&record)?)
}

// ----------------------------------------------------------------- bench

#[derive(Clone, Debug)]
pub struct BenchArgs {
    pub spec: PathBuf,
}

fn default_sample_size() -> u64 {
    2000
}

fn default_repeats() -> u64 {
    10
}

fn default_score() -> String {
    "bic".into()
}

fn default_max_iter() -> u64 {
    100_000
}

fn default_max_length() -> usize {
    500
}

fn default_theta() -> f64 {
    0.01
}

fn default_explore() -> f64 {
    0.5
}

fn default_restarts() -> u64 {
    1
}

fn default_temperature() -> f64 {
    10.0
}

fn default_cooling() -> f64 {
    0.999
}

/// One learner entry of a benchmark specification, tagged by `name`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum AlgorithmSpec {
    Rlbayes {
        #[serde(default = "default_score")]
        score: String,
        #[serde(default = "default_max_iter")]
        max_iter: u64,
        #[serde(default = "default_max_length")]
        max_length: usize,
        #[serde(default = "default_theta")]
        theta: f64,
        #[serde(default = "default_explore")]
        explore: f64,
    },
    Hc {
        #[serde(default = "default_score")]
        score: String,
        #[serde(default = "default_restarts")]
        restarts: u64,
    },
    Sa {
        #[serde(default = "default_score")]
        score: String,
        #[serde(default = "default_max_iter")]
        steps: u64,
        #[serde(default = "default_temperature")]
        initial_temperature: f64,
        #[serde(default = "default_cooling")]
        cooling: f64,
    },
}

impl AlgorithmSpec {
    pub fn label(&self) -> &'static str {
        match self {
            AlgorithmSpec::Rlbayes { .. } => "rlbayes",
            AlgorithmSpec::Hc { .. } => "hc",
            AlgorithmSpec::Sa { .. } => "sa",
        }
    }

    fn score_kind(&self) -> Result<ScoreKind, CliError> {
        let s = match self {
            AlgorithmSpec::Rlbayes { score, .. }
            | AlgorithmSpec::Hc { score, .. }
            | AlgorithmSpec::Sa { score, .. } => score,
        };
        s.parse().map_err(CliError::Usage)
    }
}

/// A benchmark: one reference network, one dataset per repeat (shared by
/// every algorithm for fairness), a list of learners.
#[derive(Clone, Debug, Deserialize)]
pub struct BenchSpec {
    pub network: String,
    #[serde(default = "default_sample_size")]
    pub sample_size: u64,
    #[serde(default = "default_repeats")]
    pub repeats: u64,
    #[serde(default)]
    pub base_seed: u64,
    pub out: String,
    pub algorithms: Vec<AlgorithmSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchRunRecord {
    pub algorithm: String,
    pub repeat: u64,
    pub data_seed: u64,
    pub search_seed: u64,
    pub score: f64,
    pub f1: f64,
    pub auc: f64,
    pub shd: u64,
    pub edge_count: usize,
    pub runtime_seconds: f64,
}

/// Run a benchmark spec: sample datasets, run every algorithm on every
/// repeat, and write a summary CSV (`algorithm,metric,mean,std`) plus the
/// per-run records as `<out stem>.runs.json`.
pub fn cmd_bench(args: &BenchArgs) -> Result<(), CliError> {
    let spec: BenchSpec = serde_json::from_str(&read_file(&args.spec)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.spec.display())))?;
    if spec.repeats == 0 {
        return Err(CliError::Usage("repeats must be at least 1".into()));
    }
    if spec.sample_size == 0 {
        return Err(CliError::Usage("sample_size must be at least 1".into()));
    }
    if spec.algorithms.is_empty() {
        return Err(CliError::Usage("the specification lists no algorithms".into()));
    }

    let net = load_network(Path::new(&spec.network))?;
    let truth = net.dag();

    // Repeat r draws its dataset from substream 2r and searches with
    // substream 2r + 1, so data and search randomness stay uncorrelated.
    let datasets: Vec<(u64, Dataset)> = (0..spec.repeats)
        .map(|r| {
            let data_seed = derive_seed(spec.base_seed, 2 * r);
            let mut rng = Rng::new(data_seed);
            (data_seed, forward_sample(&net, spec.sample_size as usize, &mut rng))
        })
        .collect();

    let mut runs: Vec<BenchRunRecord> = Vec::new();
    for alg in &spec.algorithms {
        let score = alg.score_kind()?;
        for (r, (data_seed, dataset)) in datasets.iter().enumerate() {
            let search_seed = derive_seed(spec.base_seed, 2 * r as u64 + 1);
            let started = Instant::now();
            let result = match *alg {
                AlgorithmSpec::Rlbayes { max_iter, max_length, theta, explore, .. } => {
                    search::run(
                        dataset,
                        &SearchConfig {
                            max_iter,
                            max_length,
                            theta,
                            explore_probability: explore,
                            score,
                            seed: search_seed,
                        },
                    )?
                }
                AlgorithmSpec::Hc { restarts, .. } => {
                    hill_climb(dataset, score, &HillClimbConfig { restarts, seed: search_seed })?
                }
                AlgorithmSpec::Sa { steps, initial_temperature, cooling, .. } => simulated_anneal(
                    dataset,
                    score,
                    &AnnealConfig { steps, initial_temperature, cooling, seed: search_seed },
                )?,
            };
            let runtime_seconds = started.elapsed().as_secs_f64();
            let c = confusion(&result.best_dag, truth)?;
            runs.push(BenchRunRecord {
                algorithm: alg.label().to_string(),
                repeat: r as u64,
                data_seed: *data_seed,
                search_seed,
                score: result.best_score,
                f1: f1_score(&c),
                auc: auc_score(&c)?,
                shd: shd(&result.best_dag, truth),
                edge_count: result.best_dag.edge_count(),
                runtime_seconds,
            });
        }
    }

    let mut csv = String::from("algorithm,metric,mean,std\n");
    for alg in &spec.algorithms {
        let label = alg.label();
        let of_alg: Vec<&BenchRunRecord> =
            runs.iter().filter(|r| r.algorithm == label).collect();
        for (metric, values) in [
            ("score", of_alg.iter().map(|r| r.score).collect::<Vec<f64>>()),
            ("f1", of_alg.iter().map(|r| r.f1).collect()),
            ("auc", of_alg.iter().map(|r| r.auc).collect()),
            ("shd", of_alg.iter().map(|r| r.shd as f64).collect()),
        ] {
            let (mean, std) = mean_std(&values);
            csv.push_str(&format!("{label},{metric},{mean},{std}\n"));
        }
    }
    let out = Path::new(&spec.out);
    write_file(out, &csv)?;
    write_file(&out.with_extension("runs.json"), &to_json(&runs)?)
}

/// Mean and sample standard deviation; a single value has deviation 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    assert!(!values.is_empty(), "no values to summarize");
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, variance.sqrt())
}

// ----------------------------------------------------------------- sweep

#[derive(Clone, Debug)]
pub struct SweepArgs {
    pub network: PathBuf,
    pub param: String,
    pub values: Vec<String>,
    pub n_rows: u64,
    pub max_iter: u64,
    pub checkpoints: u64,
    pub repeats: u64,
    pub seed: u64,
    pub out: PathBuf,
}

/// Sweep the table length bound: for each value, run the search on each
/// repeat's dataset and record the AUC of the best-so-far structure at
/// evenly spaced checkpoints. Output CSV: `param_value,iteration,mean_auc`.
pub fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    if args.param != "max_length" {
        return Err(CliError::Usage(format!(
            "unsupported sweep parameter '{}', only max_length can be swept",
            args.param
        )));
    }
    if args.values.is_empty() {
        return Err(CliError::Usage("--values must list at least one value".into()));
    }
    let mut values = Vec::with_capacity(args.values.len());
    for raw in &args.values {
        let v: usize = raw
            .parse()
            .ok()
            .filter(|&v| v >= 1)
            .ok_or_else(|| CliError::Usage(format!("bad max_length value '{raw}'")))?;
        values.push(v);
    }
    if args.n_rows == 0 || args.max_iter == 0 || args.checkpoints == 0 || args.repeats == 0 {
        return Err(CliError::Usage(
            "--n, --max-iter, --checkpoints, and --repeats must be at least 1".into(),
        ));
    }

    let net = load_network(&args.network)?;
    let truth = net.dag();

    let mut checkpoints: Vec<u64> = (1..=args.checkpoints)
        .map(|k| (k * args.max_iter / args.checkpoints).max(1))
        .collect();
    checkpoints.dedup();
    let checkpoint_set: HashSet<u64> = checkpoints.iter().copied().collect();

    let datasets: Vec<Dataset> = (0..args.repeats)
        .map(|r| {
            let mut rng = Rng::new(derive_seed(args.seed, 2 * r));
            forward_sample(&net, args.n_rows as usize, &mut rng)
        })
        .collect();

    let mut csv = String::from("param_value,iteration,mean_auc\n");
    for &value in &values {
        let mut auc_sums = vec![0.0f64; checkpoints.len()];
        for (r, dataset) in datasets.iter().enumerate() {
            let config = SearchConfig {
                max_iter: args.max_iter,
                max_length: value,
                seed: derive_seed(args.seed, 2 * r as u64 + 1),
                ..Default::default()
            };
            let mut best_at: Vec<Option<Dag>> = vec![None; checkpoints.len()];
            search::run_with_observer(dataset, &config, |iteration, table| {
                if checkpoint_set.contains(&iteration) {
                    let idx = checkpoints.iter().position(|&c| c == iteration).unwrap();
                    best_at[idx] =
                        Some(table.row(table.best_key()).unwrap().dag().clone());
                }
            })?;
            for (idx, dag) in best_at.iter().enumerate() {
                let dag = dag.as_ref().expect("observer visited every checkpoint");
                let c = confusion(dag, truth)?;
                auc_sums[idx] += auc_score(&c)?;
            }
        }
        for (idx, &iteration) in checkpoints.iter().enumerate() {
            let mean = auc_sums[idx] / args.repeats as f64;
            csv.push_str(&format!("{value},{iteration},{mean}\n"));
        }
    }
    write_file(&args.out, &csv)
}
