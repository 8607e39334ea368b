use clap::{Parser, Subcommand};
use rlbayes::cli::{
    cmd_bench, cmd_eval, cmd_learn, cmd_sample, cmd_sweep, BenchArgs, EvalArgs, LearnArgs,
    SampleArgs, SweepArgs,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "rlbayes", version, about = "Bayesian network structure learning benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw rows from a BIF network into a CSV file (plus schema sidecar)
    Sample {
        /// BIF network to sample from
        #[arg(long)]
        network: PathBuf,
        /// Number of rows
        #[arg(long, default_value_t = 2000)]
        n: u64,
        /// RNG seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
    },
    /// Learn a network structure from CSV data; writes a JSON run record
    Learn {
        /// Training data CSV
        #[arg(long)]
        data: PathBuf,
        /// Variable schema JSON (defaults to integer-coded columns)
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Algorithm: rlbayes, hc, or sa
        #[arg(long, default_value = "rlbayes")]
        algo: String,
        /// Score: ll, aic, or bic
        #[arg(long, default_value = "bic")]
        score: String,
        /// Search iterations (rlbayes) or steps (sa)
        #[arg(long, default_value_t = 100_000)]
        max_iter: u64,
        /// Bound on the number of structures kept in the table (rlbayes)
        #[arg(long, default_value_t = 500)]
        max_length: usize,
        /// Probability of jumping to the best-scored structure (rlbayes)
        #[arg(long, default_value_t = 0.01)]
        theta: f64,
        /// Probability of choosing the next operation at random (rlbayes)
        #[arg(long, default_value_t = 0.5)]
        explore: f64,
        /// Random restarts (hc)
        #[arg(long, default_value_t = 1)]
        restarts: u64,
        /// Starting temperature (sa)
        #[arg(long, default_value_t = 10.0)]
        initial_temp: f64,
        /// Geometric cooling factor per step (sa)
        #[arg(long, default_value_t = 0.999)]
        cooling: f64,
        /// RNG seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output JSON path
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a learn result against a reference network
    Eval {
        /// Run record JSON produced by learn
        #[arg(long)]
        result: PathBuf,
        /// Reference BIF network
        #[arg(long)]
        truth: PathBuf,
        /// Output JSON path
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a benchmark specification (JSON) end to end
    Bench {
        /// Benchmark specification JSON
        #[arg(long)]
        spec: PathBuf,
    },
    /// Sweep max_length and record AUC at checkpoints
    Sweep {
        /// Reference BIF network
        #[arg(long)]
        network: PathBuf,
        /// Parameter to sweep (only max_length)
        #[arg(long)]
        param: String,
        /// Comma-separated parameter values
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        /// Rows to sample per repeat
        #[arg(long, default_value_t = 2000)]
        n: u64,
        /// Search iterations per run
        #[arg(long, default_value_t = 100_000)]
        max_iter: u64,
        /// Number of evenly spaced measurement points
        #[arg(long, default_value_t = 10)]
        checkpoints: u64,
        /// Repeats per parameter value
        #[arg(long, default_value_t = 3)]
        repeats: u64,
        /// Base RNG seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code =
                if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                    0
                } else {
                    1
                };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let result = match cli.command {
        Command::Sample { network, n, seed, out } => {
            cmd_sample(&SampleArgs { network, n_rows: n, seed, out })
        }
        Command::Learn {
            data,
            schema,
            algo,
            score,
            max_iter,
            max_length,
            theta,
            explore,
            restarts,
            initial_temp,
            cooling,
            seed,
            out,
        } => cmd_learn(&LearnArgs {
            data,
            schema,
            algo,
            score,
            max_iter,
            max_length,
            theta,
            explore,
            restarts,
            initial_temperature: initial_temp,
            cooling,
            seed,
            out,
        }),
        Command::Eval { result, truth, out } => cmd_eval(&EvalArgs { result, truth, out }),
        Command::Bench { spec } => cmd_bench(&BenchArgs { spec }),
        Command::Sweep { network, param, values, n, max_iter, checkpoints, repeats, seed, out } => {
            cmd_sweep(&SweepArgs {
                network,
                param,
                values,
                n_rows: n,
                max_iter,
                checkpoints,
                repeats,
                seed,
                out,
            })
        }
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
