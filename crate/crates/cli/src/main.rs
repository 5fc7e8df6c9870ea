//! `mlplug`: command-line driver for constrained multi-label plug-in
//! classification experiments.
//!
//! Exit status is 0 on success, 1 on invalid input and 2 when a checked
//! property fails (the witness is printed to stderr as JSON).

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "mlplug",
    version,
    about = "Constrained multi-label plug-in classification toolkit"
)]
struct Cli {
    /// Worker threads for Monte Carlo work (default: available parallelism).
    /// Output does not depend on this value.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Apply a decision rule to each CSV row of probabilities and print 0/1 rows.
    Predict(PredictArgs),
    /// Compare closed-form rules against exhaustive search on random vectors.
    OracleCheck(OracleCheckArgs),
    /// Population false-negative risk of an oracle or plug-in classifier.
    Risk(RiskArgs),
    /// Margin, sparsity, embedding and ordering diagnostics as a JSON report.
    Assumptions(AssumptionsArgs),
    /// Plug-in excess risk over a grid of sample sizes, with a fitted slope.
    Rates(RatesArgs),
    /// Two-point inconsistency demonstration without a global margin.
    Lowerbound(LowerboundArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RuleKind {
    /// The K labels with the largest scores.
    #[value(alias = "topk")]
    TopK,
    /// Longest prefix whose expected false positives stay within beta.
    Beta,
    /// Budget rule capped at K labels.
    Mixed,
    /// Every label.
    Full,
}

#[derive(Debug, Clone, Args)]
struct RuleArgs {
    /// Decision rule.
    #[arg(long, value_enum)]
    rule: RuleKind,
    /// Label count for top-k and mixed rules.
    #[arg(long)]
    k: Option<usize>,
    /// False-positive budget for beta and mixed rules.
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Debug, Clone, Args)]
struct EstimatorArgs {
    /// Noise decay exponent: per-label noise is c0 * N^(-gamma/2).
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Noise scale at N = 1.
    #[arg(long, default_value_t = 0.5)]
    c0: f64,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[command(flatten)]
    rule: RuleArgs,
    /// Headerless CSV of probability rows (default: stdin).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Destination for 0/1 rows (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OracleCheckArgs {
    /// Number of labels (at most 20).
    #[arg(long = "L", value_name = "L")]
    labels: usize,
    /// Random probability vectors to test.
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ClassifierKind {
    /// The rule applied to the true regression vector.
    Oracle,
    /// The rule applied to a noisy estimate at sample size --n.
    PlugIn,
}

#[derive(Debug, Args)]
struct RiskArgs {
    /// Distribution spec (JSON).
    #[arg(long)]
    dist: PathBuf,
    #[command(flatten)]
    rule: RuleArgs,
    #[arg(long, value_enum, default_value_t = ClassifierKind::Oracle)]
    classifier: ClassifierKind,
    /// Training sample size for the plug-in noise model.
    #[arg(long, default_value_t = 1024)]
    n: u64,
    #[command(flatten)]
    estimator: EstimatorArgs,
    /// Also report the pairwise excess bound for exactly k-sparse predictions.
    #[arg(long)]
    pairwise_k: Option<usize>,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON report destination (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AssumptionsArgs {
    /// Distribution spec (JSON).
    #[arg(long)]
    dist: PathBuf,
    /// Budget for the local/global margin and embedding checks.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Rank for the top-k margin check (skipped when absent).
    #[arg(long)]
    k: Option<usize>,
    /// Comma-separated increasing delta values (default: 31 log-spaced points in [1e-3, 1]).
    #[arg(long, value_delimiter = ',')]
    delta_grid: Option<Vec<f64>>,
    /// Declared sparsity constant S (default: the distribution's closed-form bound).
    #[arg(long)]
    sparsity_bound: Option<f64>,
    /// Sample size for the embedding and ordering checks.
    #[arg(long, default_value_t = 256)]
    n: u64,
    #[command(flatten)]
    estimator: EstimatorArgs,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RatesArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's master_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's replicate count.
    #[arg(long)]
    replicates: Option<usize>,
    /// Overrides the config's Monte Carlo sample count.
    #[arg(long)]
    samples: Option<usize>,
    /// CSV destination (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Summary JSON with per-N means and the fitted slope.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LowerboundArgs {
    /// Comma-separated increasing sample sizes (default: 2^7..2^13).
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<u64>>,
    #[arg(long, default_value_t = 2000)]
    replicates: usize,
    /// Number of labels.
    #[arg(long, default_value_t = 4)]
    labels: usize,
    #[command(flatten)]
    estimator: EstimatorArgs,
    /// Target for the Pinsker bound when choosing the separation.
    #[arg(long, default_value_t = 0.5)]
    tv_target: f64,
    /// Random decision profiles for the floor check.
    #[arg(long, default_value_t = 1000)]
    profiles: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    summary: Option<PathBuf>,
}

fn run(cli: Cli) -> error::CliResult<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::invalid("--threads", "must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::invalid("--threads", e))?;
    }
    match cli.command {
        Command::Predict(a) => commands::predict(a),
        Command::OracleCheck(a) => commands::oracle_check(a),
        Command::Risk(a) => commands::risk(a),
        Command::Assumptions(a) => commands::assumptions(a),
        Command::Rates(a) => commands::rates(a),
        Command::Lowerbound(a) => commands::lowerbound(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Violation { witness, .. } = &e {
                eprintln!(
                    "{}",
                    serde_json::to_string_pretty(witness).unwrap_or_default()
                );
            }
            ExitCode::from(e.exit_code())
        }
    }
}
