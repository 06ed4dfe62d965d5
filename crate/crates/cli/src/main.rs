//! Command-line pipeline: Gram spectra, penalized fits, tuning, prediction
//! and Sobol indices, plus the g-function benchmark harness.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rkhs_meta::Error;

#[derive(Debug, Parser)]
#[command(name = "rkhs-meta", version, about = "Sparse additive RKHS meta-models and Sobol indices")]
struct Cli {
    /// Optional TOML config file supplying defaults (flags always win).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for parallel sections (default: all cores). Outputs
    /// do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Print per-sweep solver progress.
    #[arg(long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the per-group Gram eigendecompositions and cache them.
    Gram(GramArgs),
    /// Fit the penalized models over a (mu, gamma) grid.
    Fit(FitArgs),
    /// Fit a grid, score it on a test set, and emit the best model.
    Tune(TuneArgs),
    /// Locate the penalty giving at most qmax active groups, then fit the
    /// gamma grid there.
    Qmax(QmaxArgs),
    /// Evaluate a saved model at new points.
    Predict(PredictArgs),
    /// Empirical Sobol indices of a saved model.
    Sobol(SobolArgs),
    /// g-function benchmark: data generation, tuning, index recovery.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Design matrix CSV (n rows, d columns, entries in [0,1]).
    #[arg(long)]
    x: PathBuf,
    /// Response CSV (single column, n rows).
    #[arg(long)]
    y: Option<PathBuf>,
    /// Skip one header row in the input CSVs.
    #[arg(long)]
    header: bool,
}

#[derive(Debug, Args)]
struct KernelArgs {
    /// Kernel: linear, quad, brownian, matern, gaussian.
    #[arg(long)]
    kernel: Option<String>,
    /// Maximum interaction order of the groups.
    #[arg(long)]
    dmax: Option<usize>,
    /// Relative eigenvalue floor for the positive-definiteness correction.
    #[arg(long)]
    tol: Option<f64>,
    /// Disable the eigenvalue correction.
    #[arg(long)]
    no_correction: bool,
}

#[derive(Debug, Args)]
struct SolverArgs {
    /// Maximum sweeps per fit.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Relative criterion-change stopping threshold.
    #[arg(long)]
    crit_tol: Option<f64>,
    /// Relative coefficient-change stopping threshold.
    #[arg(long)]
    par_tol: Option<f64>,
    /// Zero test J* <= gamma instead of J* <= sqrt(n) gamma.
    #[arg(long)]
    paper_literal_zero_test: bool,
}

#[derive(Debug, Args)]
struct GramArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    /// Output cache file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GridArgs {
    /// mu divisors: mu = mu_max / (sqrt(n) * frc), comma-separated.
    #[arg(long, value_delimiter = ',')]
    frc: Option<Vec<f64>>,
    /// gamma grid in decreasing order (0 = group lasso), comma-separated.
    #[arg(long, value_delimiter = ',')]
    gamma: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Reuse a Gram cache written by `gram`.
    #[arg(long)]
    gram: Option<PathBuf>,
    /// Output path document (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TuneArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Test design CSV.
    #[arg(long)]
    xtest: PathBuf,
    /// Test response CSV.
    #[arg(long)]
    ytest: PathBuf,
    /// Reuse a Gram cache written by `gram`.
    #[arg(long)]
    gram: Option<PathBuf>,
    /// Re-run the selected model's descent over all groups (step 2).
    #[arg(long)]
    step_two: bool,
    /// Output directory (error matrix, best model, its Sobol indices).
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct QmaxArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Target number of active groups.
    #[arg(long)]
    qmax: usize,
    /// Bracket width: the search covers [mu_max/rat, mu_max].
    #[arg(long, default_value_t = 100.0)]
    rat: f64,
    /// Maximum bisection steps.
    #[arg(long, default_value_t = 10)]
    num: usize,
    /// Reuse a Gram cache written by `gram`.
    #[arg(long)]
    gram: Option<PathBuf>,
    /// Output directory (probe log, fitted models).
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Saved model document.
    #[arg(long)]
    model: PathBuf,
    /// Points to predict at (CSV, d columns).
    #[arg(long)]
    xtest: PathBuf,
    /// Skip one header row in the input CSV.
    #[arg(long)]
    header: bool,
    /// Leave out the intercept.
    #[arg(long)]
    no_intercept: bool,
    /// Output CSV of predictions.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SobolArgs {
    /// Saved model document.
    #[arg(long)]
    model: PathBuf,
    /// Output CSV (group indices, then per-variable totals).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Observations per repetition (test sets use the same size).
    #[arg(long)]
    n: usize,
    /// Input dimension.
    #[arg(long)]
    d: usize,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Noise standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
    /// g-function coefficients: "canonical" or a comma-separated list.
    #[arg(long, default_value = "canonical")]
    c: String,
    /// Number of repetitions.
    #[arg(long, default_value_t = 10)]
    reps: usize,
    /// Evaluation points for the prediction-error score.
    #[arg(long, default_value_t = 1000)]
    n_eval: usize,
    /// RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (metrics, per-repetition selections, indices).
    #[arg(long)]
    out_dir: PathBuf,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidArgument(_) => 2,
        Error::Io(_) => 3,
        Error::Parse(_) | Error::SchemaMismatch { .. } => 4,
        Error::NumericFailure(_) => 5,
    }
}

fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::InvalidArgument(_) => "invalid-argument",
        Error::Io(_) => "io",
        Error::Parse(_) => "parse",
        Error::SchemaMismatch { .. } => "schema-mismatch",
        Error::NumericFailure(_) => "numeric-failure",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // ignore the error if a pool already exists (e.g. under tests)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let result = match run(&cli) {
        Ok(()) => return ExitCode::SUCCESS,
        Err(e) => e,
    };
    let record = serde_json::json!({
        "error": error_kind(&result),
        "message": result.to_string(),
        "exit": exit_code_for(&result),
    });
    eprintln!("{record}");
    ExitCode::from(exit_code_for(&result))
}

fn run(cli: &Cli) -> rkhs_meta::Result<()> {
    let file = config::load_config(cli.config.as_deref())?;
    let defaults = &file.defaults;
    if cli.threads.is_none() {
        if let Some(threads) = defaults.threads {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
        }
    }
    match &cli.command {
        Command::Gram(args) => commands::gram(args, defaults),
        Command::Fit(args) => commands::fit(args, defaults, cli.verbose),
        Command::Tune(args) => commands::tune(args, defaults, cli.verbose),
        Command::Qmax(args) => commands::qmax(args, defaults, cli.verbose),
        Command::Predict(args) => commands::predict_cmd(args),
        Command::Sobol(args) => commands::sobol_cmd(args),
        Command::Bench(args) => commands::bench(args, defaults, cli.verbose),
    }
}
