//! `stsp`: simulate trait data, fit stable trait models, predict unseen
//! traits and classify documents from the command line.

mod commands;
mod corpus;
mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use stsp_core::fitting::ModelKind;

/// Errors reported by the command-line tool.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] stsp_core::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    /// Process exit code: 2 for bad input, 3 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if !e.is_config() => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "stsp", version, about = "Stable trait models for sparse count data")]
struct Cli {
    /// Number of worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a trait dataset.
    Simulate(SimulateArgs),
    /// Fit a model to a trait dataset by maximum marginal likelihood.
    Fit(FitArgs),
    /// Predict the number of unseen traits in further observations.
    Predict(PredictArgs),
    /// Train per-class models and classify documents.
    Classify(ClassifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Generator {
    Restaurant,
    Zipf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "restaurant")]
    pub generator: Generator,
    /// Number of observations.
    #[arg(long)]
    pub n: u64,
    #[arg(long, default_value_t = 0.3)]
    pub alpha: f64,
    #[arg(long, default_value_t = 60.0)]
    pub c: f64,
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    #[arg(long, default_value_t = 10.0)]
    pub r: f64,
    /// Zipf exponent.
    #[arg(long, default_value_t = 1.5)]
    pub xi: f64,
    /// Zipf truncation; chosen from the tail tolerance when absent.
    #[arg(long)]
    pub k_max: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use the tabulated old-trait sampler with this initial grid size.
    #[arg(long)]
    pub grid_max: Option<usize>,
    /// Output directory for dataset.csv and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
}

/// Model parameters and optimizer settings shared by `fit` and `classify`.
#[derive(Debug, Clone, Args)]
pub struct FitOptions {
    /// Fix alpha at this value.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Fix c at this value.
    #[arg(long)]
    pub c: Option<f64>,
    /// Fix theta at this value.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Fix r at this value.
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of optimizer starts.
    #[arg(long, default_value_t = 5)]
    pub multistart: usize,
    /// Gauss-Laguerre order used for the integrals.
    #[arg(long)]
    pub quad_order: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, value_parser = parse_model)]
    pub model: ModelKind,
    /// Trait CSV with columns obs_id,trait_id,score.
    #[arg(long)]
    pub data: PathBuf,
    /// Number of observations (defaults to the manifest, else the largest id + 1).
    #[arg(long)]
    pub n_obs: Option<usize>,
    /// Fit on the first N observations only.
    #[arg(long)]
    pub train: Option<usize>,
    #[command(flatten)]
    pub options: FitOptions,
    /// Output JSON file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// fit.json written by `stsp fit`.
    #[arg(long)]
    pub fit: PathBuf,
    /// Trait CSV; the first N rows are the training sample.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub n_obs: Option<usize>,
    /// Number of training observations (defaults to the value in the fit file).
    #[arg(long)]
    pub train: Option<usize>,
    /// Comma-separated horizons m.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["m_max", "m_step"])]
    pub m_grid: Option<Vec<u64>>,
    #[arg(long)]
    pub m_max: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub m_step: u64,
    /// Compare with the new traits observed in the rows after the training sample.
    #[arg(long)]
    pub holdout: bool,
    #[arg(long)]
    pub quad_order: Option<usize>,
    /// Output CSV file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long, value_parser = parse_model, default_value = "nb-stsp")]
    pub model: ModelKind,
    /// Directory with one sub-directory of text files per class.
    #[arg(long, requires = "test_dir", conflicts_with_all = ["train_csv", "test_csv"])]
    pub train_dir: Option<PathBuf>,
    #[arg(long, requires = "train_dir")]
    pub test_dir: Option<PathBuf>,
    /// Token counts with columns doc_id,class,token,count.
    #[arg(long, requires = "test_csv")]
    pub train_csv: Option<PathBuf>,
    #[arg(long, requires = "train_csv")]
    pub test_csv: Option<PathBuf>,
    /// Stopword file, one word per line (defaults to a built-in English list).
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// Minimum number of training documents a word must occur in.
    #[arg(long, default_value_t = 3)]
    pub min_doc_freq: u64,
    /// Weight classes by their share of training documents.
    #[arg(long)]
    pub empirical_prior: bool,
    #[command(flatten)]
    pub options: FitOptions,
    /// Output directory for probabilities.csv and summary.json.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse::<ModelKind>().map_err(|e| e.to_string())
}

fn init(cli: &Cli) -> Result<(), CliError> {
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    init(&cli)?;
    match cli.command {
        Command::Simulate(args) => commands::simulate(&args),
        Command::Fit(args) => commands::fit(&args),
        Command::Predict(args) => commands::predict(&args),
        Command::Classify(args) => commands::classify(&args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
