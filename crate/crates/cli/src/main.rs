//! `pv`: verify plans with a judge, score the traces, generate synthetic corpora.

mod config;
mod evaluate;
mod gen;
mod plot;
mod verify;

use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

/// Exit statuses are a stable contract for scripts.
pub const EXIT_OK: u8 = 0;
pub const EXIT_FATAL: u8 = 1;
pub const EXIT_PARTIAL: u8 = 2;
pub const EXIT_USAGE: u8 = 64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Fatal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Fatal(_) => EXIT_FATAL,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "pv", version, about = "Iterative judge/planner verification of action plans")]
struct Cli {
    /// Log more (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the judge/planner loop over a corpus and write traces and refined plans.
    Verify(VerifyArgs),
    /// Score traces against annotations and write report.json, report.csv and a convergence plot.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic corpus with injected, recorded errors.
    Gen(GenArgs),
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// TOML file with defaults for any of these options.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory of `.episode.json` files.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Judge backend: `rules`, `llm` or `script:<file>`.
    #[arg(long)]
    pub judge: Option<String>,
    /// Resolve missing-step critiques with `llm` or `script:<file>`.
    /// Without it the run is removal-only.
    #[arg(long)]
    pub inserter: Option<String>,
    #[arg(long)]
    pub max_rounds: Option<usize>,
    /// Do not re-prompt the model once after a malformed reply.
    #[arg(long)]
    pub no_reprompt: bool,
    /// Response cache file (JSON lines).
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Directory for the cache file when `--cache` is not given.
    #[arg(long, env = "PV_CACHE_DIR", hide_env_values = true)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the number of available cores.
    #[arg(long)]
    pub parallelism: Option<usize>,
    #[arg(long, env = "PV_LLM_ENDPOINT")]
    pub endpoint: Option<String>,
    #[arg(long, env = "PV_LLM_MODEL")]
    pub model: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory of trace files written by `verify` (its `traces/` folder).
    #[arg(long)]
    pub traces: PathBuf,
    /// Corpus with annotations; without it only convergence is reported.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Artifacts to write.
    #[arg(long, value_delimiter = ',', default_values = ["json", "csv", "plot"])]
    pub formats: Vec<evaluate::Format>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.10)]
    pub dup_rate: f64,
    #[arg(long, default_value_t = 0.05)]
    pub inv_rate: f64,
    #[arg(long, default_value_t = 0.08)]
    pub irr_rate: f64,
    #[arg(long, default_value_t = 0.05)]
    pub del_rate: f64,
    /// Force at least one injected error per episode.
    #[arg(long)]
    pub require_errors: bool,
    /// Also write `oracle.script.json`, a judge script that flags exactly the truth.
    #[arg(long)]
    pub emit_oracle: bool,
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => tracing::Level::ERROR,
        (false, 0) => tracing::Level::INFO,
        (false, 1) => tracing::Level::DEBUG,
        _ => tracing::Level::TRACE,
    };
    tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .with_target(false)
        .without_time()
        .init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    init_logging(cli.verbose, cli.quiet);
    let result = match cli.command {
        Command::Verify(args) => verify::run(args),
        Command::Evaluate(args) => evaluate::run(args),
        Command::Gen(args) => gen::run(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            tracing::error!("{e}");
            ExitCode::from(e.code())
        }
    }
}
