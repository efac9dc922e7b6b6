//! `si-forge`: build synthetic robustness datasets, score predictions on them
//! and analyze metric tables.
//!
//! [`run`] is the whole program; `main` only forwards `argv` and the exit
//! code. Errors are printed as one line,
//! `si-forge: error: <category>/<kind>: <message>`, with exit code 1 for
//! usage, 2 for data and 3 for internal failures.

pub mod analyze;
pub mod error;
pub mod evaluate;
pub mod generate;
pub mod ingest;
pub mod output;
pub mod render;
pub mod report;

use std::ffi::OsString;

use clap::{Parser, Subcommand};

pub use error::{Category, CliError, CliResult};
use si_forge_core::sweep::DEFAULT_SEED;

pub const SEED_ENV: &str = "SI_FORGE_SEED";

#[derive(Debug, Parser)]
#[command(name = "si-forge", version, about = "Synthetic object-on-background robustness datasets and metric analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Index foreground cut-outs and backgrounds into an asset manifest.
    Ingest(ingest::IngestArgs),
    /// Render a preset sweep into a dataset directory.
    Generate(generate::GenerateArgs),
    /// Re-apply an in-image threshold to an existing dataset.
    Refilter(generate::RefilterArgs),
    /// Score predictions: accuracy, pm-k, mCE, heatmaps, profiles, deltas.
    Evaluate(evaluate::EvaluateArgs),
    /// Correlations, discriminability and residual PCA on a metrics table.
    Analyze(analyze::AnalyzeArgs),
    /// Render a matrix or grid report as a PNG heatmap.
    Report(report::ReportArgs),
}

/// Seed precedence: flag, then config file, then `SI_FORGE_SEED`, then the
/// built-in default.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> CliResult<u64> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::config(format!("{SEED_ENV}='{v}' is not a non-negative integer"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

/// Runs `f` on a pool of `jobs` threads, or the global pool if unset.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    match jobs {
        Some(0) => Err(CliError::usage("--jobs must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| CliError::internal(format!("thread pool: {e}"))),
        None => Ok(f()),
    }
}

pub fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Ingest(a) => ingest::run(a),
        Command::Generate(a) => generate::run(a),
        Command::Refilter(a) => generate::run_refilter(a),
        Command::Evaluate(a) => evaluate::run(a),
        Command::Analyze(a) => analyze::run(a),
        Command::Report(a) => report::run(a),
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            let msg = first.strip_prefix("error: ").unwrap_or(first);
            eprintln!("{}", CliError::usage(msg).line());
            return 1;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.line());
            e.category.exit_code()
        }
    }
}

/// Splits a comma-separated flag value, dropping empty items.
pub(crate) fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(String::from).collect()
}
