//! Command-line driver: algebra verification, shift sweeps, Monte-Carlo
//! ensembles and Husimi grid export.
//!
//! Exit codes: 0 success, 1 bad arguments or invalid experiment file,
//! 2 failed algebra check, 3 truncation failure, 4 post-selection orthogonal
//! to pre-selection, 5 no accepted ensemble samples.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod error;
pub mod report;

pub use error::CliError;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "WEAKMETER_THREADS";

#[derive(Debug, Parser)]
#[command(name = "weakmeter", version, about = "Weak-measurement laboratory on a truncated Fock space")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the sl(2,R) commutators and fractional Fourier identities.
    VerifyAlgebra {
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(long, default_value_t = 8)]
        buffer: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact and first-order pointer shifts for every coupling strength.
    Run {
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also run the algebra checks at the resolved dimension.
        #[arg(long)]
        algebra: bool,
    },
    /// Monte-Carlo ensemble of post-selected pointer readouts.
    Ensemble {
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        samples: Option<u64>,
        /// Write accepted pointer values, one per line.
        #[arg(long)]
        samples_csv: Option<PathBuf>,
    },
    /// Husimi density grid of the initial or post-selected meter.
    Husimi {
        spec: PathBuf,
        #[arg(long, value_enum)]
        stage: commands::Stage,
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON report with axes, centroid and normalization.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {value:?}")))?;
    // a pool may already exist when called twice in one process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn execute(command: Command) -> Result<(), CliError> {
    configure_threads()?;
    match command {
        Command::VerifyAlgebra { dim, buffer, out } => {
            commands::verify_algebra(dim, buffer, out.as_deref()).map(drop)
        }
        Command::Run { spec, out, algebra } => commands::run(&spec, out.as_deref(), algebra).map(drop),
        Command::Ensemble {
            spec,
            out,
            seed,
            samples,
            samples_csv,
        } => commands::ensemble(commands::EnsembleArgs {
            spec: &spec,
            out: out.as_deref(),
            seed,
            samples,
            samples_csv: samples_csv.as_deref(),
        })
        .map(drop),
        Command::Husimi {
            spec,
            stage,
            out,
            report,
        } => commands::husimi(&spec, stage, &out, report.as_deref()).map(drop),
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
