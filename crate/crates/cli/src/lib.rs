//! Command-line front end: `simulate`, `fit-measurement`, `fit`, `summarize`
//! and `check-feasible`, each driven by a JSON config.
//!
//! Exit codes: 0 on success, 2 for invalid input or configuration, 3 when a
//! valid run fails.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Worker threads; unset or 0 lets rayon decide.
pub const WORKERS_ENV: &str = "CORRGRESS_WORKERS";

#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    Runtime(String),
}

impl CliError {
    pub fn invalid(e: impl fmt::Display) -> Self {
        Self::Invalid(e.to_string())
    }

    pub fn runtime(e: impl fmt::Display) -> Self {
        Self::Runtime(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Invalid(_) => EXIT_INVALID,
            Self::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Invalid(m) => write!(f, "invalid input: {m}"),
            Self::Runtime(m) => write!(f, "run failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

#[derive(Debug, Parser)]
#[command(name = "corrgress", version, about = "Covariate-dependent latent correlation models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate items and covariates from known parameters.
    Simulate {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit the first-step measurement model on each class side.
    FitMeasurement {
        #[command(flatten)]
        io: IoArgs,
    },
    /// Run the structural sampler.
    Fit {
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Posterior summaries, convergence and fitted quantities of a fit.
    Summarize {
        #[command(flatten)]
        io: IoArgs,
    },
    /// Check a correlation coefficient matrix against a test set.
    CheckFeasible {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct IoArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overwrite existing output files.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
}

fn workers() -> Result<usize, CliError> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(0),
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::invalid(format!("{WORKERS_ENV} must be a non-negative integer, got {v:?}"))),
    }
}

/// Runs one command line and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("corrgress: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers()?)
        .build()
        .map_err(CliError::runtime)?;
    pool.install(|| match cli.command {
        Command::Simulate { io, seed } => commands::simulate(&io, seed),
        Command::FitMeasurement { io } => commands::fit_measurement(&io),
        Command::Fit { io, run } => commands::fit(&io, &run),
        Command::Summarize { io } => commands::summarize(&io),
        Command::CheckFeasible { config } => commands::check_feasible(&config),
    })
}

/// Creates `dir` and returns the output paths, refusing to replace existing
/// files unless `force` is set. All outputs are checked before any is written.
pub fn output_paths(dir: &Path, names: &[&str], force: bool) -> Result<Vec<PathBuf>, CliError> {
    let paths: Vec<PathBuf> = names.iter().map(|n| dir.join(n)).collect();
    if !force {
        if let Some(p) = paths.iter().find(|p| p.exists()) {
            return Err(CliError::invalid(format!(
                "{} exists; pass --force to overwrite",
                p.display()
            )));
        }
    }
    std::fs::create_dir_all(dir).map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))?;
    Ok(paths)
}
