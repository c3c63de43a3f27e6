//! Command-line front end: configuration, subcommands and artifacts.

pub mod artifacts;
pub mod config;
pub mod run;

use std::ffi::OsString;

use clap::{Parser, Subcommand};

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Usage(_) | CliError::Config(_) => 2,
        }
    }
}

impl From<spdelab_core::Error> for CliError {
    fn from(e: spdelab_core::Error) -> Self {
        match e {
            spdelab_core::Error::Config(_) | spdelab_core::Error::Precondition(_) => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("i/o: {e}"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "spdelab", version, about = "Spectral SPDE experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// Configuration file (flat TOML).
    #[arg(long)]
    pub config: String,
    /// Override one configuration key, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory; overrides `out` in the configuration.
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate (H1)-(H6) and the exponent table.
    Hypcheck(Common),
    /// Empirical covariance of generated noise against the spectral sum.
    NoiseTest(Common),
    /// One trajectory at the output times.
    Simulate(Common),
    /// Ensemble at the probe, kernel density estimate and positivity check.
    Density(Common),
    /// Increment moments and fitted Hölder exponent.
    Hoelder(Common),
    /// Localization statistic against σ(u(t, x*)).
    Localize(Common),
    /// Linear-case variance against the isometry oracle.
    Oracle(Common),
}

/// Parse arguments, run, print errors; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run::dispatch(&cli.command) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
