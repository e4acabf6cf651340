//! Command-line driver: reads a TOML run config, runs one of the commands
//! and writes tab-separated tables, field files and a run manifest.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod expr;
pub mod table;

use std::path::PathBuf;

use clap::Parser;

pub use commands::{execute, Command, RunReport};
pub use config::Config;
pub use error::CliError;

#[derive(Debug, Clone, Parser)]
#[command(name = "limstrain", version, about = "Limiting-strain solvers and diagnostics")]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum)]
    pub command: Command,
    /// Output directory; overrides `output.dir`.
    #[arg(long, env = "LIMSTRAIN_OUT")]
    pub out: Option<PathBuf>,
    /// Overrides `law.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for the parallel kernels.
    #[arg(long, env = "LIMSTRAIN_THREADS")]
    pub threads: Option<usize>,
}

/// Load the config, apply flag overrides and run.
pub fn run(cli: &Cli) -> Result<RunReport, CliError> {
    let text = std::fs::read_to_string(&cli.config).map_err(|e| CliError::io(&cli.config, e))?;
    let mut config = Config::from_toml(&text)?;
    if let Some(seed) = cli.seed {
        config.law.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output.dir = out.to_string_lossy().into_owned();
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads: must be at least 1".into()));
        }
        // Fails only if a pool already exists; the first setting wins.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let out = PathBuf::from(&config.output.dir);
    execute(&config, cli.command, &out)
}
