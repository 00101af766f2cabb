//! Command-line pipeline: simulate survey data, fit the aerial-only,
//! acoustic-only or fused model, score fits against the truth, and run the
//! scenario sweep.

pub mod commands;
pub mod config;
pub mod manifest;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use ppfusion_core::Sources;

pub use commands::PartialSweep;
pub use config::{ConfigError, LoadedConfig, RunConfig};
pub use manifest::{Manifest, MANIFEST_FILE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_PARTIAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "ppfusion", version, about = "Fuse aerial and acoustic surveys of a thinned point process")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for parallel fits (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a true pattern and both survey channels.
    Simulate,
    /// Fit one model by MCMC.
    Fit {
        /// aerial, pam, or fused; overrides `model.sources`.
        #[arg(long)]
        model: Option<Sources>,
        /// Simulation output directory to take the survey data from.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Score posterior samples against the simulated truth.
    Evaluate {
        /// Simulation output directory.
        #[arg(long)]
        truth: PathBuf,
        /// Fit output directory.
        #[arg(long)]
        samples: PathBuf,
    },
    /// Run the scenario design and aggregate it into tables.
    Sweep,
    /// Rebuild sweep tables, or summarize a fit directory.
    Report {
        /// Sweep or fit output directory.
        #[arg(long)]
        input: PathBuf,
    },
}

fn load(cli: &Cli, required: bool) -> Result<LoadedConfig> {
    match &cli.config {
        Some(p) => LoadedConfig::load(p),
        None if required => Err(config::config_error("this command needs --config")),
        None => Ok(LoadedConfig::empty()),
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(config::config_error("--threads must be at least 1"));
        }
        // Already initialised (repeated in-process runs) keeps the old pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Simulate => {
            let cfg = load(cli, true)?;
            commands::simulate(&cfg, cfg.seed(cli.seed)?, &cli.out)
        }
        Command::Fit { model, data } => {
            let cfg = load(cli, true)?;
            commands::fit(&cfg, cfg.seed(cli.seed)?, &cli.out, *model, data.as_deref())
        }
        Command::Evaluate { truth, samples } => {
            let cfg = load(cli, true)?;
            commands::evaluate_fit(&cfg, cfg.seed(cli.seed)?, &cli.out, truth, samples)
        }
        Command::Sweep => {
            let cfg = load(cli, false)?;
            commands::sweep(&cfg, cfg.seed(cli.seed)?, &cli.out)
        }
        Command::Report { input } => {
            let cfg = load(cli, false)?;
            commands::report(cli.seed.or(cfg.config.seed).unwrap_or(0), input, &cli.out)
        }
    }
}

/// Exit status for a failed run: numerical failures and partial sweeps are
/// distinguished from everything the user can fix in the input.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<PartialSweep>() {
            return EXIT_PARTIAL;
        }
        if let Some(e) = cause.downcast_ref::<ppfusion_core::Error>() {
            return if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_CONFIG };
        }
    }
    EXIT_CONFIG
}
