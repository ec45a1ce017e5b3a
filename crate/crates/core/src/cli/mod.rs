//! Experiment driver: TOML config in, CSV/JSON out.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::Parser;

pub use commands::{accuracy_table, efficiency_table, execute, predict, simulate, Artifact};
pub use config::{Command, ExperimentConfig};

use crate::error::{Error, Result};

/// Environment variable consulted when `--threads` is absent.
pub const THREADS_ENV: &str = "ONEBIT_SPRT_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "onebit-sprt",
    version,
    about = "Sequential detection experiments on one-bit receiver data"
)]
pub struct Args {
    /// Experiment file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; without it the primary result goes to stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Monte-Carlo trials per hypothesis.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads, 0 = one per core.
    #[arg(long, env = THREADS_ENV)]
    pub threads: Option<usize>,
}

impl Args {
    /// Loads the config and applies flag overrides.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut config = ExperimentConfig::load(&self.config)?;
        if let Some(t) = self.trials {
            config.test.trials = t;
        }
        if let Some(s) = self.seed {
            config.test.master_seed = s;
        }
        if let Some(n) = self.threads {
            config.test.workers = n;
        }
        if self.output.is_some() {
            config.output = self.output.clone();
        }
        config.validate()?;
        Ok(config)
    }
}

pub fn run(args: &Args) -> Result<()> {
    let config = args.resolve()?;
    if config.test.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.test.workers)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let artifacts = execute(&config)?;
    commands::emit(&artifacts, config.output.as_deref())
}
