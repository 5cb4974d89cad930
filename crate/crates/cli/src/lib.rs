//! `prectune` command-line front end.
//!
//! Exit codes: 0 on success, 1 when a tuning target is not met, 2 on usage,
//! configuration or I/O errors.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{Mode, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] prectune::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        2
    }
}

#[derive(Debug, Parser)]
#[command(name = "prectune", version, about = "Mantissa-width tuning with learned error models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by the run commands; each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Benchmark name; repeat (or comma-separate) for sweep and transfer.
    #[arg(long, value_delimiter = ',')]
    pub benchmark: Vec<String>,
    /// Input shape, e.g. `1024` or `64x11`.
    #[arg(long)]
    pub shape: Option<String>,
    /// Error target; repeatable.
    #[arg(long, value_delimiter = ',')]
    pub target: Vec<f64>,
    #[arg(long)]
    pub nbit_min: Option<u32>,
    #[arg(long)]
    pub nbit_max: Option<u32>,
    #[arg(long)]
    pub dataset_size: Option<usize>,
    #[arg(long)]
    pub seed_input: Option<u64>,
    #[arg(long)]
    pub seed_sampling: Option<u64>,
    #[arg(long)]
    pub seed_training: Option<u64>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Nodes per solve; 0 for no limit.
    #[arg(long)]
    pub node_limit: Option<u64>,
    /// Write wall_time_s as 0 so reruns produce identical files.
    #[arg(long)]
    pub no_timing: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample configurations and measure their error.
    Dataset(Common),
    /// Train the regressor and classifier and report held-out metrics.
    Train {
        #[command(flatten)]
        common: Common,
        /// Existing dataset CSV to train on instead of sampling a new one.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Tune for each target and write per-target results and a summary CSV.
    Tune {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, value_delimiter = ',')]
        mode: Vec<Mode>,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Regressor RMSE and classifier accuracy against training-set size.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long)]
        heldout: Option<usize>,
    },
    /// Tune on one input set and count target violations on others.
    Transfer {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_inputs: Option<usize>,
    },
    /// Round a result's widths up to available hardware mantissa widths.
    SnapHw {
        /// Result JSON written by `tune` or `oracle`.
        #[arg(long)]
        result: PathBuf,
        /// Available mantissa widths, e.g. `3,7,10,23`.
        #[arg(long, value_delimiter = ',', default_value = "3,7,10,23,52")]
        formats: Vec<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive search for the true optimum over the bit range.
    Oracle(Common),
}

impl Common {
    /// Config file (if any) with flags applied on top.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if !self.benchmark.is_empty() {
            cfg.set("benchmark", &self.benchmark.join(","))?;
        }
        if let Some(s) = &self.shape {
            cfg.set("shape", s)?;
        }
        if !self.target.is_empty() {
            cfg.targets = self.target.clone();
        }
        let numeric: [(&str, Option<String>); 9] = [
            ("nbit_min", self.nbit_min.map(|v| v.to_string())),
            ("nbit_max", self.nbit_max.map(|v| v.to_string())),
            ("dataset_size", self.dataset_size.map(|v| v.to_string())),
            ("input_seed", self.seed_input.map(|v| v.to_string())),
            ("sampling_seed", self.seed_sampling.map(|v| v.to_string())),
            ("training_seed", self.seed_training.map(|v| v.to_string())),
            ("budget", self.budget.map(|v| v.to_string())),
            ("epochs", self.epochs.map(|v| v.to_string())),
            ("node_limit", self.node_limit.map(|v| v.to_string())),
        ];
        for (key, value) in numeric {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        if self.no_timing {
            cfg.timing = false;
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
