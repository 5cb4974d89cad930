//! Run configuration: a flat `key = value` file overridden by flags.
//!
//! Recognised keys (all optional):
//!
//! ```text
//! benchmark      = saxpy            # or a comma list for sweep/transfer
//! shape          = 1024             # input shape, e.g. 64x11; kernel default otherwise
//! input_seed     = 1
//! sampling_seed  = 7
//! training_seed  = 0
//! nbit_min       = 2
//! nbit_max       = 52
//! targets        = 1e-1, 1e-5, 1e-10
//! dataset_size   = 1000
//! budget         = 100
//! mode           = smart_plus       # smart, smart_plus, baseline; comma list allowed
//! epochs         = 100
//! batch_size     = 32
//! learning_rate  = 0.001
//! dt_max_depth   = 20
//! node_limit     = 1000000          # per solve; 0 or none for no limit
//! timing         = true             # false writes wall_time_s as 0
//! n_inputs       = 30
//! sizes          = 100, 500, 1000, 2000, 4000
//! heldout        = 1000
//! out            = out
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use prectune::dataset::BitRange;
use prectune::flexnum::{MAX_MANTISSA_BITS, MIN_MANTISSA_BITS};
use prectune::kernels::{Benchmark, Shape};
use prectune::learn::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Smart,
    #[value(name = "smart_plus", alias = "smart-plus")]
    SmartPlus,
    Baseline,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Smart => "smart",
            Mode::SmartPlus => "smart_plus",
            Mode::Baseline => "baseline",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "smart" => Ok(Mode::Smart),
            "smart_plus" => Ok(Mode::SmartPlus),
            "baseline" => Ok(Mode::Baseline),
            other => Err(format!("unknown mode '{other}'")),
        }
    }
}

/// Benchmarks the multi-benchmark commands use when none is given.
pub const DEFAULT_SUITE: [Benchmark; 5] =
    [Benchmark::Fwt, Benchmark::Saxpy, Benchmark::Convolution, Benchmark::Dwt, Benchmark::Correlation];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub benchmarks: Vec<Benchmark>,
    pub shape: Option<Shape>,
    pub input_seed: u64,
    pub sampling_seed: u64,
    pub nbit: BitRange,
    pub targets: Vec<f64>,
    pub dataset_size: usize,
    pub train: TrainConfig,
    pub budget: usize,
    pub modes: Vec<Mode>,
    pub node_limit: Option<u64>,
    pub timing: bool,
    pub n_inputs: usize,
    pub sizes: Vec<usize>,
    pub heldout: usize,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            benchmarks: Vec::new(),
            shape: None,
            input_seed: 1,
            sampling_seed: 7,
            nbit: BitRange::default(),
            targets: vec![1e-1, 1e-5, 1e-10],
            dataset_size: 1000,
            train: TrainConfig::default(),
            budget: 100,
            modes: vec![Mode::SmartPlus],
            node_limit: Some(1_000_000),
            timing: true,
            n_inputs: 30,
            sizes: vec![100, 500, 1000, 2000, 4000],
            heldout: 1000,
            out: PathBuf::from("out"),
        }
    }
}

fn bad(field: &str, value: &str, why: impl fmt::Display) -> CliError {
    CliError::Usage(format!("config field `{field}`: invalid value '{value}': {why}"))
}

fn parse<T: FromStr>(field: &str, value: &str) -> Result<T, CliError>
where
    T::Err: fmt::Display,
{
    value.trim().parse().map_err(|e| bad(field, value, e))
}

fn parse_list<T: FromStr>(field: &str, value: &str) -> Result<Vec<T>, CliError>
where
    T::Err: fmt::Display,
{
    value.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse(field, s)).collect()
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key {
            "benchmark" | "benchmarks" => self.benchmarks = parse_list(key, v)?,
            "shape" => self.shape = Some(parse(key, v)?),
            "input_seed" => self.input_seed = parse(key, v)?,
            "sampling_seed" => self.sampling_seed = parse(key, v)?,
            "training_seed" => self.train.seed = parse(key, v)?,
            "nbit_min" => self.nbit.min = parse(key, v)?,
            "nbit_max" => self.nbit.max = parse(key, v)?,
            "targets" | "target" => self.targets = parse_list(key, v)?,
            "dataset_size" => self.dataset_size = parse(key, v)?,
            "budget" => self.budget = parse(key, v)?,
            "mode" | "modes" => self.modes = parse_list(key, v)?,
            "epochs" => self.train.epochs = parse(key, v)?,
            "batch_size" => self.train.batch_size = parse(key, v)?,
            "learning_rate" => self.train.learning_rate = parse(key, v)?,
            "dt_max_depth" => self.train.dt_max_depth = parse(key, v)?,
            "node_limit" => {
                self.node_limit = match v {
                    "none" | "0" => None,
                    _ => Some(parse(key, v)?),
                }
            }
            "timing" => self.timing = parse(key, v)?,
            "n_inputs" => self.n_inputs = parse(key, v)?,
            "sizes" => self.sizes = parse_list(key, v)?,
            "heldout" => self.heldout = parse(key, v)?,
            "out" => self.out = PathBuf::from(v),
            _ => return Err(CliError::Usage(format!("unknown config field `{key}`"))),
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = RunConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!("{}:{}: expected `key = value`", path.display(), n + 1)));
            };
            cfg.set(key.trim(), value)?;
        }
        Ok(cfg)
    }

    /// Checks cross-field constraints; messages name the offending field.
    pub fn validate(&self) -> Result<(), CliError> {
        let (lo, hi) = (self.nbit.min, self.nbit.max);
        if lo < MIN_MANTISSA_BITS || hi > MAX_MANTISSA_BITS {
            return Err(CliError::Usage(format!(
                "nbit_min/nbit_max must lie in {MIN_MANTISSA_BITS}..={MAX_MANTISSA_BITS}, got {lo}..={hi}"
            )));
        }
        if lo > hi {
            return Err(CliError::Usage(format!("nbit_min ({lo}) exceeds nbit_max ({hi})")));
        }
        if let Some(t) = self.targets.iter().find(|t| !(**t > 0.0)) {
            return Err(CliError::Usage(format!("targets: {t} is not a positive error bound")));
        }
        if self.targets.is_empty() {
            return Err(CliError::Usage("targets: at least one target is required".into()));
        }
        if self.dataset_size == 0 {
            return Err(CliError::Usage("dataset_size must be positive".into()));
        }
        if self.train.batch_size == 0 {
            return Err(CliError::Usage("batch_size must be positive".into()));
        }
        if self.modes.is_empty() {
            return Err(CliError::Usage("mode: at least one mode is required".into()));
        }
        Ok(())
    }

    pub fn seeds_line(&self) -> String {
        format!(
            "# input_seed={} sampling_seed={} training_seed={}",
            self.input_seed, self.sampling_seed, self.train.seed
        )
    }

    /// The single benchmark of a per-benchmark command.
    pub fn single_benchmark(&self) -> Result<Benchmark, CliError> {
        match self.benchmarks.as_slice() {
            [b] => Ok(*b),
            [] => Err(CliError::Usage("benchmark is required".into())),
            _ => Err(CliError::Usage("benchmark: this command takes exactly one".into())),
        }
    }

    pub fn suite(&self) -> Vec<Benchmark> {
        if self.benchmarks.is_empty() {
            DEFAULT_SUITE.to_vec()
        } else {
            self.benchmarks.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_and_errors() {
        let mut c = RunConfig::default();
        c.set("benchmark", "saxpy, fwt").unwrap();
        c.set("targets", "1e-3,1e-7").unwrap();
        c.set("mode", "smart-plus,baseline").unwrap();
        c.set("node_limit", "none").unwrap();
        assert_eq!(c.benchmarks, vec![Benchmark::Saxpy, Benchmark::Fwt]);
        assert_eq!(c.targets, vec![1e-3, 1e-7]);
        assert_eq!(c.modes, vec![Mode::SmartPlus, Mode::Baseline]);
        assert_eq!(c.node_limit, None);
        let e = c.set("nbit_min", "abc").unwrap_err().to_string();
        assert!(e.contains("nbit_min"), "{e}");
        assert!(c.set("colour", "red").unwrap_err().to_string().contains("colour"));
        c.set("nbit_min", "30").unwrap();
        c.set("nbit_max", "4").unwrap();
        assert!(c.validate().unwrap_err().to_string().contains("nbit_min"));
    }
}
