use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid format: mantissa_bits={mantissa_bits}, exponent_bits={exponent_bits}")]
    InvalidFormat { mantissa_bits: u32, exponent_bits: u32 },

    #[error("unknown benchmark `{0}`")]
    UnknownBenchmark(String),

    #[error("invalid shape for {benchmark}: {reason}")]
    InvalidShape { benchmark: String, reason: String },

    #[error("invalid input set for {benchmark}: {reason}")]
    InvalidInput { benchmark: String, reason: String },

    #[error("configuration has {got} entries, expected {expected}")]
    ConfigLength { expected: usize, got: usize },

    #[error("bit-width {value} at slot {slot} outside [{lo}, {hi}]")]
    BitsOutOfRange { slot: usize, value: u32, lo: u32, hi: u32 },

    #[error("invalid range: lo={lo} > hi={hi}")]
    InvalidRange { lo: u32, hi: u32 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("need at least {needed} samples, have {have}: {what}")]
    InsufficientData { what: &'static str, needed: usize, have: usize },

    #[error("model input width {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },

    #[error("error target must be positive, got {0}")]
    NonPositiveTarget(f64),

    #[error("search space of {size} points exceeds cap {cap}")]
    CapExceeded { size: u128, cap: u128 },

    #[error("all-max configuration has error {error:e} above target {target:e}")]
    InfeasibleAtMax { error: f64, target: f64 },

    #[error("{}: line {line}, column {column}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, column: usize, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
