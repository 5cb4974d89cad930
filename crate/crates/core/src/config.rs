use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flexnum::{MAX_MANTISSA_BITS, MIN_MANTISSA_BITS};

/// Mantissa bit-width for every precision slot of a kernel.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PrecisionConfig {
    pub bits: Vec<u32>,
}

impl PrecisionConfig {
    pub fn new(bits: Vec<u32>) -> Self {
        PrecisionConfig { bits }
    }

    pub fn uniform(n: usize, bits: u32) -> Self {
        PrecisionConfig { bits: vec![bits; n] }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn total_bits(&self) -> u64 {
        self.bits.iter().map(|&b| b as u64).sum()
    }

    pub fn check_len(&self, expected: usize) -> Result<()> {
        if self.bits.len() != expected {
            return Err(Error::ConfigLength { expected, got: self.bits.len() });
        }
        Ok(())
    }

    pub fn check_range(&self, lo: u32, hi: u32) -> Result<()> {
        for (slot, &value) in self.bits.iter().enumerate() {
            if value < lo || value > hi {
                return Err(Error::BitsOutOfRange { slot, value, lo, hi });
            }
        }
        Ok(())
    }

    /// Length and global mantissa range check used before running a kernel.
    pub fn validate(&self, expected: usize) -> Result<()> {
        self.check_len(expected)?;
        self.check_range(MIN_MANTISSA_BITS, MAX_MANTISSA_BITS)
    }
}

impl From<Vec<u32>> for PrecisionConfig {
    fn from(bits: Vec<u32>) -> Self {
        PrecisionConfig { bits }
    }
}

impl fmt::Display for PrecisionConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, b) in self.bits.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{b}")?;
        }
        write!(f, "]")
    }
}
