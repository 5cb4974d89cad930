//! Mantissa-width tuning for numerical kernels.
//!
//! The crate is organised bottom-up:
//!
//! - [`flexnum`]: reduced-precision arithmetic emulated on `f64`.
//! - [`kernels`]: the benchmark kernels, their precision slots and dependency graphs.
//! - [`dataset`]: Latin-hypercube sampling of configurations and error measurement.
//! - [`learn`]: the error regressor (MLP) and large-error classifier (decision tree).
//! - [`embed`]: box-level bounds of both models for use inside a search.
//! - [`solve`]: branch-and-bound, the retrain-and-cut loop, binary-search refinement,
//!   the generate-and-test baseline and an exhaustive oracle.

pub mod config;
pub mod dataset;
pub mod embed;
pub mod error;
pub mod flexnum;
pub mod kernels;
pub mod learn;
pub mod solve;

pub use error::{Error, Result};
