//! Minimising total mantissa bits under the learned error models.
//!
//! [`solve_mp`] is an exact branch-and-bound over the embedded models.
//! [`smart_tune`] wraps it in the loop that checks each proposal on the real
//! kernel, retrains on failures and excludes them with no-good cuts.
//! [`plus_refine`] and [`fptuning_baseline`] are per-variable binary searches
//! driven by real kernel runs, and [`brute_force_optimum`] is the exhaustive
//! oracle.

mod bnb;
mod tune;

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use bnb::{enumerate_mp, solve_mp, solve_mp_with, SolveReport, SolverOptions};
pub use tune::{
    brute_force_optimum, brute_force_with, fptuning_baseline, plus_refine, refine_with, smart_tune, BruteForceResult, Outcome, SmartTuner,
    TunedResult, DEFAULT_BRUTE_FORCE_CAP, DEFAULT_BUDGET,
};

use crate::config::PrecisionConfig;
use crate::embed::DomainBox;
use crate::error::{Error, Result};
use crate::kernels::{BenchmarkDescriptor, DependencyEdge, EdgeKind};

/// Slack applied when pruning on the regressor's upper bound.
pub const BOUND_SLACK: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct TuningProblem {
    pub bench: BenchmarkDescriptor,
    pub error_target: f64,
    /// `-log10(error_target)`; the regressor must predict at least this.
    pub l_target: f64,
    pub domains: DomainBox,
    pub nogood_cuts: BTreeSet<PrecisionConfig>,
}

impl TuningProblem {
    pub fn edges(&self) -> &[DependencyEdge] {
        &self.bench.edges
    }
}

pub fn build_problem(bench: &BenchmarkDescriptor, error_target: f64, domains: DomainBox) -> Result<TuningProblem> {
    if !(error_target > 0.0) {
        return Err(Error::NonPositiveTarget(error_target));
    }
    if domains.len() != bench.n_var {
        return Err(Error::ConfigLength { expected: bench.n_var, got: domains.len() });
    }
    DomainBox::new(domains.lo.clone(), domains.hi.clone())?;
    Ok(TuningProblem {
        bench: bench.clone(),
        error_target,
        l_target: -error_target.log10(),
        domains,
        nogood_cuts: BTreeSet::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub config: PrecisionConfig,
    /// Total bits.
    pub objective: u64,
    pub predicted_logerr: f64,
    pub classifier_c: u8,
}

/// Slots whose width is fixed by a cast: the minimum of their sources.
pub fn cast_targets(edges: &[DependencyEdge]) -> Vec<usize> {
    let mut t: Vec<usize> = edges.iter().filter(|e| e.kind == EdgeKind::Cast).map(|e| e.destination).collect();
    t.sort_unstable();
    t.dedup();
    t
}

/// Tightens `[lo, hi]` under the dependency edges until nothing changes.
/// Returns `false` when some domain becomes empty.
pub fn propagate(edges: &[DependencyEdge], lo: &mut [u32], hi: &mut [u32]) -> bool {
    loop {
        let mut changed = false;
        for e in edges {
            let d = e.destination;
            match e.kind {
                EdgeKind::Assignment => {
                    let s = e.sources[0];
                    if lo[d] < lo[s] {
                        lo[d] = lo[s];
                        changed = true;
                    }
                    if hi[s] > hi[d] {
                        hi[s] = hi[d];
                        changed = true;
                    }
                }
                EdgeKind::Cast => {
                    let min_lo = e.sources.iter().map(|&s| lo[s]).min().expect("cast has sources");
                    let min_hi = e.sources.iter().map(|&s| hi[s]).min().expect("cast has sources");
                    if lo[d] < min_lo {
                        lo[d] = min_lo;
                        changed = true;
                    }
                    if hi[d] > min_hi {
                        hi[d] = min_hi;
                        changed = true;
                    }
                    if lo[d] > hi[d] {
                        return false;
                    }
                    for &s in &e.sources {
                        if lo[s] < lo[d] {
                            lo[s] = lo[d];
                            changed = true;
                        }
                    }
                    // The minimum must be attained by a source that can reach hi[d].
                    let mut support = e.sources.iter().filter(|&&s| lo[s] <= hi[d]);
                    match (support.next(), support.next()) {
                        (None, _) => return false,
                        (Some(&s), None) if hi[s] > hi[d] => {
                            hi[s] = hi[d];
                            changed = true;
                        }
                        _ => {}
                    }
                }
            }
        }
        if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
            return false;
        }
        if !changed {
            return true;
        }
    }
}

/// Recomputes cast targets and raises assignment destinations until every
/// edge holds. Widths only move where an edge forces them to. Returns `false`
/// if the edges admit no such fixpoint from `bits`.
pub fn repair(edges: &[DependencyEdge], bits: &mut [u32]) -> bool {
    for _ in 0..=4 * (edges.len() + bits.len()) {
        let mut changed = false;
        for e in edges {
            let d = e.destination;
            let want = match e.kind {
                EdgeKind::Assignment => bits[d].max(bits[e.sources[0]]),
                EdgeKind::Cast => e.sources.iter().map(|&s| bits[s]).min().expect("cast has sources"),
            };
            if bits[d] != want {
                bits[d] = want;
                changed = true;
            }
        }
        if !changed {
            return true;
        }
    }
    false
}

pub fn save_result(result: &TunedResult, path: &Path) -> Result<()> {
    crate::learn::save_json(result, path)
}
