//! Depth-first branch-and-bound over integer bit-width domains.

use super::tune::refine_with;
use super::{cast_targets, propagate, Solution, TuningProblem, BOUND_SLACK};
use crate::config::PrecisionConfig;
use crate::dataset::BitRange;
use crate::embed::{dt_box_status, nn_output_bounds, BoxStatus, DomainBox};
use crate::error::{Error, Result};
use crate::kernels::DependencyEdge;
use crate::learn::{DtModel, MlpModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Boxes whose regressor upper bound is below `l_target - slack` are pruned.
    pub slack: f64,
    /// Stop after this many nodes and return the incumbent, flagged incomplete.
    pub node_limit: Option<u64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { slack: BOUND_SLACK, node_limit: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub solution: Option<Solution>,
    pub nodes: u64,
    /// `false` if the node limit stopped the search before optimality was proven.
    pub complete: bool,
}

fn check_arity(p: &TuningProblem, reg: &MlpModel, cls: &DtModel) -> Result<()> {
    let n = p.bench.n_var;
    if reg.input_width() != n {
        return Err(Error::WidthMismatch { expected: n, got: reg.input_width() });
    }
    if cls.n_features != n {
        return Err(Error::WidthMismatch { expected: n, got: cls.n_features });
    }
    Ok(())
}

/// Exact minimum of total bits under the models, dependencies and cuts,
/// or `None` if no configuration qualifies.
pub fn solve_mp(p: &TuningProblem, reg: &MlpModel, cls: &DtModel) -> Result<Option<Solution>> {
    Ok(solve_mp_with(p, reg, cls, &SolverOptions::default())?.solution)
}

/// Branches on the free variable with the widest domain (lowest index on
/// ties), bisecting it and exploring the lower half first. Cast targets are
/// only branched on once every other variable is fixed.
pub fn solve_mp_with(p: &TuningProblem, reg: &MlpModel, cls: &DtModel, opts: &SolverOptions) -> Result<SolveReport> {
    check_arity(p, reg, cls)?;
    let edges = p.edges();
    let mut derived = vec![false; p.bench.n_var];
    for t in cast_targets(edges) {
        derived[t] = true;
    }
    let mut best = greedy_incumbent(p, reg, cls)?;
    let mut best_z = best.as_ref().map_or(u64::MAX, |s| s.objective);
    let mut nodes = 0u64;
    let mut stack = vec![p.domains.clone()];

    while let Some(mut node) = stack.pop() {
        if opts.node_limit.is_some_and(|limit| nodes >= limit) {
            return Ok(SolveReport { solution: best, nodes, complete: false });
        }
        nodes += 1;
        let Some(z_lo) = tighten(edges, &mut node, best_z) else {
            continue;
        };
        if dt_box_status(cls, &node)? == BoxStatus::AllOne {
            continue;
        }
        let bound = nn_output_bounds(reg, &node)?;
        if bound.upper < p.l_target - opts.slack {
            continue;
        }
        if node.is_singleton() {
            let config = PrecisionConfig::new(node.lo);
            // Singleton bounds equal the forward pass exactly.
            if bound.upper >= p.l_target && !p.nogood_cuts.contains(&config) && p.bench.is_consistent(&config) {
                best_z = z_lo;
                best = Some(Solution { config, objective: z_lo, predicted_logerr: bound.upper, classifier_c: 0 });
            }
            continue;
        }
        let var = pick_branch(&node, &derived);
        let mid = node.lo[var] + (node.hi[var] - node.lo[var]) / 2;
        let mut upper = node.clone();
        upper.lo[var] = mid + 1;
        node.hi[var] = mid;
        stack.push(upper);
        stack.push(node);
    }
    Ok(SolveReport { solution: best, nodes, complete: true })
}

/// Dependency propagation interleaved with the objective cut: any improving
/// point has `x_i <= best_z - 1 - sum_{j != i} lo_j`. Returns the node's
/// lower bound on total bits, or `None` if the node holds no improving point.
fn tighten(edges: &[DependencyEdge], node: &mut DomainBox, best_z: u64) -> Option<u64> {
    loop {
        if !propagate(edges, &mut node.lo, &mut node.hi) {
            return None;
        }
        let z_lo: u64 = node.lo.iter().map(|&b| b as u64).sum();
        if z_lo >= best_z {
            return None;
        }
        let slack = best_z - 1 - z_lo;
        let mut changed = false;
        for (l, h) in node.lo.iter().zip(node.hi.iter_mut()) {
            let cap = (*l as u64 + slack).min(u32::MAX as u64) as u32;
            if *h > cap {
                *h = cap;
                changed = true;
            }
        }
        if !changed {
            return Some(z_lo);
        }
    }
}

/// Model-feasible start for the search: the top corner of the box, lowered
/// variable by variable with the same binary-search passes used on real runs.
fn greedy_incumbent(p: &TuningProblem, reg: &MlpModel, cls: &DtModel) -> Result<Option<Solution>> {
    let (mut lo, mut hi) = (p.domains.lo.clone(), p.domains.hi.clone());
    if !propagate(p.edges(), &mut lo, &mut hi) {
        return Ok(None);
    }
    let dbox = DomainBox { lo, hi };
    let accepts = |c: &PrecisionConfig| -> Result<f64> {
        let ok = dbox.contains(&c.bits)
            && !p.nogood_cuts.contains(c)
            && cls.classify(c)? == 0
            && reg.predict(c)? >= p.l_target;
        Ok(if ok { 0.0 } else { 1.0 })
    };
    let top = PrecisionConfig::new(dbox.hi.clone());
    if !p.bench.is_consistent(&top) || accepts(&top)? != 0.0 {
        return Ok(None);
    }
    let floor = BitRange { min: dbox.lo.iter().copied().min().unwrap_or(0), max: 0 };
    let (config, _, _) = refine_with(p.edges(), accepts, 0.5, floor, top, 0.0)?;
    let objective = config.total_bits();
    let predicted_logerr = reg.predict(&config)?;
    Ok(Some(Solution { config, objective, predicted_logerr, classifier_c: 0 }))
}

fn pick_branch(node: &DomainBox, derived: &[bool]) -> usize {
    let widest = |want_derived: bool| {
        (0..node.len())
            .filter(|&i| derived[i] == want_derived && node.hi[i] > node.lo[i])
            .max_by_key(|&i| (node.hi[i] - node.lo[i], std::cmp::Reverse(i)))
    };
    widest(false).or_else(|| widest(true)).expect("non-singleton box has an open domain")
}

/// Scores every configuration of the box with the models; ties on total bits
/// go to the lexicographically smallest configuration.
pub fn enumerate_mp(p: &TuningProblem, reg: &MlpModel, cls: &DtModel, cap: u128) -> Result<Option<Solution>> {
    check_arity(p, reg, cls)?;
    let size = p.domains.volume();
    if size > cap {
        return Err(Error::CapExceeded { size, cap });
    }
    let mut best: Option<Solution> = None;
    let mut bits = p.domains.lo.clone();
    loop {
        let config = PrecisionConfig::new(bits.clone());
        let z = config.total_bits();
        if best.as_ref().map_or(true, |b| z < b.objective)
            && p.bench.is_consistent(&config)
            && !p.nogood_cuts.contains(&config)
        {
            let e = reg.predict(&config)?;
            if e >= p.l_target && cls.classify(&config)? == 0 {
                best = Some(Solution { config, objective: z, predicted_logerr: e, classifier_c: 0 });
            }
        }
        if !next_point(&mut bits, &p.domains) {
            return Ok(best);
        }
    }
}

/// Lexicographic successor within the box (last index fastest).
pub(crate) fn next_point(bits: &mut [u32], dbox: &DomainBox) -> bool {
    for i in (0..bits.len()).rev() {
        if bits[i] < dbox.hi[i] {
            bits[i] += 1;
            return true;
        }
        bits[i] = dbox.lo[i];
    }
    false
}
