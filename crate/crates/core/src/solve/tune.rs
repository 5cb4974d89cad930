//! Tuning loops driven by real kernel runs.

use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bnb::next_point;
use super::{build_problem, cast_targets, repair, solve_mp_with, SolverOptions};
use crate::config::PrecisionConfig;
use crate::dataset::{BitRange, Dataset, ErrorEvaluator, Sample};
use crate::embed::DomainBox;
use crate::error::{Error, Result};
use crate::kernels::{DependencyEdge, EdgeKind};
use crate::learn::{train_classifier, train_regressor, DtModel, MlpModel, TrainConfig};

pub const DEFAULT_BUDGET: usize = 100;
pub const DEFAULT_BRUTE_FORCE_CAP: u128 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Feasible,
    BudgetExhausted,
    /// The models admit no configuration that is not already cut.
    SolverInfeasible,
    /// The solver hit its node limit without an incumbent.
    SearchLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TunedResult {
    /// Last configuration tried, `None` if the solver never proposed one.
    pub config: Option<PrecisionConfig>,
    pub total_bits: u64,
    /// Regressor prediction for the last solver proposal.
    pub predicted_logerr: Option<f64>,
    pub actual_error: f64,
    pub error_target: f64,
    pub feasible: bool,
    pub outcome: Outcome,
    pub refinement_iterations: usize,
    pub samples_added: usize,
    /// Binary-search passes made by refinement.
    pub passes: usize,
    pub kernel_runs: u64,
    pub solver_nodes: u64,
    /// `false` if any solve stopped at the node limit.
    pub solver_complete: bool,
    pub wall_time_s: f64,
}

impl TunedResult {
    fn empty(error_target: f64, outcome: Outcome) -> Self {
        TunedResult {
            config: None,
            total_bits: 0,
            predicted_logerr: None,
            actual_error: f64::INFINITY,
            error_target,
            feasible: false,
            outcome,
            refinement_iterations: 0,
            samples_added: 0,
            passes: 0,
            kernel_runs: 0,
            solver_nodes: 0,
            solver_complete: true,
            wall_time_s: 0.0,
        }
    }

    fn set_config(&mut self, config: PrecisionConfig, error: f64) {
        self.total_bits = config.total_bits();
        self.config = Some(config);
        self.actual_error = error;
        self.feasible = error <= self.error_target;
    }
}

/// Holds the models and the training set so one trained state can serve
/// several targets. Each run retrains on its own copy.
#[derive(Debug, Clone)]
pub struct SmartTuner<'a> {
    pub eval: &'a ErrorEvaluator,
    pub dataset: Dataset,
    pub regressor: MlpModel,
    pub classifier: DtModel,
    pub train: TrainConfig,
    pub solver: SolverOptions,
    pub domains: DomainBox,
}

impl<'a> SmartTuner<'a> {
    /// Trains both models on `dataset`. The search domain is the dataset's bit range.
    pub fn new(eval: &'a ErrorEvaluator, dataset: Dataset, train: TrainConfig) -> Result<Self> {
        let regressor = train_regressor(&dataset, &train)?;
        let classifier = train_classifier(&dataset, &train)?;
        Ok(Self::with_models(eval, dataset, regressor, classifier, train))
    }

    pub fn with_models(
        eval: &'a ErrorEvaluator,
        dataset: Dataset,
        regressor: MlpModel,
        classifier: DtModel,
        train: TrainConfig,
    ) -> Self {
        let domains = DomainBox::full(eval.bench().n_var, dataset.meta.nbit);
        SmartTuner { eval, dataset, regressor, classifier, train, solver: SolverOptions::default(), domains }
    }

    pub fn run(&self, error_target: f64, budget: usize) -> Result<TunedResult> {
        let start = Instant::now();
        let mut problem = build_problem(self.eval.bench(), error_target, self.domains.clone())?;
        let mut result = TunedResult::empty(error_target, Outcome::BudgetExhausted);
        let mut dataset: Option<Dataset> = None;
        let mut models: Option<(MlpModel, DtModel)> = None;

        for iteration in 1..=budget {
            let (reg, cls) = models.as_ref().map_or((&self.regressor, &self.classifier), |(r, c)| (r, c));
            let report = solve_mp_with(&problem, reg, cls, &self.solver)?;
            result.solver_nodes += report.nodes;
            result.solver_complete &= report.complete;
            result.refinement_iterations = iteration;
            let Some(sol) = report.solution else {
                result.outcome = if report.complete { Outcome::SolverInfeasible } else { Outcome::SearchLimit };
                break;
            };
            let error = self.eval.error(&sol.config)?;
            result.kernel_runs += 1;
            result.predicted_logerr = Some(sol.predicted_logerr);
            result.set_config(sol.config.clone(), error);
            if result.feasible {
                result.outcome = Outcome::Feasible;
                break;
            }
            let ds = dataset.get_or_insert_with(|| self.dataset.clone());
            ds.samples.push(Sample::from_error(sol.config.clone(), error));
            result.samples_added += 1;
            models = Some((train_regressor(ds, &self.train)?, train_classifier(ds, &self.train)?));
            problem.nogood_cuts.insert(sol.config);
        }
        result.wall_time_s = start.elapsed().as_secs_f64();
        Ok(result)
    }
}

/// Trains models on `dataset` and runs the retrain-and-cut loop for one target.
pub fn smart_tune(
    eval: &ErrorEvaluator,
    error_target: f64,
    dataset: &Dataset,
    tcfg: &TrainConfig,
    budget: usize,
) -> Result<TunedResult> {
    SmartTuner::new(eval, dataset.clone(), tcfg.clone())?.run(error_target, budget)
}

/// Memoised error oracle counting real evaluations.
struct Prober<F> {
    eval: F,
    cache: HashMap<PrecisionConfig, f64>,
    runs: u64,
}

impl<F: FnMut(&PrecisionConfig) -> Result<f64>> Prober<F> {
    fn new(eval: F) -> Self {
        Prober { eval, cache: HashMap::new(), runs: 0 }
    }

    fn error(&mut self, config: &PrecisionConfig) -> Result<f64> {
        if let Some(&e) = self.cache.get(config) {
            return Ok(e);
        }
        let e = (self.eval)(config)?;
        self.runs += 1;
        self.cache.insert(config.clone(), e);
        Ok(e)
    }
}

/// Lowest width `v` may take without undercutting an assignment source.
fn floor_for(edges: &[DependencyEdge], bits: &[u32], v: usize, nbit_min: u32) -> u32 {
    edges
        .iter()
        .filter(|e| e.kind == EdgeKind::Assignment && e.destination == v)
        .map(|e| bits[e.sources[0]])
        .fold(nbit_min, u32::max)
}

/// Binary-search passes until one leaves the total unchanged. `config` must
/// meet the target. Variables are visited by descending width, then index;
/// cast targets follow their sources. Returns the final configuration, its
/// error and the pass count.
fn refine_passes<F: FnMut(&PrecisionConfig) -> Result<f64>>(
    prober: &mut Prober<F>,
    edges: &[DependencyEdge],
    error_target: f64,
    nbit: BitRange,
    mut config: PrecisionConfig,
    mut error: f64,
) -> Result<(PrecisionConfig, f64, usize)> {
    let derived = cast_targets(edges);
    let mut passes = 0;
    loop {
        passes += 1;
        let before = config.total_bits();
        let mut order: Vec<usize> = (0..config.len()).filter(|v| derived.binary_search(v).is_err()).collect();
        order.sort_by_key(|&v| (std::cmp::Reverse(config.bits[v]), v));
        for v in order {
            let (mut lo, mut hi) = (floor_for(edges, &config.bits, v, nbit.min), config.bits[v]);
            let mut best = None;
            while lo < hi {
                let mid = lo + (hi - lo) / 2;
                let mut bits = config.bits.clone();
                bits[v] = mid;
                let repaired = repair(edges, &mut bits) && bits[v] == mid && edges.iter().all(|e| e.holds(&bits));
                let probe = PrecisionConfig::new(bits);
                let probe_error = if repaired { Some(prober.error(&probe)?) } else { None };
                match probe_error {
                    Some(e) if e <= error_target => {
                        hi = mid;
                        best = Some((probe, e));
                    }
                    _ => lo = mid + 1,
                }
            }
            if let Some((c, e)) = best {
                config = c;
                error = e;
            }
        }
        if config.total_bits() == before {
            return Ok((config, error, passes));
        }
    }
}

/// [`plus_refine`] over an arbitrary error function.
pub fn refine_with<F: FnMut(&PrecisionConfig) -> Result<f64>>(
    edges: &[DependencyEdge],
    error_fn: F,
    error_target: f64,
    nbit: BitRange,
    config: PrecisionConfig,
    error: f64,
) -> Result<(PrecisionConfig, f64, u64)> {
    let mut prober = Prober::new(error_fn);
    prober.cache.insert(config.clone(), error);
    let (c, e, _) = refine_passes(&mut prober, edges, error_target, nbit, config, error)?;
    Ok((c, e, prober.runs))
}

/// Lowers each variable by binary search on real kernel runs, starting from a
/// feasible result. An infeasible `start` is returned unchanged.
pub fn plus_refine(eval: &ErrorEvaluator, error_target: f64, start: &TunedResult, nbit: BitRange) -> Result<TunedResult> {
    let Some(config) = start.config.clone().filter(|_| start.feasible) else {
        return Ok(start.clone());
    };
    let clock = Instant::now();
    let mut prober = Prober::new(|c: &PrecisionConfig| eval.error(c));
    prober.cache.insert(config.clone(), start.actual_error);
    let edges = &eval.bench().edges;
    let (config, error, passes) = refine_passes(&mut prober, edges, error_target, nbit, config, start.actual_error)?;
    let mut result = start.clone();
    result.set_config(config, error);
    result.passes = passes;
    result.kernel_runs += prober.runs;
    result.wall_time_s += clock.elapsed().as_secs_f64();
    Ok(result)
}

/// Generate-and-test baseline: all widths at `nbit.max`, then the same
/// binary-search passes as [`plus_refine`].
pub fn fptuning_baseline(eval: &ErrorEvaluator, error_target: f64, nbit: BitRange) -> Result<TunedResult> {
    if !(error_target > 0.0) {
        return Err(Error::NonPositiveTarget(error_target));
    }
    let clock = Instant::now();
    let mut prober = Prober::new(|c: &PrecisionConfig| eval.error(c));
    let top = PrecisionConfig::uniform(eval.bench().n_var, nbit.max);
    let error = prober.error(&top)?;
    if !(error <= error_target) {
        return Err(Error::InfeasibleAtMax { error, target: error_target });
    }
    let edges = &eval.bench().edges;
    let (config, error, passes) = refine_passes(&mut prober, edges, error_target, nbit, top, error)?;
    let mut result = TunedResult::empty(error_target, Outcome::Feasible);
    result.set_config(config, error);
    result.passes = passes;
    result.kernel_runs = prober.runs;
    result.wall_time_s = clock.elapsed().as_secs_f64();
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BruteForceResult {
    /// `None` if no configuration in the box meets the target.
    pub config: Option<PrecisionConfig>,
    pub total_bits: u64,
    pub actual_error: f64,
    pub kernel_runs: u64,
}

/// Checks dependency-consistent configurations of `domains` in increasing
/// order of total bits (lexicographic within a total) and returns the first
/// that meets the target.
pub fn brute_force_optimum(
    eval: &ErrorEvaluator,
    error_target: f64,
    domains: &DomainBox,
    cap: u128,
) -> Result<BruteForceResult> {
    let bench = eval.bench();
    if domains.len() != bench.n_var {
        return Err(Error::ConfigLength { expected: bench.n_var, got: domains.len() });
    }
    brute_force_with(&bench.edges, |c: &PrecisionConfig| eval.error(c), error_target, domains, cap)
}

/// [`brute_force_optimum`] over an arbitrary error function. Candidates are
/// evaluated in parallel chunks; the answer does not depend on the chunking.
pub fn brute_force_with<F: Fn(&PrecisionConfig) -> Result<f64> + Sync>(
    edges: &[DependencyEdge],
    error_fn: F,
    error_target: f64,
    domains: &DomainBox,
    cap: u128,
) -> Result<BruteForceResult> {
    let size = domains.volume();
    if size > cap {
        return Err(Error::CapExceeded { size, cap });
    }
    let mut candidates = Vec::new();
    let mut bits = domains.lo.clone();
    loop {
        if edges.iter().all(|e| e.holds(&bits)) {
            candidates.push(PrecisionConfig::new(bits.clone()));
        }
        if !next_point(&mut bits, domains) {
            break;
        }
    }
    candidates.sort_by(|a, b| a.total_bits().cmp(&b.total_bits()).then_with(|| a.cmp(b)));

    let mut runs = 0u64;
    for chunk in candidates.chunks(64) {
        let errors: Vec<f64> = chunk.par_iter().map(&error_fn).collect::<Result<_>>()?;
        runs += chunk.len() as u64;
        if let Some(i) = errors.iter().position(|&e| e <= error_target) {
            return Ok(BruteForceResult {
                config: Some(chunk[i].clone()),
                total_bits: chunk[i].total_bits(),
                actual_error: errors[i],
                kernel_runs: runs,
            });
        }
    }
    Ok(BruteForceResult { config: None, total_bits: 0, actual_error: f64::INFINITY, kernel_runs: runs })
}
