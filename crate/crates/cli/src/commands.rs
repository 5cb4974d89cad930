use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use prectune::config::PrecisionConfig;
use prectune::dataset::{build_dataset, load_dataset, save_dataset, Dataset, ErrorEvaluator};
use prectune::embed::DomainBox;
use prectune::flexnum::MAX_MANTISSA_BITS;
use prectune::kernels::{describe, gen_input_set, Benchmark, Shape};
use prectune::learn::{
    classifier_path, eval_models, regressor_path, save_json, train_classifier, train_regressor, Metrics,
};
use prectune::solve::{
    brute_force_optimum, fptuning_baseline, plus_refine, SmartTuner, TunedResult, DEFAULT_BRUTE_FORCE_CAP,
};
use serde::{Deserialize, Serialize};

use crate::config::{Mode, RunConfig};
use crate::{CliError, Command};

pub const SUMMARY_HEADER: &str = "target,method,total_bits,actual_error,feasible,iterations,kernel_runs,wall_time_s";

/// One tuning outcome as written to disk; enough to rerun the configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub benchmark: String,
    pub shape: String,
    pub input_seed: u64,
    pub sampling_seed: u64,
    pub training_seed: u64,
    pub nbit_min: u32,
    pub nbit_max: u32,
    pub method: String,
    pub target: f64,
    pub config: Option<Vec<u32>>,
    pub total_bits: u64,
    /// `None` when the error is not finite.
    pub actual_error: Option<f64>,
    pub feasible: bool,
    pub outcome: String,
    pub iterations: usize,
    pub samples_added: usize,
    pub kernel_runs: u64,
    pub solver_complete: bool,
    pub wall_time_s: f64,
}

impl RunRecord {
    fn new(cfg: &RunConfig, bench: Benchmark, shape: &Shape, method: &str, target: f64) -> Self {
        RunRecord {
            benchmark: bench.name().to_string(),
            shape: shape.to_string(),
            input_seed: cfg.input_seed,
            sampling_seed: cfg.sampling_seed,
            training_seed: cfg.train.seed,
            nbit_min: cfg.nbit.min,
            nbit_max: cfg.nbit.max,
            method: method.to_string(),
            target,
            config: None,
            total_bits: 0,
            actual_error: None,
            feasible: false,
            outcome: String::new(),
            iterations: 0,
            samples_added: 0,
            kernel_runs: 0,
            solver_complete: true,
            wall_time_s: 0.0,
        }
    }

    fn from_result(cfg: &RunConfig, bench: Benchmark, shape: &Shape, method: Mode, r: &TunedResult) -> Self {
        let mut rec = RunRecord::new(cfg, bench, shape, method.name(), r.error_target);
        rec.config = r.config.as_ref().map(|c| c.bits.clone());
        rec.total_bits = r.total_bits;
        rec.actual_error = r.actual_error.is_finite().then_some(r.actual_error);
        rec.feasible = r.feasible;
        rec.outcome = serde_json::to_value(r.outcome).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        rec.iterations = r.refinement_iterations;
        rec.samples_added = r.samples_added;
        rec.kernel_runs = r.kernel_runs;
        rec.solver_complete = r.solver_complete;
        rec.wall_time_s = if cfg.timing { r.wall_time_s } else { 0.0 };
        rec
    }

    pub fn summary_row(&self) -> String {
        let err = self.actual_error.map_or("inf".to_string(), |e| format!("{e:e}"));
        format!(
            "{:e},{},{},{},{},{},{},{:.3}",
            self.target, self.method, self.total_bits, err, self.feasible, self.iterations, self.kernel_runs, self.wall_time_s
        )
    }
}

pub fn dispatch(cmd: Command) -> Result<i32, CliError> {
    match cmd {
        Command::Dataset(common) => cmd_dataset(&common.resolve()?),
        Command::Train { common, dataset } => cmd_train(&common.resolve()?, dataset.as_deref()),
        Command::Tune { common, mode, dataset } => {
            let mut cfg = common.resolve()?;
            if !mode.is_empty() {
                cfg.modes = mode;
            }
            cmd_tune(&cfg, dataset.as_deref())
        }
        Command::Sweep { common, sizes, heldout } => {
            let mut cfg = common.resolve()?;
            if !sizes.is_empty() {
                cfg.sizes = sizes;
            }
            if let Some(h) = heldout {
                cfg.heldout = h;
            }
            cmd_sweep(&cfg)
        }
        Command::Transfer { common, n_inputs } => {
            let mut cfg = common.resolve()?;
            if let Some(n) = n_inputs {
                cfg.n_inputs = n;
            }
            cmd_transfer(&cfg)
        }
        Command::SnapHw { result, formats, out } => cmd_snap_hw(&result, &formats, out.as_deref()),
        Command::Oracle(common) => cmd_oracle(&common.resolve()?),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Writes through a temporary file so readers never see a partial file.
fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).map_err(|e| io_err(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(path, &(text + "\n"))
}

fn evaluator(cfg: &RunConfig, bench: Benchmark, input_seed: u64) -> Result<(ErrorEvaluator, Shape), CliError> {
    let d = describe(bench);
    let shape = cfg.shape.clone().unwrap_or_else(|| d.default_shape.clone());
    let input = gen_input_set(&d, &shape, input_seed)?;
    Ok((ErrorEvaluator::new(&d, &input)?, shape))
}

fn dataset_for(cfg: &RunConfig, eval: &ErrorEvaluator, path: Option<&Path>) -> Result<Dataset, CliError> {
    match path {
        Some(p) => {
            let ds = load_dataset(p)?;
            if ds.meta.benchmark != eval.bench().benchmark {
                return Err(CliError::Usage(format!(
                    "dataset {} is for {}, not {}",
                    p.display(),
                    ds.meta.benchmark,
                    eval.bench().benchmark
                )));
            }
            Ok(ds)
        }
        None => Ok(build_dataset(eval, cfg.dataset_size, cfg.sampling_seed, cfg.nbit)?),
    }
}

fn target_tag(t: f64) -> String {
    format!("{t:e}")
}

fn cmd_dataset(cfg: &RunConfig) -> Result<i32, CliError> {
    let bench = cfg.single_benchmark()?;
    let (eval, _) = evaluator(cfg, bench, cfg.input_seed)?;
    let ds = dataset_for(cfg, &eval, None)?;
    let path = cfg.out.join(format!("{bench}.dataset.csv"));
    std::fs::create_dir_all(&cfg.out).map_err(|e| io_err(&cfg.out, e))?;
    save_dataset(&ds, &path)?;
    println!("{bench}: {} samples, class-1 fraction {:.3} -> {}", ds.len(), ds.class_one_fraction(), path.display());
    Ok(0)
}

#[derive(Serialize)]
struct MetricsRecord<'a> {
    benchmark: &'a str,
    input_seed: u64,
    sampling_seed: u64,
    training_seed: u64,
    train_samples: usize,
    heldout_samples: usize,
    metrics: Metrics,
}

fn cmd_train(cfg: &RunConfig, dataset: Option<&Path>) -> Result<i32, CliError> {
    let bench = cfg.single_benchmark()?;
    let (eval, _) = evaluator(cfg, bench, cfg.input_seed)?;
    let ds = dataset_for(cfg, &eval, dataset)?;
    let (train, held) = ds.split(0.8, cfg.train.seed);
    let metrics = eval_models(
        &train_regressor(&train, &cfg.train)?,
        &train_classifier(&train, &cfg.train)?,
        &held,
        cfg.train.class_threshold,
    )?;
    let reg = train_regressor(&ds, &cfg.train)?;
    let cls = train_classifier(&ds, &cfg.train)?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| io_err(&cfg.out, e))?;
    save_json(&reg, &regressor_path(&cfg.out, bench.name()))?;
    save_json(&cls, &classifier_path(&cfg.out, bench.name()))?;
    let fmt = |v: Option<f64>| v.map_or("nan".to_string(), |x| format!("{x:.4}"));
    println!(
        "{bench}: rmse {} nrmse {} accuracy {:.4} (train {}, held-out {})",
        fmt(metrics.rmse),
        fmt(metrics.nrmse),
        metrics.accuracy,
        train.len(),
        held.len()
    );
    let record = MetricsRecord {
        benchmark: bench.name(),
        input_seed: cfg.input_seed,
        sampling_seed: cfg.sampling_seed,
        training_seed: cfg.train.seed,
        train_samples: train.len(),
        heldout_samples: held.len(),
        metrics,
    };
    write_json(&cfg.out.join(format!("{bench}.metrics.json")), &record)?;
    Ok(0)
}

fn cmd_tune(cfg: &RunConfig, dataset: Option<&Path>) -> Result<i32, CliError> {
    let bench = cfg.single_benchmark()?;
    let (eval, shape) = evaluator(cfg, bench, cfg.input_seed)?;
    let mut modes = cfg.modes.clone();
    modes.dedup();
    let tuner = if modes.iter().any(|m| *m != Mode::Baseline) {
        let ds = dataset_for(cfg, &eval, dataset)?;
        let mut t = SmartTuner::new(&eval, ds, cfg.train.clone())?;
        t.solver.node_limit = cfg.node_limit;
        Some(t)
    } else {
        None
    };

    let mut csv = format!("{}\n{SUMMARY_HEADER}\n", cfg.seeds_line());
    let mut all_feasible = true;
    for &target in &cfg.targets {
        let smart = match &tuner {
            Some(t) => Some(t.run(target, cfg.budget)?),
            None => None,
        };
        for &mode in &modes {
            let record = match mode {
                Mode::Smart => RunRecord::from_result(cfg, bench, &shape, mode, smart.as_ref().expect("tuner built")),
                Mode::SmartPlus => {
                    let plus = plus_refine(&eval, target, smart.as_ref().expect("tuner built"), cfg.nbit)?;
                    RunRecord::from_result(cfg, bench, &shape, mode, &plus)
                }
                Mode::Baseline => match fptuning_baseline(&eval, target, cfg.nbit) {
                    Ok(r) => RunRecord::from_result(cfg, bench, &shape, mode, &r),
                    Err(prectune::Error::InfeasibleAtMax { error, .. }) => {
                        let mut rec = RunRecord::new(cfg, bench, &shape, mode.name(), target);
                        rec.config = Some(vec![cfg.nbit.max; eval.bench().n_var]);
                        rec.total_bits = cfg.nbit.max as u64 * eval.bench().n_var as u64;
                        rec.actual_error = error.is_finite().then_some(error);
                        rec.outcome = "infeasible_at_max".into();
                        rec.kernel_runs = 1;
                        rec
                    }
                    Err(e) => return Err(e.into()),
                },
            };
            all_feasible &= record.feasible;
            println!(
                "{bench} {mode} target {}: bits {} error {} feasible {}",
                target_tag(target),
                record.total_bits,
                record.actual_error.map_or("inf".into(), |e| format!("{e:.3e}")),
                record.feasible
            );
            write_json(&cfg.out.join(format!("{bench}_{mode}_{}.json", target_tag(target))), &record)?;
            csv.push_str(&record.summary_row());
            csv.push('\n');
        }
    }
    write_atomic(&cfg.out.join("summary.csv"), &csv)?;
    Ok(if all_feasible { 0 } else { 1 })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("nan".to_string(), |x| format!("{x}"))
}

fn cmd_sweep(cfg: &RunConfig) -> Result<i32, CliError> {
    if cfg.sizes.is_empty() || cfg.sizes.windows(2).any(|w| w[0] >= w[1]) || cfg.sizes[0] == 0 {
        return Err(CliError::Usage("sizes must be positive and strictly ascending".into()));
    }
    if cfg.heldout == 0 {
        return Err(CliError::Usage("heldout must be positive".into()));
    }
    let largest = *cfg.sizes.last().expect("nonempty");
    let mut csv = format!("{}\nsize,benchmark,rmse,accuracy\n", cfg.seeds_line());
    for bench in cfg.suite() {
        let (eval, _) = evaluator(cfg, bench, cfg.input_seed)?;
        let master = build_dataset(&eval, largest, cfg.sampling_seed, cfg.nbit)?;
        let held = build_dataset(&eval, cfg.heldout, cfg.sampling_seed.wrapping_add(1), cfg.nbit)?;
        for &size in &cfg.sizes {
            let train = master.head(size);
            let cls = train_classifier(&train, &cfg.train)?;
            let (rmse, accuracy) = match train_regressor(&train, &cfg.train) {
                Ok(reg) => {
                    let m = eval_models(&reg, &cls, &held, cfg.train.class_threshold)?;
                    (m.rmse, m.accuracy)
                }
                Err(prectune::Error::InsufficientData { .. }) => {
                    let correct = held
                        .samples
                        .iter()
                        .map(|s| Ok::<_, prectune::Error>(cls.classify(&s.config)? == u8::from(!(s.error <= cfg.train.class_threshold))))
                        .collect::<Result<Vec<bool>, _>>()?;
                    (None, correct.iter().filter(|&&c| c).count() as f64 / held.len() as f64)
                }
                Err(e) => return Err(e.into()),
            };
            println!("{bench} size {size}: rmse {} accuracy {accuracy:.4}", fmt_opt(rmse));
            let _ = writeln!(csv, "{size},{bench},{},{accuracy}", fmt_opt(rmse));
        }
    }
    write_atomic(&cfg.out.join("sweep.csv"), &csv)?;
    Ok(0)
}

fn violation_pct(config: Option<&PrecisionConfig>, others: &[ErrorEvaluator], target: f64) -> Result<Option<f64>, CliError> {
    let Some(c) = config else {
        return Ok(None);
    };
    let mut bad = 0usize;
    for e in others {
        if !(e.error(c)? <= target) {
            bad += 1;
        }
    }
    Ok(Some(100.0 * bad as f64 / others.len() as f64))
}

fn cmd_transfer(cfg: &RunConfig) -> Result<i32, CliError> {
    if cfg.n_inputs < 2 {
        return Err(CliError::Usage(format!("n_inputs must be at least 2, got {}", cfg.n_inputs)));
    }
    let mut rows: Vec<(usize, String)> = Vec::new();
    for (bi, bench) in cfg.suite().into_iter().enumerate() {
        let (eval, _) = evaluator(cfg, bench, cfg.input_seed)?;
        let others = (1..cfg.n_inputs as u64)
            .map(|i| evaluator(cfg, bench, cfg.input_seed.wrapping_add(i)).map(|(e, _)| e))
            .collect::<Result<Vec<_>, _>>()?;
        let ds = dataset_for(cfg, &eval, None)?;
        let mut tuner = SmartTuner::new(&eval, ds, cfg.train.clone())?;
        tuner.solver.node_limit = cfg.node_limit;
        for (ti, &target) in cfg.targets.iter().enumerate() {
            let smart = tuner.run(target, cfg.budget)?;
            let smart_cfg = smart.config.as_ref().filter(|_| smart.feasible);
            let smart_pct = violation_pct(smart_cfg, &others, target)?;
            let base_pct = match fptuning_baseline(&eval, target, cfg.nbit) {
                Ok(r) => violation_pct(r.config.as_ref(), &others, target)?,
                Err(prectune::Error::InfeasibleAtMax { .. }) => None,
                Err(e) => return Err(e.into()),
            };
            println!(
                "{bench} target {}: baseline {}% smart {}%",
                target_tag(target),
                fmt_opt(base_pct),
                fmt_opt(smart_pct)
            );
            let row = format!("{},{bench},{},{}", target_tag(target), fmt_opt(base_pct), fmt_opt(smart_pct));
            rows.push((ti * 1000 + bi, row));
        }
    }
    rows.sort_by_key(|r| r.0);
    let mut csv = format!("{}\ntarget,benchmark,fpt_violation_pct,smart_violation_pct\n", cfg.seeds_line());
    for (_, r) in rows {
        csv.push_str(&r);
        csv.push('\n');
    }
    write_atomic(&cfg.out.join("transfer.csv"), &csv)?;
    Ok(0)
}

/// Smallest available width at least `bits`; the full width if none is.
pub fn snap_width(bits: u32, formats: &[u32]) -> u32 {
    formats.iter().copied().filter(|&f| f >= bits).min().unwrap_or(MAX_MANTISSA_BITS)
}

fn cmd_snap_hw(result: &Path, formats: &[u32], out: Option<&Path>) -> Result<i32, CliError> {
    if formats.is_empty() {
        return Err(CliError::Usage("formats: at least one mantissa width is required".into()));
    }
    if let Some(f) = formats.iter().find(|&&f| f == 0 || f > MAX_MANTISSA_BITS) {
        return Err(CliError::Usage(format!("formats: width {f} is outside 1..={MAX_MANTISSA_BITS}")));
    }
    let text = std::fs::read_to_string(result).map_err(|e| io_err(result, e))?;
    let record: RunRecord =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", result.display())))?;
    let Some(bits) = &record.config else {
        return Err(CliError::Usage(format!("{}: result has no configuration", result.display())));
    };
    let bench: Benchmark = record.benchmark.parse()?;
    let d = describe(bench);
    let shape: Shape = record.shape.parse().map_err(CliError::Usage)?;
    let input = gen_input_set(&d, &shape, record.input_seed)?;
    let eval = ErrorEvaluator::new(&d, &input)?;
    let snapped = PrecisionConfig::new(bits.iter().map(|&b| snap_width(b, formats)).collect());
    let error = eval.error(&snapped)?;

    let mut rec = record.clone();
    rec.method = format!("{}_snapped", record.method);
    rec.total_bits = snapped.total_bits();
    rec.config = Some(snapped.bits.clone());
    rec.actual_error = error.is_finite().then_some(error);
    rec.feasible = error <= record.target;
    rec.kernel_runs = 1;
    rec.wall_time_s = 0.0;
    let path = out.map(PathBuf::from).unwrap_or_else(|| result.with_extension("snapped.json"));
    write_json(&path, &rec)?;
    println!(
        "{} -> {}: bits {} error {} feasible {}",
        PrecisionConfig::new(bits.clone()),
        snapped,
        rec.total_bits,
        rec.actual_error.map_or("inf".into(), |e| format!("{e:.3e}")),
        rec.feasible
    );
    Ok(if rec.feasible { 0 } else { 1 })
}

fn cmd_oracle(cfg: &RunConfig) -> Result<i32, CliError> {
    let bench = cfg.single_benchmark()?;
    let (eval, shape) = evaluator(cfg, bench, cfg.input_seed)?;
    let domains = DomainBox::full(eval.bench().n_var, cfg.nbit);
    let mut csv = format!("{}\n{SUMMARY_HEADER}\n", cfg.seeds_line());
    let mut all_found = true;
    for &target in &cfg.targets {
        let clock = std::time::Instant::now();
        let r = brute_force_optimum(&eval, target, &domains, DEFAULT_BRUTE_FORCE_CAP)?;
        let mut rec = RunRecord::new(cfg, bench, &shape, "oracle", target);
        rec.config = r.config.as_ref().map(|c| c.bits.clone());
        rec.total_bits = r.total_bits;
        rec.actual_error = r.actual_error.is_finite().then_some(r.actual_error);
        rec.feasible = r.config.is_some();
        rec.outcome = if rec.feasible { "feasible" } else { "infeasible" }.into();
        rec.kernel_runs = r.kernel_runs;
        rec.wall_time_s = if cfg.timing { clock.elapsed().as_secs_f64() } else { 0.0 };
        all_found &= rec.feasible;
        println!(
            "{bench} oracle target {}: {} bits {}",
            target_tag(target),
            r.config.as_ref().map_or("none".into(), |c| c.to_string()),
            r.total_bits
        );
        write_json(&cfg.out.join(format!("{bench}_oracle_{}.json", target_tag(target))), &rec)?;
        csv.push_str(&rec.summary_row());
        csv.push('\n');
    }
    write_atomic(&cfg.out.join("oracle.csv"), &csv)?;
    Ok(if all_found { 0 } else { 1 })
}
