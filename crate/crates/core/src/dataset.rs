//! Training data: Latin-hypercube configurations, kernel runs and the error
//! metric with its log transform and large-error label.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use crate::config::PrecisionConfig;
use crate::error::{Error, Result};
use crate::flexnum::MAX_MANTISSA_BITS;
use crate::kernels::{run_kernel, Benchmark, BenchmarkDescriptor, InputSet, Shape};

/// Errors above this are labelled class 1 (large error).
pub const CLASS_THRESHOLD: f64 = 0.9;
/// Bound on |log_err|; errors of 0 map to `LOG_ERR_CAP`, infinite errors to `-LOG_ERR_CAP`.
pub const LOG_ERR_CAP: f64 = 40.0;
/// Lower bound on the squared reference value in the relative error.
pub const DENOMINATOR_GUARD: f64 = 1e-60;

/// Inclusive range of mantissa widths a search or sample may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitRange {
    pub min: u32,
    pub max: u32,
}

impl BitRange {
    pub fn new(min: u32, max: u32) -> Result<Self> {
        if min > max {
            return Err(Error::InvalidRange { lo: min, hi: max });
        }
        if min < 1 || max > MAX_MANTISSA_BITS {
            return Err(Error::BitsOutOfRange { slot: 0, value: if min < 1 { min } else { max }, lo: 1, hi: MAX_MANTISSA_BITS });
        }
        Ok(BitRange { min, max })
    }

    pub fn width(&self) -> u32 {
        self.max - self.min + 1
    }
}

impl Default for BitRange {
    fn default() -> Self {
        BitRange { min: 2, max: 52 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub config: PrecisionConfig,
    pub error: f64,
    pub log_err: f64,
    pub class_label: u8,
}

impl Sample {
    pub fn from_error(config: PrecisionConfig, error: f64) -> Self {
        Sample { config, error, log_err: log_error(error), class_label: class_of(error) }
    }
}

/// `-log10(error)` clamped to `[-LOG_ERR_CAP, LOG_ERR_CAP]`.
pub fn log_error(error: f64) -> f64 {
    if error.is_nan() || error == f64::INFINITY {
        return -LOG_ERR_CAP;
    }
    (-error.max(10f64.powf(-LOG_ERR_CAP)).log10()).clamp(-LOG_ERR_CAP, LOG_ERR_CAP)
}

pub fn class_of(error: f64) -> u8 {
    // NaN compares false; treat it like +inf.
    if error > CLASS_THRESHOLD || error.is_nan() {
        1
    } else {
        0
    }
}

/// Maximum over elements of the squared relative deviation from `reference`.
pub fn compute_error(out: &[f64], reference: &[f64]) -> Result<f64> {
    if out.len() != reference.len() {
        return Err(Error::LengthMismatch { left: out.len(), right: reference.len() });
    }
    let mut worst = 0.0f64;
    for (&o, &r) in out.iter().zip(reference) {
        if !o.is_finite() {
            return Ok(f64::INFINITY);
        }
        let dev = o - r;
        let e = (dev * dev) / (r * r).max(DENOMINATOR_GUARD);
        if e.is_nan() {
            return Ok(f64::INFINITY);
        }
        worst = worst.max(e);
    }
    Ok(worst)
}

/// Kernel runs against a cached full-precision reference output.
#[derive(Debug, Clone)]
pub struct ErrorEvaluator {
    bench: BenchmarkDescriptor,
    input: InputSet,
    reference: Vec<f64>,
}

impl ErrorEvaluator {
    pub fn new(bench: &BenchmarkDescriptor, input: &InputSet) -> Result<Self> {
        let full = PrecisionConfig::uniform(bench.n_var, MAX_MANTISSA_BITS);
        let reference = run_kernel(bench, input, &full)?;
        Ok(ErrorEvaluator { bench: bench.clone(), input: input.clone(), reference })
    }

    pub fn bench(&self) -> &BenchmarkDescriptor {
        &self.bench
    }

    pub fn input(&self) -> &InputSet {
        &self.input
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    pub fn error(&self, config: &PrecisionConfig) -> Result<f64> {
        let out = run_kernel(&self.bench, &self.input, config)?;
        compute_error(&out, &self.reference)
    }

    pub fn sample(&self, config: &PrecisionConfig) -> Result<Sample> {
        Ok(Sample::from_error(config.clone(), self.error(config)?))
    }
}

pub fn make_sample(eval: &ErrorEvaluator, config: &PrecisionConfig) -> Result<Sample> {
    eval.sample(config)
}

/// Latin-hypercube points in `[0, 1)^n_vars`: each of the `n_samples`
/// equal strata of every axis holds exactly one point.
pub fn lhs_unit(n_vars: usize, n_samples: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut points = vec![vec![0.0; n_vars]; n_samples];
    let mut strata: Vec<usize> = (0..n_samples).collect();
    for dim in 0..n_vars {
        strata.shuffle(rng);
        for (point, &s) in points.iter_mut().zip(&strata) {
            let u: f64 = rng.gen();
            point[dim] = (s as f64 + u) / n_samples as f64;
        }
    }
    points
}

pub fn lhs_configs(n_vars: usize, n_samples: usize, lo: u32, hi: u32, seed: u64) -> Result<Vec<PrecisionConfig>> {
    if lo > hi {
        return Err(Error::InvalidRange { lo, hi });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = (hi - lo + 1) as f64;
    Ok(lhs_unit(n_vars, n_samples, &mut rng)
        .into_iter()
        .map(|p| {
            let bits = p.into_iter().map(|u| (lo + (u * width).floor() as u32).min(hi)).collect();
            PrecisionConfig::new(bits)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub benchmark: Benchmark,
    pub input_seed: u64,
    pub shape: Shape,
    pub sampling_seed: u64,
    pub nbit: BitRange,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn n_var(&self) -> usize {
        self.samples.first().map_or(0, |s| s.config.len())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_one_fraction(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().filter(|s| s.class_label == 1).count() as f64 / self.samples.len() as f64
    }

    /// Dataset with the same metadata and the samples at `idx`.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset { meta: self.meta.clone(), samples: idx.iter().map(|&i| self.samples[i].clone()).collect() }
    }

    pub fn head(&self, n: usize) -> Dataset {
        Dataset { meta: self.meta.clone(), samples: self.samples[..n.min(self.samples.len())].to_vec() }
    }

    /// Seeded shuffle split; the first part holds `round(len * train_fraction)` samples.
    pub fn split(&self, train_fraction: f64, seed: u64) -> (Dataset, Dataset) {
        let mut idx: Vec<usize> = (0..self.samples.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let cut = ((self.samples.len() as f64) * train_fraction).round() as usize;
        (self.subset(&idx[..cut]), self.subset(&idx[cut..]))
    }
}

/// Samples `n_samples` LHS configurations over `nbit` and measures each one.
/// Samples are evaluated in parallel and kept in LHS order.
pub fn build_dataset(eval: &ErrorEvaluator, n_samples: usize, seed: u64, nbit: BitRange) -> Result<Dataset> {
    if n_samples == 0 {
        return Err(Error::InsufficientData { what: "dataset size", needed: 1, have: 0 });
    }
    let configs = lhs_configs(eval.bench().n_var, n_samples, nbit.min, nbit.max, seed)?;
    let samples = configs.par_iter().map(|c| eval.sample(c)).collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        meta: DatasetMeta {
            benchmark: eval.bench().benchmark,
            input_seed: eval.input().seed,
            shape: eval.input().shape.clone(),
            sampling_seed: seed,
            nbit,
        },
        samples,
    })
}

pub fn meta_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let n = ds.n_var();
    let mut out = Vec::new();
    let header: Vec<String> = (0..n).map(|i| format!("x_{i}")).chain(["error", "log_err", "class"].map(String::from)).collect();
    writeln!(out, "{}", header.join(",")).expect("write to Vec");
    for s in &ds.samples {
        for b in &s.config.bits {
            write!(out, "{b},").expect("write to Vec");
        }
        writeln!(out, "{:?},{:?},{}", s.error, s.log_err, s.class_label).expect("write to Vec");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))?;
    let meta = meta_path(path);
    fs::write(&meta, serde_json::to_string_pretty(&ds.meta)?).map_err(|e| Error::io(meta, e))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let meta_file = meta_path(path);
    let meta_text = fs::read_to_string(&meta_file).map_err(|e| Error::io(&meta_file, e))?;
    let meta: DatasetMeta = serde_json::from_str(&meta_text)?;

    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let err = |line: usize, column: usize, message: String| Error::Parse { path: path.to_path_buf(), line, column, message };
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| err(1, 1, "empty file".into()))?.split(',').collect();
    if header.len() < 4 {
        return Err(err(1, 1, "expected columns x_0..x_n,error,log_err,class".into()));
    }
    let n = header.len() - 3;
    for (i, name) in header.iter().enumerate() {
        let want = match i.checked_sub(n) {
            None => format!("x_{i}"),
            Some(k) => ["error", "log_err", "class"][k].to_string(),
        };
        if *name != want {
            return Err(err(1, i + 1, format!("expected column `{want}`, found `{name}`")));
        }
    }

    let mut samples = Vec::new();
    for (li, line) in lines.enumerate() {
        let lineno = li + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(err(lineno, fields.len().min(header.len()) + 1, format!("expected {} columns, found {}", header.len(), fields.len())));
        }
        let mut bits = Vec::with_capacity(n);
        for (c, f) in fields[..n].iter().enumerate() {
            let b: u32 = f.parse().map_err(|e| err(lineno, c + 1, format!("bad bit-width `{f}`: {e}")))?;
            if !(1..=MAX_MANTISSA_BITS).contains(&b) {
                return Err(err(lineno, c + 1, format!("bit-width {b} out of range")));
            }
            bits.push(b);
        }
        let real = |c: usize| -> Result<f64> {
            fields[c].parse::<f64>().map_err(|e| err(lineno, c + 1, format!("bad number `{}`: {e}", fields[c])))
        };
        let error = real(n)?;
        let log_err = real(n + 1)?;
        let class_label: u8 = match fields[n + 2] {
            "0" => 0,
            "1" => 1,
            other => return Err(err(lineno, n + 3, format!("class must be 0 or 1, found `{other}`"))),
        };
        samples.push(Sample { config: PrecisionConfig::new(bits), error, log_err, class_label });
    }
    Ok(Dataset { meta, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{describe, gen_input_set};
    use proptest::prelude::*;

    #[test]
    fn error_examples() {
        assert_eq!(compute_error(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(compute_error(&[2.0], &[1.0]).unwrap(), 1.0);
        assert_eq!(compute_error(&[f64::NAN, 1.0], &[1.0, 1.0]).unwrap(), f64::INFINITY);
        assert_eq!(compute_error(&[f64::INFINITY], &[1.0]).unwrap(), f64::INFINITY);
        assert!(compute_error(&[1.0], &[1.0, 2.0]).is_err());
        // zero reference uses the guard
        let guarded = compute_error(&[1e-30], &[0.0]).unwrap();
        assert!((guarded - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sample_transforms() {
        let c = PrecisionConfig::new(vec![3]);
        let s = Sample::from_error(c.clone(), 0.95);
        assert_eq!(s.class_label, 1);
        let s = Sample::from_error(c.clone(), 0.9);
        assert_eq!(s.class_label, 0);
        let s = Sample::from_error(c.clone(), 1e-10);
        assert_eq!((s.log_err, s.class_label), (10.0, 0));
        let s = Sample::from_error(c.clone(), 0.0);
        assert_eq!(s.log_err, LOG_ERR_CAP);
        let s = Sample::from_error(c.clone(), f64::INFINITY);
        assert_eq!((s.log_err, s.class_label), (-LOG_ERR_CAP, 1));
        let s = Sample::from_error(c, 1e300);
        assert_eq!((s.log_err, s.class_label), (-LOG_ERR_CAP, 1));
    }

    #[test]
    fn lhs_examples() {
        assert!(matches!(lhs_configs(2, 4, 5, 3, 0), Err(Error::InvalidRange { .. })));
        for seed in 0..5 {
            let cfgs = lhs_configs(2, 4, 0, 3, seed).unwrap();
            for d in 0..2 {
                let mut col: Vec<u32> = cfgs.iter().map(|c| c.bits[d]).collect();
                col.sort();
                assert_eq!(col, vec![0, 1, 2, 3]);
            }
        }
        // one dimension, k samples: stratum indices are a permutation of 0..k
        let (lo, hi, k) = (2u32, 52u32, 17usize);
        let cfgs = lhs_configs(1, k, lo, hi, 9).unwrap();
        let width = (hi - lo + 1) as f64;
        let mut strata: Vec<usize> = cfgs.iter().map(|c| (((c.bits[0] - lo) as f64 / width) * k as f64) as usize).collect();
        strata.sort();
        strata.dedup();
        assert_eq!(strata.len(), k);
        assert_eq!(lhs_configs(3, 10, 4, 9, 1).unwrap(), lhs_configs(3, 10, 4, 9, 1).unwrap());
    }

    #[test]
    fn lhs_strata_hit_once_with_more_samples_than_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts = lhs_unit(3, 100, &mut rng);
        for d in 0..3 {
            let mut hits = vec![0; 100];
            for p in &pts {
                hits[(p[d] * 100.0) as usize] += 1;
            }
            assert!(hits.iter().all(|&h| h == 1));
        }
        let cfgs = lhs_configs(3, 100, 2, 52, 4).unwrap();
        assert!(cfgs.iter().all(|c| c.bits.iter().all(|&b| (2..=52).contains(&b))));
    }

    proptest! {
        #[test]
        fn lhs_stratum_occupancy(n_vars in 1usize..5, n in 1usize..60, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts = lhs_unit(n_vars, n, &mut rng);
            for d in 0..n_vars {
                let mut hits = vec![0usize; n];
                for p in &pts {
                    hits[((p[d] * n as f64) as usize).min(n - 1)] += 1;
                }
                let (mn, mx) = (hits.iter().min().unwrap(), hits.iter().max().unwrap());
                prop_assert!(mx - mn <= 1);
            }
        }

        #[test]
        fn lhs_values_within_range(lo in 1u32..30, span in 0u32..30, n in 1usize..50, seed in any::<u64>()) {
            let hi = lo + span;
            for c in lhs_configs(2, n, lo, hi, seed).unwrap() {
                prop_assert!(c.bits.iter().all(|&b| b >= lo && b <= hi));
            }
        }
    }

    fn saxpy_eval() -> ErrorEvaluator {
        let b = describe(Benchmark::Saxpy);
        let input = gen_input_set(&b, &Shape(vec![64]), 1).unwrap();
        ErrorEvaluator::new(&b, &input).unwrap()
    }

    #[test]
    fn make_sample_at_full_precision() {
        let eval = saxpy_eval();
        let s = make_sample(&eval, &PrecisionConfig::uniform(3, 52)).unwrap();
        assert_eq!(s.error, 0.0);
        assert_eq!(s.class_label, 0);
        assert!(make_sample(&eval, &PrecisionConfig::uniform(2, 52)).is_err());
    }

    #[test]
    fn build_is_repeatable() {
        let eval = saxpy_eval();
        let a = build_dataset(&eval, 50, 3, BitRange::default()).unwrap();
        let b = build_dataset(&eval, 50, 3, BitRange::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(build_dataset(&eval, 1, 3, BitRange::default()).unwrap().len(), 1);
        assert!(build_dataset(&eval, 0, 3, BitRange::default()).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.csv");
        let meta = DatasetMeta {
            benchmark: Benchmark::Saxpy,
            input_seed: 1,
            shape: Shape(vec![64]),
            sampling_seed: 2,
            nbit: BitRange::default(),
        };
        let samples = vec![
            Sample::from_error(PrecisionConfig::new(vec![2, 3, 4]), 0.123456789012345678),
            Sample::from_error(PrecisionConfig::new(vec![52, 52, 52]), 0.0),
            Sample::from_error(PrecisionConfig::new(vec![5, 2, 2]), f64::INFINITY),
        ];
        let ds = Dataset { meta, samples };
        save_dataset(&ds, &path).unwrap();
        let back = load_dataset(&path).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.samples[2].error, f64::INFINITY);
    }

    #[test]
    fn load_reports_line_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.csv");
        let ds = build_dataset(&saxpy_eval(), 3, 0, BitRange::default()).unwrap();
        save_dataset(&ds, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let cut = lines[2].rfind(',').unwrap();
        lines[2].truncate(cut);
        fs::write(&path, lines.join("\n")).unwrap();
        match load_dataset(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }

        fs::write(&path, "x_0,x_1,error,class\n1,2,0.5,0\n").unwrap();
        assert!(matches!(load_dataset(&path), Err(Error::Parse { line: 1, .. })));
    }
}
