//! Benchmark kernels evaluated over emulated reduced-precision arithmetic.
//!
//! Every kernel exposes a fixed set of precision *slots*: program variables
//! plus expression temporaries. A program variable uses one slot for all its
//! reads and writes; each static expression temporary gets its own slot.
//! Every arithmetic result and every stored value is rounded to the format of
//! the slot it lands in, so a configuration of all 52-bit slots reproduces the
//! plain binary64 computation bit for bit.
//!
//! Slot maps (index: name) and dependency edges are documented per kernel
//! module. `Cast(S -> t)` ties the temporary `t` to the minimum precision of
//! its operands `S`; `Assignment(s -> d)` requires the assigned value to be no
//! more precise than its destination.

mod bscholes;
mod convolution;
mod correlation;
mod dwt;
mod fwt;
mod jacobi;
mod saxpy;

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use crate::config::PrecisionConfig;
use crate::error::{Error, Result};
use crate::flexnum::FlexFormat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Benchmark {
    Fwt,
    Saxpy,
    Convolution,
    Dwt,
    Correlation,
    #[serde(rename = "bscholes")]
    BScholes,
    Jacobi,
}

impl Benchmark {
    pub const ALL: [Benchmark; 7] = [
        Benchmark::Fwt,
        Benchmark::Saxpy,
        Benchmark::Convolution,
        Benchmark::Dwt,
        Benchmark::Correlation,
        Benchmark::BScholes,
        Benchmark::Jacobi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Fwt => "fwt",
            Benchmark::Saxpy => "saxpy",
            Benchmark::Convolution => "convolution",
            Benchmark::Dwt => "dwt",
            Benchmark::Correlation => "correlation",
            Benchmark::BScholes => "bscholes",
            Benchmark::Jacobi => "jacobi",
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Benchmark::ALL
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownBenchmark(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    Assignment,
    Cast,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DependencyEdge {
    pub kind: EdgeKind,
    pub sources: Vec<usize>,
    pub destination: usize,
}

impl DependencyEdge {
    pub fn assignment(source: usize, destination: usize) -> Self {
        DependencyEdge { kind: EdgeKind::Assignment, sources: vec![source], destination }
    }

    pub fn cast(sources: &[usize], destination: usize) -> Self {
        debug_assert!(sources.len() >= 2);
        DependencyEdge { kind: EdgeKind::Cast, sources: sources.to_vec(), destination }
    }

    /// Whether `bits` satisfies this edge.
    pub fn holds(&self, bits: &[u32]) -> bool {
        let dst = bits[self.destination];
        match self.kind {
            EdgeKind::Assignment => bits[self.sources[0]] <= dst,
            EdgeKind::Cast => self.sources.iter().map(|&s| bits[s]).min() == Some(dst),
        }
    }
}

/// Size parameters of an input set; interpretation depends on the kernel.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Shape(pub Vec<usize>);

impl Shape {
    pub fn dims(&self) -> &[usize] {
        &self.0
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("x")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl FromStr for Shape {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split('x')
            .map(|d| d.trim().parse::<usize>().map_err(|e| format!("bad shape `{s}`: {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Shape)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkDescriptor {
    pub benchmark: Benchmark,
    pub n_var: usize,
    pub slot_names: Vec<&'static str>,
    pub edges: Vec<DependencyEdge>,
    pub default_shape: Shape,
}

impl BenchmarkDescriptor {
    pub fn name(&self) -> &'static str {
        self.benchmark.name()
    }

    /// Whether `config` satisfies every dependency edge.
    pub fn is_consistent(&self, config: &PrecisionConfig) -> bool {
        self.edges.iter().all(|e| e.holds(&config.bits))
    }
}

pub fn get_benchmark(name: &str) -> Result<BenchmarkDescriptor> {
    Ok(describe(name.parse()?))
}

pub fn describe(benchmark: Benchmark) -> BenchmarkDescriptor {
    let (slot_names, edges, default_shape): (&[&'static str], Vec<DependencyEdge>, Vec<usize>) =
        match benchmark {
            Benchmark::Fwt => (fwt::SLOTS, fwt::edges(), vec![1024]),
            Benchmark::Saxpy => (saxpy::SLOTS, saxpy::edges(), vec![1024]),
            Benchmark::Convolution => (convolution::SLOTS, convolution::edges(), vec![64, 11]),
            Benchmark::Dwt => (dwt::SLOTS, dwt::edges(), vec![1024]),
            Benchmark::Correlation => (correlation::SLOTS, correlation::edges(), vec![16, 256]),
            Benchmark::BScholes => (bscholes::SLOTS, bscholes::edges(), vec![256]),
            Benchmark::Jacobi => (jacobi::SLOTS, jacobi::edges(), vec![32, 50]),
        };
    BenchmarkDescriptor {
        benchmark,
        n_var: slot_names.len(),
        slot_names: slot_names.to_vec(),
        edges,
        default_shape: Shape(default_shape),
    }
}

pub fn dependency_graph(bench: &BenchmarkDescriptor) -> &[DependencyEdge] {
    &bench.edges
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSet {
    pub benchmark: Benchmark,
    pub shape: Shape,
    pub seed: u64,
    pub values: Vec<f64>,
}

/// Uniform draw over the generic input domain.
pub(crate) const GENERIC_RANGE: std::ops::Range<f64> = 0.1..10.0;

pub fn gen_input_set(bench: &BenchmarkDescriptor, shape: &Shape, seed: u64) -> Result<InputSet> {
    let expected = input_len(bench.benchmark, shape)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = match bench.benchmark {
        Benchmark::BScholes => bscholes::generate(&mut rng, shape.0[0]),
        _ => (0..expected).map(|_| rng.gen_range(GENERIC_RANGE)).collect(),
    };
    debug_assert_eq!(values.len(), expected);
    Ok(InputSet { benchmark: bench.benchmark, shape: shape.clone(), seed, values })
}

fn invalid_shape(b: Benchmark, reason: impl Into<String>) -> Error {
    Error::InvalidShape { benchmark: b.name().to_string(), reason: reason.into() }
}

/// Validates `shape` for `b` and returns the number of input scalars it implies.
pub fn input_len(b: Benchmark, shape: &Shape) -> Result<usize> {
    let d = shape.dims();
    let want_dims = match b {
        Benchmark::Fwt | Benchmark::Saxpy | Benchmark::Dwt | Benchmark::BScholes => 1,
        Benchmark::Convolution | Benchmark::Correlation | Benchmark::Jacobi => 2,
    };
    if d.len() != want_dims {
        return Err(invalid_shape(b, format!("expected {want_dims} dimension(s), got {}", d.len())));
    }
    let limit = 1 << 20;
    if d.iter().any(|&x| x > limit) {
        return Err(invalid_shape(b, format!("dimension above {limit}")));
    }
    match b {
        Benchmark::Saxpy | Benchmark::BScholes if d[0] == 0 => Err(invalid_shape(b, "length must be >= 1")),
        Benchmark::Saxpy => Ok(1 + 2 * d[0]),
        Benchmark::BScholes => Ok(bscholes::PARAMS * d[0]),
        Benchmark::Fwt | Benchmark::Dwt if d[0] < 2 || !d[0].is_power_of_two() => {
            Err(invalid_shape(b, "length must be a power of two >= 2"))
        }
        Benchmark::Fwt | Benchmark::Dwt => Ok(d[0]),
        Benchmark::Convolution if d[1] == 0 || d[1] > d[0] => {
            Err(invalid_shape(b, "filter side must be in 1..=matrix side"))
        }
        Benchmark::Convolution => Ok(d[0] * d[0] + d[1] * d[1]),
        Benchmark::Correlation if d[0] < 2 || d[1] < 2 => {
            Err(invalid_shape(b, "need >= 2 series of >= 2 points"))
        }
        Benchmark::Correlation => Ok(d[0] * d[1]),
        Benchmark::Jacobi if d[0] < 2 || d[1] == 0 => {
            Err(invalid_shape(b, "grid side must be >= 2 and iterations >= 1"))
        }
        Benchmark::Jacobi => Ok(2 * d[0] * d[0]),
    }
}

/// Slot formats for one kernel run.
pub(crate) struct Slots {
    formats: Vec<FlexFormat>,
}

impl Slots {
    pub(crate) fn from_config(config: &PrecisionConfig) -> Result<Self> {
        let formats = config
            .bits
            .iter()
            .map(|&b| FlexFormat::with_mantissa(b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Slots { formats })
    }

    #[inline]
    pub(crate) fn r(&self, slot: usize, x: f64) -> f64 {
        self.formats[slot].round(x)
    }
}

pub fn run_kernel(bench: &BenchmarkDescriptor, input: &InputSet, config: &PrecisionConfig) -> Result<Vec<f64>> {
    config.validate(bench.n_var)?;
    if input.benchmark != bench.benchmark {
        return Err(Error::InvalidInput {
            benchmark: bench.name().to_string(),
            reason: format!("input set was generated for {}", input.benchmark),
        });
    }
    let expected = input_len(bench.benchmark, &input.shape)?;
    if input.values.len() != expected {
        return Err(Error::InvalidInput {
            benchmark: bench.name().to_string(),
            reason: format!("expected {expected} values, got {}", input.values.len()),
        });
    }
    let slots = Slots::from_config(config)?;
    let d = input.shape.dims();
    let v = &input.values;
    Ok(match bench.benchmark {
        Benchmark::Fwt => fwt::run(&slots, v),
        Benchmark::Saxpy => saxpy::run(&slots, d[0], v),
        Benchmark::Convolution => convolution::run(&slots, d[0], d[1], v),
        Benchmark::Dwt => dwt::run(&slots, v),
        Benchmark::Correlation => correlation::run(&slots, d[0], d[1], v),
        Benchmark::BScholes => bscholes::run(&slots, d[0], v),
        Benchmark::Jacobi => jacobi::run(&slots, d[0], d[1], v),
    })
}

impl InputSet {
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        writeln!(out, "# benchmark={} shape={} seed={}", self.benchmark, self.shape, self.seed)
            .expect("write to Vec");
        for x in &self.values {
            writeln!(out, "{x:?}").expect("write to Vec");
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parse_err = |line: usize, column: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            column,
            message,
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| parse_err(1, 1, "empty file".into()))?;
        let header = header
            .strip_prefix('#')
            .ok_or_else(|| parse_err(1, 1, "missing `#` header".into()))?;
        let (mut benchmark, mut shape, mut seed) = (None, None, None);
        for (col, field) in header.split_whitespace().enumerate() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| parse_err(1, col + 1, format!("expected key=value, got `{field}`")))?;
            match key {
                "benchmark" => benchmark = Some(value.parse::<Benchmark>().map_err(|e| parse_err(1, col + 1, e.to_string()))?),
                "shape" => shape = Some(value.parse::<Shape>().map_err(|e| parse_err(1, col + 1, e))?),
                "seed" => seed = Some(value.parse::<u64>().map_err(|e| parse_err(1, col + 1, e.to_string()))?),
                _ => return Err(parse_err(1, col + 1, format!("unknown key `{key}`"))),
            }
        }
        let benchmark = benchmark.ok_or_else(|| parse_err(1, 1, "missing benchmark".into()))?;
        let shape = shape.ok_or_else(|| parse_err(1, 1, "missing shape".into()))?;
        let seed = seed.ok_or_else(|| parse_err(1, 1, "missing seed".into()))?;
        let mut values = Vec::new();
        for (i, line) in lines.enumerate() {
            let x: f64 = line.trim().parse().map_err(|e| parse_err(i + 2, 1, format!("{e}")))?;
            if !x.is_finite() {
                return Err(parse_err(i + 2, 1, "non-finite input value".into()));
            }
            values.push(x);
        }
        let expected = input_len(benchmark, &shape)?;
        if values.len() != expected {
            return Err(parse_err(values.len() + 2, 1, format!("expected {expected} values, got {}", values.len())));
        }
        Ok(InputSet { benchmark, shape, seed, values })
    }
}
