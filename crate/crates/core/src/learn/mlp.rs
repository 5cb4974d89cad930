//! Dense ReLU regressor trained with Adam on mean squared error.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::config::PrecisionConfig;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Linear => x,
        }
    }
}

/// One affine layer; `weights` is row-major `(outputs, inputs)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn row(&self, o: usize) -> &[f64] {
        &self.weights[o * self.inputs..(o + 1) * self.inputs]
    }

    /// Pre-activation of output `o`: bias plus the dot product, summed in input order.
    #[inline]
    pub fn affine(&self, o: usize, x: &[f64]) -> f64 {
        let mut acc = self.bias[o];
        for (w, xi) in self.row(o).iter().zip(x) {
            acc += w * xi;
        }
        acc
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.outputs).map(|o| self.activation.apply(self.affine(o, x))));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layer_sizes: Vec<usize>,
    pub layers: Vec<Dense>,
    /// Raw bit-width mapped to 0 per input dimension.
    pub norm_lo: Vec<f64>,
    /// Raw bit-width mapped to 1 per input dimension.
    pub norm_hi: Vec<f64>,
}

/// `[n, 2n, 2n, n, 1]`.
pub fn topology(n: usize) -> Vec<usize> {
    vec![n, 2 * n, 2 * n, n, 1]
}

impl MlpModel {
    /// He-uniform initialised network with ReLU hidden layers and a linear output.
    pub fn init(layer_sizes: &[usize], norm_lo: Vec<f64>, norm_hi: Vec<f64>, rng: &mut ChaCha8Rng) -> Self {
        let last = layer_sizes.len() - 2;
        let layers = layer_sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (inputs, outputs) = (w[0], w[1]);
                let limit = (6.0 / inputs as f64).sqrt();
                Dense {
                    inputs,
                    outputs,
                    weights: (0..inputs * outputs).map(|_| rng.gen_range(-limit..limit)).collect(),
                    bias: vec![0.0; outputs],
                    activation: if i == last { Activation::Linear } else { Activation::Relu },
                }
            })
            .collect();
        MlpModel { layer_sizes: layer_sizes.to_vec(), layers, norm_lo, norm_hi }
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    #[inline]
    pub fn normalize(&self, i: usize, bits: f64) -> f64 {
        let span = self.norm_hi[i] - self.norm_lo[i];
        if span > 0.0 {
            (bits - self.norm_lo[i]) / span
        } else {
            0.0
        }
    }

    pub fn forward(&self, raw: &[f64]) -> f64 {
        let mut x: Vec<f64> = raw.iter().enumerate().map(|(i, &b)| self.normalize(i, b)).collect();
        let mut y = Vec::new();
        for layer in &self.layers {
            layer.forward(&x, &mut y);
            std::mem::swap(&mut x, &mut y);
        }
        x[0]
    }

    pub fn predict(&self, config: &PrecisionConfig) -> Result<f64> {
        if config.len() != self.input_width() {
            return Err(Error::WidthMismatch { expected: self.input_width(), got: config.len() });
        }
        let raw: Vec<f64> = config.bits.iter().map(|&b| b as f64).collect();
        Ok(self.forward(&raw))
    }
}

pub fn predict_logerr(m: &MlpModel, config: &PrecisionConfig) -> Result<f64> {
    m.predict(config)
}

struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    fn new(cfg: &TrainConfig, shapes: &[usize]) -> Self {
        Adam {
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.epsilon,
            t: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    fn step(&mut self, params: &mut [&mut [f64]], grads: &[Vec<f64>]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (k, p) in params.iter_mut().enumerate() {
            for (j, w) in p.iter_mut().enumerate() {
                let g = grads[k][j];
                let m = &mut self.m[k][j];
                let v = &mut self.v[k][j];
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                *w -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
            }
        }
    }
}

/// Trains on samples whose error is at most `cfg.class_threshold`.
pub fn train_regressor(ds: &Dataset, cfg: &TrainConfig) -> Result<MlpModel> {
    let rows: Vec<(Vec<f64>, f64)> = ds
        .samples
        .iter()
        .filter(|s| s.error <= cfg.class_threshold)
        .map(|s| (s.config.bits.iter().map(|&b| b as f64).collect(), s.log_err))
        .collect();
    if rows.len() < 2 {
        return Err(Error::InsufficientData { what: "small-error samples for the regressor", needed: 2, have: rows.len() });
    }
    let n = ds.n_var();
    let lo = vec![ds.meta.nbit.min as f64; n];
    let hi = vec![ds.meta.nbit.max as f64; n];

    let count = rows.len() as f64;
    let mean = rows.iter().map(|r| r.1).sum::<f64>() / count;
    let var = rows.iter().map(|r| (r.1 - mean).powi(2)).sum::<f64>() / count;
    let scale = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = MlpModel::init(&topology(n), lo, hi, &mut rng);
    let inputs: Vec<Vec<f64>> = rows
        .iter()
        .map(|(x, _)| x.iter().enumerate().map(|(i, &b)| model.normalize(i, b)).collect())
        .collect();
    let targets: Vec<f64> = rows.iter().map(|r| (r.1 - mean) / scale).collect();

    let shapes: Vec<usize> = model.layers.iter().flat_map(|l| [l.weights.len(), l.bias.len()]).collect();
    let mut adam = Adam::new(cfg, &shapes);
    let mut grads: Vec<Vec<f64>> = shapes.iter().map(|&s| vec![0.0; s]).collect();
    let mut acts: Vec<Vec<f64>> = vec![Vec::new(); model.layers.len() + 1];
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let batch_size = cfg.batch_size.max(1);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(batch_size) {
            grads.iter_mut().for_each(|g| g.fill(0.0));
            for &i in batch {
                backprop(&model, &inputs[i], targets[i], batch.len() as f64, &mut acts, &mut grads);
            }
            let mut params: Vec<&mut [f64]> =
                model.layers.iter_mut().flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()]).collect();
            adam.step(&mut params, &grads);
        }
    }

    let out = model.layers.last_mut().expect("network has layers");
    out.weights.iter_mut().for_each(|w| *w *= scale);
    out.bias.iter_mut().for_each(|b| *b = *b * scale + mean);
    Ok(model)
}

/// Accumulates the gradient of `(f(x) - y)^2 / batch` into `grads`.
fn backprop(model: &MlpModel, x: &[f64], y: f64, batch: f64, acts: &mut [Vec<f64>], grads: &mut [Vec<f64>]) {
    acts[0].clear();
    acts[0].extend_from_slice(x);
    for (k, layer) in model.layers.iter().enumerate() {
        let (head, tail) = acts.split_at_mut(k + 1);
        layer.forward(&head[k], &mut tail[0]);
    }
    let pred = acts[model.layers.len()][0];
    let mut delta = vec![2.0 * (pred - y) / batch];
    for (k, layer) in model.layers.iter().enumerate().rev() {
        let input = &acts[k];
        let output = &acts[k + 1];
        if layer.activation == Activation::Relu {
            for (d, &o) in delta.iter_mut().zip(output) {
                if o <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        let (gw, gb) = {
            let (a, b) = grads.split_at_mut(2 * k + 1);
            (&mut a[2 * k], &mut b[0])
        };
        for (o, &d) in delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            gb[o] += d;
            for (g, &xi) in gw[o * layer.inputs..(o + 1) * layer.inputs].iter_mut().zip(input) {
                *g += d * xi;
            }
        }
        if k > 0 {
            let mut next = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (n, &w) in next.iter_mut().zip(layer.row(o)) {
                    *n += d * w;
                }
            }
            delta = next;
        }
    }
}
