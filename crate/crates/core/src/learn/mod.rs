//! Empirical error models: an MLP regressor for `-log10 E` and a decision-tree
//! classifier flagging large-error configurations.
//!
//! Both models serialize to JSON. The regressor file holds `layer_sizes`,
//! one record per layer (`inputs`, `outputs`, row-major `weights`, `bias`,
//! `activation`), and the per-dimension normalization bounds `norm_lo` /
//! `norm_hi`. The classifier file holds `n_features`, `max_depth` and a nested
//! `root` whose nodes are either `{"node":"leaf","class":c}` or
//! `{"node":"split","feature":f,"threshold":t,"left":..,"right":..}`.

mod mlp;
mod tree;

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use mlp::{predict_logerr, topology, train_regressor, Activation, Dense, MlpModel};
pub use tree::{classify, train_classifier, DtModel, TreeNode};

use crate::dataset::{Dataset, CLASS_THRESHOLD};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub dt_max_depth: usize,
    pub class_threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            dt_max_depth: 20,
            class_threshold: CLASS_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    /// RMSE of the regressor on held-out small-error samples, `None` if there are none.
    pub rmse: Option<f64>,
    /// `rmse` divided by the range of the held-out targets (plain `rmse` if the range is 0).
    pub nrmse: Option<f64>,
    pub accuracy: f64,
    pub true_pos: usize,
    pub true_neg: usize,
    pub false_pos: usize,
    pub false_neg: usize,
}

/// Class 1 counts as positive. Labels are recomputed with `class_threshold`.
pub fn eval_models(reg: &MlpModel, cls: &DtModel, heldout: &Dataset, class_threshold: f64) -> Result<Metrics> {
    if heldout.is_empty() {
        return Err(Error::InsufficientData { what: "held-out samples", needed: 1, have: 0 });
    }
    let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
    let mut sq = 0.0;
    let mut targets = Vec::new();
    for s in &heldout.samples {
        let truth = !(s.error <= class_threshold);
        match (cls.classify(&s.config)? == 1, truth) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
        }
        if !truth {
            let d = reg.predict(&s.config)? - s.log_err;
            sq += d * d;
            targets.push(s.log_err);
        }
    }
    let rmse = (!targets.is_empty()).then(|| (sq / targets.len() as f64).sqrt());
    let range = targets.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - targets.iter().cloned().fold(f64::INFINITY, f64::min);
    let nrmse = rmse.map(|r| if range > 0.0 { r / range } else { r });
    Ok(Metrics {
        rmse,
        nrmse,
        accuracy: (tp + tn) as f64 / heldout.len() as f64,
        true_pos: tp,
        true_neg: tn,
        false_pos: fp,
        false_neg: fn_,
    })
}

pub fn regressor_path(dir: &Path, bench: &str) -> PathBuf {
    dir.join(format!("{bench}.regressor.json"))
}

pub fn classifier_path(dir: &Path, bench: &str) -> PathBuf {
    dir.join(format!("{bench}.classifier.json"))
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
