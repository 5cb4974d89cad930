//! CART classifier with Gini impurity over integer features.

use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::config::PrecisionConfig;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum TreeNode {
    Leaf { class: u8 },
    /// Goes left when `x[feature] <= threshold`.
    Split { feature: usize, threshold: u32, left: Box<TreeNode>, right: Box<TreeNode> },
}

impl TreeNode {
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaves() + right.leaves(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DtModel {
    pub n_features: usize,
    pub max_depth: usize,
    pub root: TreeNode,
}

impl DtModel {
    pub fn classify_bits(&self, bits: &[u32]) -> u8 {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { class } => return *class,
                TreeNode::Split { feature, threshold, left, right } => {
                    node = if bits[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn classify(&self, config: &PrecisionConfig) -> Result<u8> {
        if config.len() != self.n_features {
            return Err(Error::WidthMismatch { expected: self.n_features, got: config.len() });
        }
        Ok(self.classify_bits(&config.bits))
    }
}

pub fn classify(m: &DtModel, config: &PrecisionConfig) -> Result<u8> {
    m.classify(config)
}

struct Rows<'a> {
    x: Vec<&'a [u32]>,
    y: Vec<u8>,
}

/// Labels are recomputed from the stored error with `cfg.class_threshold`.
pub fn train_classifier(ds: &Dataset, cfg: &TrainConfig) -> Result<DtModel> {
    if ds.is_empty() {
        return Err(Error::InsufficientData { what: "samples for the classifier", needed: 1, have: 0 });
    }
    let rows = Rows {
        x: ds.samples.iter().map(|s| s.config.bits.as_slice()).collect(),
        y: ds.samples.iter().map(|s| u8::from(!(s.error <= cfg.class_threshold))).collect(),
    };
    let n_features = ds.n_var();
    let idx: Vec<usize> = (0..rows.y.len()).collect();
    let root = grow(&rows, n_features, idx, 0, cfg.dt_max_depth);
    Ok(DtModel { n_features, max_depth: cfg.dt_max_depth, root })
}

fn majority(ones: usize, total: usize) -> u8 {
    u8::from(2 * ones >= total)
}

fn grow(rows: &Rows, n_features: usize, idx: Vec<usize>, depth: usize, max_depth: usize) -> TreeNode {
    let ones = idx.iter().filter(|&&i| rows.y[i] == 1).count();
    let leaf = TreeNode::Leaf { class: majority(ones, idx.len()) };
    if depth >= max_depth || idx.len() < 2 || ones == 0 || ones == idx.len() {
        return leaf;
    }
    let Some((feature, threshold)) = best_split(rows, n_features, &idx, ones) else {
        return leaf;
    };
    let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| rows.x[i][feature] <= threshold);
    TreeNode::Split {
        feature,
        threshold,
        left: Box::new(grow(rows, n_features, l, depth + 1, max_depth)),
        right: Box::new(grow(rows, n_features, r, depth + 1, max_depth)),
    }
}

/// Score to maximise: sum over children of `(c0^2 + c1^2) / size`, which is the
/// negated weighted Gini impurity up to a constant. Ties keep the lowest feature,
/// then the lowest threshold.
fn best_split(rows: &Rows, n_features: usize, idx: &[usize], ones: usize) -> Option<(usize, u32)> {
    let total = idx.len();
    let mut best: Option<(f64, usize, u32)> = None;
    let mut sorted: Vec<(u32, u8)> = Vec::with_capacity(total);
    for f in 0..n_features {
        sorted.clear();
        sorted.extend(idx.iter().map(|&i| (rows.x[i][f], rows.y[i])));
        sorted.sort_unstable();
        let (mut left_n, mut left_ones) = (0usize, 0usize);
        for k in 0..total - 1 {
            left_n += 1;
            left_ones += sorted[k].1 as usize;
            if sorted[k].0 == sorted[k + 1].0 {
                continue;
            }
            let score = purity(left_ones, left_n) + purity(ones - left_ones, total - left_n);
            if best.map_or(true, |(s, _, _)| score > s) {
                best = Some((score, f, sorted[k].0));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

fn purity(ones: usize, n: usize) -> f64 {
    let zeros = n - ones;
    ((ones * ones + zeros * zeros) as f64) / n as f64
}
