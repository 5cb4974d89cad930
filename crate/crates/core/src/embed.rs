//! Bounds of the learned models over boxes of precision domains.
//!
//! The regressor is bounded by interval propagation. Each bound is computed
//! with the same operation order as [`MlpModel::forward`], and every rounded
//! operation involved is monotone, so the bounds contain the prediction of
//! every configuration in the box and collapse onto it for a singleton box.

use serde::{Deserialize, Serialize};

use crate::config::PrecisionConfig;
use crate::dataset::BitRange;
use crate::error::{Error, Result};
use crate::learn::{Activation, DtModel, MlpModel, TreeNode};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DomainBox {
    pub lo: Vec<u32>,
    pub hi: Vec<u32>,
}

impl DomainBox {
    pub fn new(lo: Vec<u32>, hi: Vec<u32>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::LengthMismatch { left: lo.len(), right: hi.len() });
        }
        if let Some((&l, &h)) = lo.iter().zip(&hi).find(|(l, h)| l > h) {
            return Err(Error::InvalidRange { lo: l, hi: h });
        }
        Ok(DomainBox { lo, hi })
    }

    pub fn full(n: usize, nbit: BitRange) -> Self {
        DomainBox { lo: vec![nbit.min; n], hi: vec![nbit.max; n] }
    }

    pub fn singleton(config: &PrecisionConfig) -> Self {
        DomainBox { lo: config.bits.clone(), hi: config.bits.clone() }
    }

    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }

    pub fn is_singleton(&self) -> bool {
        self.lo == self.hi
    }

    pub fn within(&self, nbit: BitRange) -> bool {
        self.lo.iter().all(|&l| l >= nbit.min) && self.hi.iter().all(|&h| h <= nbit.max)
    }

    pub fn contains(&self, bits: &[u32]) -> bool {
        bits.len() == self.len() && bits.iter().zip(self.lo.iter().zip(&self.hi)).all(|(b, (l, h))| l <= b && b <= h)
    }

    /// Number of integer points, saturating.
    pub fn volume(&self) -> u128 {
        self.lo.iter().zip(&self.hi).fold(1u128, |acc, (&l, &h)| acc.saturating_mul((h - l + 1) as u128))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputInterval {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoxStatus {
    AllZero,
    AllOne,
    Mixed,
}

pub fn nn_output_bounds(m: &MlpModel, dbox: &DomainBox) -> Result<OutputInterval> {
    if dbox.len() != m.input_width() {
        return Err(Error::WidthMismatch { expected: m.input_width(), got: dbox.len() });
    }
    let mut lo: Vec<f64> = dbox.lo.iter().enumerate().map(|(i, &b)| m.normalize(i, b as f64)).collect();
    let mut hi: Vec<f64> = dbox.hi.iter().enumerate().map(|(i, &b)| m.normalize(i, b as f64)).collect();
    let (mut next_lo, mut next_hi) = (Vec::new(), Vec::new());
    for layer in &m.layers {
        next_lo.clear();
        next_hi.clear();
        for o in 0..layer.outputs {
            let (mut a, mut b) = (layer.bias[o], layer.bias[o]);
            for ((&w, &l), &h) in layer.row(o).iter().zip(&lo).zip(&hi) {
                if w >= 0.0 {
                    a += w * l;
                    b += w * h;
                } else {
                    a += w * h;
                    b += w * l;
                }
            }
            if layer.activation == Activation::Relu {
                a = a.max(0.0);
                b = b.max(0.0);
            }
            next_lo.push(a);
            next_hi.push(b);
        }
        std::mem::swap(&mut lo, &mut next_lo);
        std::mem::swap(&mut hi, &mut next_hi);
    }
    Ok(OutputInterval { lower: lo[0], upper: hi[0] })
}

pub fn dt_box_status(m: &DtModel, dbox: &DomainBox) -> Result<BoxStatus> {
    if dbox.len() != m.n_features {
        return Err(Error::WidthMismatch { expected: m.n_features, got: dbox.len() });
    }
    Ok(node_status(&m.root, dbox))
}

fn node_status(node: &TreeNode, dbox: &DomainBox) -> BoxStatus {
    match node {
        TreeNode::Leaf { class: 0 } => BoxStatus::AllZero,
        TreeNode::Leaf { .. } => BoxStatus::AllOne,
        TreeNode::Split { feature, threshold, left, right } => {
            let go_left = dbox.lo[*feature] <= *threshold;
            let go_right = dbox.hi[*feature] > *threshold;
            match (go_left, go_right) {
                (true, false) => node_status(left, dbox),
                (false, true) => node_status(right, dbox),
                _ => {
                    let l = node_status(left, dbox);
                    if l == BoxStatus::Mixed {
                        return l;
                    }
                    let r = node_status(right, dbox);
                    if l == r {
                        l
                    } else {
                        BoxStatus::Mixed
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_dataset, ErrorEvaluator};
    use crate::kernels::{describe, gen_input_set, Benchmark};
    use crate::learn::{train_classifier, train_regressor, Dense, TrainConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn trained(b: Benchmark) -> (MlpModel, DtModel) {
        let d = describe(b);
        let input = gen_input_set(&d, &d.default_shape, 1).unwrap();
        let eval = ErrorEvaluator::new(&d, &input).unwrap();
        let ds = build_dataset(&eval, 300, 2, BitRange::default()).unwrap();
        let cfg = TrainConfig { epochs: 30, ..TrainConfig::default() };
        (train_regressor(&ds, &cfg).unwrap(), train_classifier(&ds, &cfg).unwrap())
    }

    fn random_box(rng: &mut ChaCha8Rng, n: usize) -> DomainBox {
        let (lo, hi) = (0..n)
            .map(|_| {
                let a = rng.gen_range(2..=52);
                let b = rng.gen_range(2..=52);
                (a.min(b), a.max(b))
            })
            .unzip();
        DomainBox::new(lo, hi).unwrap()
    }

    fn point_in(rng: &mut ChaCha8Rng, b: &DomainBox) -> PrecisionConfig {
        PrecisionConfig::new(b.lo.iter().zip(&b.hi).map(|(&l, &h)| rng.gen_range(l..=h)).collect())
    }

    #[test]
    fn box_validation() {
        assert!(DomainBox::new(vec![3, 4], vec![3]).is_err());
        assert!(matches!(DomainBox::new(vec![5], vec![4]), Err(Error::InvalidRange { .. })));
        let b = DomainBox::new(vec![2, 3], vec![4, 3]).unwrap();
        assert_eq!(b.volume(), 3);
        assert!(b.contains(&[4, 3]) && !b.contains(&[5, 3]));
        assert!(b.within(BitRange::default()));
    }

    #[test]
    fn zero_weight_model() {
        let m = MlpModel {
            layer_sizes: vec![2, 1],
            layers: vec![Dense { inputs: 2, outputs: 1, weights: vec![0.0, 0.0], bias: vec![-1.5], activation: Activation::Linear }],
            norm_lo: vec![2.0; 2],
            norm_hi: vec![52.0; 2],
        };
        let b = DomainBox::new(vec![2, 10], vec![40, 52]).unwrap();
        assert_eq!(nn_output_bounds(&m, &b).unwrap(), OutputInterval { lower: -1.5, upper: -1.5 });
        assert!(nn_output_bounds(&m, &DomainBox::new(vec![2], vec![3]).unwrap()).is_err());
    }

    #[test]
    fn tree_examples() {
        let leaf = |c| Box::new(TreeNode::Leaf { class: c });
        let single = DtModel { n_features: 2, max_depth: 0, root: *leaf(0) };
        assert_eq!(dt_box_status(&single, &DomainBox::full(2, BitRange::default())).unwrap(), BoxStatus::AllZero);
        let m = DtModel {
            n_features: 2,
            max_depth: 1,
            root: TreeNode::Split { feature: 0, threshold: 8, left: leaf(1), right: leaf(0) },
        };
        let right_only = DomainBox::new(vec![9, 2], vec![52, 52]).unwrap();
        assert_eq!(dt_box_status(&m, &right_only).unwrap(), BoxStatus::AllZero);
        let both = DomainBox::new(vec![5, 2], vec![12, 52]).unwrap();
        assert_eq!(dt_box_status(&m, &both).unwrap(), BoxStatus::Mixed);
        let left_only = DomainBox::new(vec![2, 2], vec![8, 52]).unwrap();
        assert_eq!(dt_box_status(&m, &left_only).unwrap(), BoxStatus::AllOne);
        assert!(dt_box_status(&m, &DomainBox::new(vec![2], vec![3]).unwrap()).is_err());
    }

    #[test]
    fn nn_bounds_are_sound_and_exact_at_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for b in [Benchmark::Saxpy, Benchmark::Dwt] {
            let (reg, _) = trained(b);
            let n = reg.input_width();
            for _ in 0..2000 {
                let bx = random_box(&mut rng, n);
                let iv = nn_output_bounds(&reg, &bx).unwrap();
                assert!(iv.lower <= iv.upper);
                let c = point_in(&mut rng, &bx);
                let p = reg.predict(&c).unwrap();
                assert!(iv.lower <= p && p <= iv.upper, "{b}: {p} not in {iv:?}");
                let s = nn_output_bounds(&reg, &DomainBox::singleton(&c)).unwrap();
                assert_eq!((s.lower.to_bits(), s.upper.to_bits()), (p.to_bits(), p.to_bits()));
            }
        }
    }

    #[test]
    fn shrinking_never_widens() {
        let (reg, _) = trained(Benchmark::Correlation);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let outer = random_box(&mut rng, 7);
            let a = point_in(&mut rng, &outer);
            let c = point_in(&mut rng, &outer);
            let (lo, hi) = a.bits.iter().zip(&c.bits).map(|(&x, &y)| (x.min(y), x.max(y))).unzip();
            let inner = DomainBox::new(lo, hi).unwrap();
            let (o, i) = (nn_output_bounds(&reg, &outer).unwrap(), nn_output_bounds(&reg, &inner).unwrap());
            assert!(i.lower >= o.lower && i.upper <= o.upper);
        }
    }

    /// Splits the domain along every threshold of the tree; each cell is then
    /// decided by a single leaf.
    #[test]
    fn tree_cells_are_never_mixed() {
        let (_, cls) = trained(Benchmark::Saxpy);
        let mut cuts: Vec<Vec<u32>> = vec![vec![]; cls.n_features];
        fn collect(node: &TreeNode, cuts: &mut [Vec<u32>]) {
            if let TreeNode::Split { feature, threshold, left, right } = node {
                cuts[*feature].push(*threshold);
                collect(left, cuts);
                collect(right, cuts);
            }
        }
        collect(&cls.root, &mut cuts);
        let cells: Vec<Vec<(u32, u32)>> = cuts
            .iter_mut()
            .map(|c| {
                c.sort_unstable();
                c.dedup();
                let mut edges = vec![1u32];
                edges.extend(c.iter().map(|t| t + 1));
                edges.push(53);
                edges.windows(2).map(|w| (w[0], w[1] - 1)).collect()
            })
            .collect();
        let mut idx = vec![0usize; cells.len()];
        loop {
            let lo = idx.iter().enumerate().map(|(f, &k)| cells[f][k].0).collect();
            let hi = idx.iter().enumerate().map(|(f, &k)| cells[f][k].1).collect();
            let bx = DomainBox::new(lo, hi).unwrap();
            assert_ne!(dt_box_status(&cls, &bx).unwrap(), BoxStatus::Mixed);
            let mut f = 0;
            while f < idx.len() {
                idx[f] += 1;
                if idx[f] < cells[f].len() {
                    break;
                }
                idx[f] = 0;
                f += 1;
            }
            if f == idx.len() {
                break;
            }
        }
    }

    #[test]
    fn tree_singletons_agree_and_boxes_are_sound() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (_, cls) = trained(Benchmark::Dwt);
        for _ in 0..2000 {
            let bx = random_box(&mut rng, 7);
            let c = point_in(&mut rng, &bx);
            let class = cls.classify(&c).unwrap();
            let single = dt_box_status(&cls, &DomainBox::singleton(&c)).unwrap();
            assert_eq!(single, if class == 0 { BoxStatus::AllZero } else { BoxStatus::AllOne });
            match dt_box_status(&cls, &bx).unwrap() {
                BoxStatus::AllZero => assert_eq!(class, 0),
                BoxStatus::AllOne => assert_eq!(class, 1),
                BoxStatus::Mixed => {}
            }
        }
    }
}
