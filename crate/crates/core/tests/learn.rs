use prectune::learn::*;
use prectune::Error;
use prectune::config::PrecisionConfig;
use prectune::dataset::{build_dataset, BitRange, Dataset, DatasetMeta, ErrorEvaluator, Sample};
use prectune::kernels::{describe, gen_input_set, Benchmark, Shape};

fn synthetic(samples: Vec<Sample>, nbit: BitRange) -> Dataset {
    let meta = DatasetMeta {
        benchmark: Benchmark::Saxpy,
        input_seed: 0,
        shape: Shape(vec![1]),
        sampling_seed: 0,
        nbit,
    };
    Dataset { meta, samples }
}

fn saxpy_dataset(n: usize, seed: u64) -> Dataset {
    let d = describe(Benchmark::Saxpy);
    let input = gen_input_set(&d, &d.default_shape, 1).unwrap();
    let eval = ErrorEvaluator::new(&d, &input).unwrap();
    build_dataset(&eval, n, seed, BitRange::default()).unwrap()
}

fn leaf(class: u8) -> Box<TreeNode> {
    Box::new(TreeNode::Leaf { class })
}

#[test]
fn defaults() {
    let c = TrainConfig::default();
    assert_eq!((c.epochs, c.batch_size, c.dt_max_depth), (100, 32, 20));
    assert_eq!(c.class_threshold, 0.9);
    assert_eq!(topology(3), vec![3, 6, 6, 3, 1]);
}

#[test]
fn zero_weights_give_the_bias() {
    let mut rng = rand::SeedableRng::seed_from_u64(0);
    let mut m = MlpModel::init(&topology(2), vec![2.0; 2], vec![52.0; 2], &mut rng);
    for l in &mut m.layers {
        l.weights.fill(0.0);
        l.bias.fill(0.0);
    }
    m.layers.last_mut().unwrap().bias[0] = 3.25;
    for bits in [[2, 2], [52, 7], [30, 30]] {
        assert_eq!(predict_logerr(&m, &PrecisionConfig::new(bits.to_vec())).unwrap(), 3.25);
    }
    assert!(matches!(
        predict_logerr(&m, &PrecisionConfig::new(vec![1, 2, 3])),
        Err(Error::WidthMismatch { expected: 2, got: 3 })
    ));
}

#[test]
fn dead_relu_passes_only_the_bias() {
    let m = MlpModel {
        layer_sizes: vec![1, 1, 1],
        layers: vec![
            Dense { inputs: 1, outputs: 1, weights: vec![-2.0], bias: vec![0.0], activation: Activation::Relu },
            Dense { inputs: 1, outputs: 1, weights: vec![5.0], bias: vec![1.5], activation: Activation::Linear },
        ],
        norm_lo: vec![4.0],
        norm_hi: vec![20.0],
    };
    for b in [4, 9, 20] {
        assert_eq!(m.predict(&PrecisionConfig::new(vec![b])).unwrap(), 1.5);
    }
}

#[test]
fn constant_target_is_fitted() {
    let nbit = BitRange::new(2, 52).unwrap();
    let configs = prectune::dataset::lhs_configs(3, 200, 2, 52, 4).unwrap();
    let samples: Vec<Sample> = configs.into_iter().map(|c| Sample::from_error(c, 1e-7)).collect();
    let ds = synthetic(samples, nbit);
    let m = train_regressor(&ds, &TrainConfig::default()).unwrap();
    for s in &ds.samples {
        let p = m.predict(&s.config).unwrap();
        assert!((p - 7.0).abs() <= 0.05, "{p}");
    }
}

#[test]
fn regressor_needs_small_error_samples() {
    let nbit = BitRange::default();
    let samples = vec![
        Sample::from_error(PrecisionConfig::new(vec![3]), 5.0),
        Sample::from_error(PrecisionConfig::new(vec![4]), f64::INFINITY),
        Sample::from_error(PrecisionConfig::new(vec![5]), 1e-3),
    ];
    let err = train_regressor(&synthetic(samples, nbit), &TrainConfig::default()).unwrap_err();
    assert!(matches!(err, Error::InsufficientData { needed: 2, have: 1, .. }));
}

#[test]
fn regressor_ignores_large_error_samples() {
    let nbit = BitRange::default();
    let small: Vec<Sample> =
        (2..40).map(|b| Sample::from_error(PrecisionConfig::new(vec![b, 60 - b]), 10f64.powi(-(b as i32 % 9)))).collect();
    let mut mixed = small.clone();
    for b in 2..30 {
        mixed.push(Sample::from_error(PrecisionConfig::new(vec![b, b]), 1e6));
    }
    let cfg = TrainConfig { epochs: 5, ..TrainConfig::default() };
    let a = train_regressor(&synthetic(small, nbit), &cfg).unwrap();
    let b = train_regressor(&synthetic(mixed, nbit), &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn classify_boundary_goes_left() {
    let m = DtModel {
        n_features: 2,
        max_depth: 1,
        root: TreeNode::Split { feature: 0, threshold: 8, left: leaf(1), right: leaf(0) },
    };
    assert_eq!(classify(&m, &PrecisionConfig::new(vec![8, 30])).unwrap(), 1);
    assert_eq!(classify(&m, &PrecisionConfig::new(vec![9, 30])).unwrap(), 0);
    assert!(classify(&m, &PrecisionConfig::new(vec![9])).is_err());
    let single = DtModel { n_features: 2, max_depth: 0, root: *leaf(0) };
    assert_eq!(classify(&single, &PrecisionConfig::new(vec![2, 2])).unwrap(), 0);
}

#[test]
fn separable_tree_has_one_split() {
    let samples: Vec<Sample> = (2..=20u32)
        .map(|x| Sample::from_error(PrecisionConfig::new(vec![x]), if x <= 8 { 2.0 } else { 1e-4 }))
        .collect();
    let m = train_classifier(&synthetic(samples, BitRange::default()), &TrainConfig::default()).unwrap();
    assert_eq!(m.root, TreeNode::Split { feature: 0, threshold: 8, left: leaf(1), right: leaf(0) });
}

#[test]
fn pure_dataset_is_a_leaf() {
    let samples: Vec<Sample> =
        (2..10u32).map(|x| Sample::from_error(PrecisionConfig::new(vec![x, x]), 1e-3)).collect();
    let m = train_classifier(&synthetic(samples, BitRange::default()), &TrainConfig::default()).unwrap();
    assert_eq!(m.root, *leaf(0));
    assert!(train_classifier(&synthetic(vec![], BitRange::default()), &TrainConfig::default()).is_err());
}

#[test]
fn split_ties_prefer_lowest_feature() {
    // Both features separate perfectly at 5.
    let samples: Vec<Sample> = (2..=9u32)
        .map(|x| Sample::from_error(PrecisionConfig::new(vec![x, x]), if x <= 5 { 2.0 } else { 0.0 }))
        .collect();
    let m = train_classifier(&synthetic(samples, BitRange::default()), &TrainConfig::default()).unwrap();
    assert!(matches!(m.root, TreeNode::Split { feature: 0, threshold: 5, .. }));
}

/// Path intervals never contradict: each split threshold lies strictly inside
/// the interval inherited from its ancestors.
fn check_paths(node: &TreeNode, lo: &mut Vec<i64>, hi: &mut Vec<i64>, depth: usize, max_depth: usize) {
    assert!(depth <= max_depth);
    if let TreeNode::Split { feature, threshold, left, right } = node {
        let t = *threshold as i64;
        assert!(lo[*feature] <= t && t < hi[*feature]);
        let old = hi[*feature];
        hi[*feature] = t;
        check_paths(left, lo, hi, depth + 1, max_depth);
        hi[*feature] = old;
        let old = lo[*feature];
        lo[*feature] = t + 1;
        check_paths(right, lo, hi, depth + 1, max_depth);
        lo[*feature] = old;
    }
}

#[test]
fn trained_tree_invariants() {
    let d = describe(Benchmark::Dwt);
    let input = gen_input_set(&d, &Shape(vec![64]), 1).unwrap();
    let eval = ErrorEvaluator::new(&d, &input).unwrap();
    let ds = build_dataset(&eval, 300, 3, BitRange::default()).unwrap();
    let cfg = TrainConfig { dt_max_depth: 4, ..TrainConfig::default() };
    let m = train_classifier(&ds, &cfg).unwrap();
    assert!(m.root.depth() <= 4);
    check_paths(&m.root, &mut vec![i64::MIN; 7], &mut vec![i64::MAX; 7], 0, 4);

    let full = train_classifier(&ds, &TrainConfig::default()).unwrap();
    check_paths(&full.root, &mut vec![i64::MIN; 7], &mut vec![i64::MAX; 7], 0, 20);
    // Distinct configurations are memorised at full depth.
    let reg = train_regressor(&ds, &TrainConfig { epochs: 2, ..TrainConfig::default() }).unwrap();
    let metrics = eval_models(&reg, &full, &ds, 0.9).unwrap();
    assert_eq!(metrics.accuracy, 1.0);
    assert_eq!(metrics.true_pos + metrics.true_neg, ds.len());
}

#[test]
fn eval_examples() {
    let nbit = BitRange::default();
    let samples: Vec<Sample> =
        (2..12u32).map(|x| Sample::from_error(PrecisionConfig::new(vec![x]), 1e-4)).collect();
    let ds = synthetic(samples, nbit);
    let reg = MlpModel {
        layer_sizes: vec![1, 1],
        layers: vec![Dense { inputs: 1, outputs: 1, weights: vec![0.0], bias: vec![4.0], activation: Activation::Linear }],
        norm_lo: vec![2.0],
        norm_hi: vec![52.0],
    };
    let cls = DtModel { n_features: 1, max_depth: 0, root: *leaf(0) };
    let m = eval_models(&reg, &cls, &ds, 0.9).unwrap();
    assert!(m.rmse.unwrap().abs() < 1e-12);
    assert_eq!(m.accuracy, 1.0);
    assert!(eval_models(&reg, &cls, &synthetic(vec![], nbit), 0.9).is_err());
}

#[test]
fn saxpy_models_are_accurate() {
    let ds = saxpy_dataset(1250, 11);
    let (train, held) = ds.split(0.8, 5);
    let cfg = TrainConfig::default();
    let reg = train_regressor(&train, &cfg).unwrap();
    let cls = train_classifier(&train, &cfg).unwrap();
    let m = eval_models(&reg, &cls, &held, cfg.class_threshold).unwrap();
    assert!(m.nrmse.unwrap() <= 0.15, "{m:?}");
    assert!(m.accuracy >= 0.99, "{m:?}");
    // every generated sample at full precision is far below 1e-20
    let top = reg.predict(&PrecisionConfig::uniform(3, 52)).unwrap();
    assert!(top >= 20.0, "{top}");
}

#[test]
fn training_is_deterministic() {
    let ds = saxpy_dataset(200, 2);
    let cfg = TrainConfig { epochs: 10, seed: 9, ..TrainConfig::default() };
    let a = serde_json::to_string(&train_regressor(&ds, &cfg).unwrap()).unwrap();
    let b = serde_json::to_string(&train_regressor(&ds, &cfg).unwrap()).unwrap();
    assert_eq!(a, b);
    let c = serde_json::to_string(&train_regressor(&ds, &TrainConfig { seed: 10, ..cfg.clone() }).unwrap()).unwrap();
    assert_ne!(a, c);
}

#[test]
fn json_round_trip() {
    let ds = saxpy_dataset(100, 2);
    let cfg = TrainConfig { epochs: 3, ..TrainConfig::default() };
    let reg = train_regressor(&ds, &cfg).unwrap();
    let cls = train_classifier(&ds, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (rp, cp) = (regressor_path(dir.path(), "saxpy"), classifier_path(dir.path(), "saxpy"));
    assert!(rp.ends_with("saxpy.regressor.json"));
    save_json(&reg, &rp).unwrap();
    save_json(&cls, &cp).unwrap();
    let reg2: MlpModel = load_json(&rp).unwrap();
    let cls2: DtModel = load_json(&cp).unwrap();
    assert_eq!(reg, reg2);
    assert_eq!(cls, cls2);
    let c = PrecisionConfig::new(vec![7, 9, 11]);
    assert_eq!(reg.predict(&c).unwrap().to_bits(), reg2.predict(&c).unwrap().to_bits());
}
