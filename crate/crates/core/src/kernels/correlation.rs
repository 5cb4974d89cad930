//! Pearson correlation matrix of `m` series with `n` points each.
//!
//! Output: the upper triangle (diagonal included) in row-major order.
//!
//! Slots: 0 `data`, 1 `mean`, 2 `t_center` (data - mean), 3 `stddev`,
//! 4 `t_prod` (product of centered values), 5 `acc` (running sums),
//! 6 `corr`.

use super::{DependencyEdge, Slots};

pub(super) const SLOTS: &[&str] = &["data", "mean", "t_center", "stddev", "t_prod", "acc", "corr"];

const DATA: usize = 0;
const MEAN: usize = 1;
const CENTER: usize = 2;
const STDDEV: usize = 3;
const PROD: usize = 4;
const ACC: usize = 5;
const CORR: usize = 6;

pub(super) fn edges() -> Vec<DependencyEdge> {
    vec![
        DependencyEdge::cast(&[DATA, MEAN], CENTER),
        DependencyEdge::assignment(PROD, ACC),
        DependencyEdge::assignment(ACC, CORR),
    ]
}

pub(super) fn run(s: &Slots, m: usize, n: usize, v: &[f64]) -> Vec<f64> {
    let data: Vec<f64> = v.iter().map(|&x| s.r(DATA, x)).collect();
    let nf = n as f64;
    let series = |j: usize| &data[j * n..(j + 1) * n];

    let mean: Vec<f64> = (0..m)
        .map(|j| {
            let mut acc = 0.0;
            for &x in series(j) {
                acc = s.r(ACC, acc + x);
            }
            s.r(MEAN, acc / nf)
        })
        .collect();

    let centered: Vec<Vec<f64>> =
        (0..m).map(|j| series(j).iter().map(|&x| s.r(CENTER, x - mean[j])).collect()).collect();

    let stddev: Vec<f64> = centered
        .iter()
        .map(|c| {
            let mut acc = 0.0;
            for &x in c {
                acc = s.r(ACC, acc + s.r(PROD, x * x));
            }
            s.r(STDDEV, (acc / nf).sqrt())
        })
        .collect();

    let mut out = Vec::with_capacity(m * (m + 1) / 2);
    for j in 0..m {
        for l in j..m {
            let mut acc = 0.0;
            for (&a, &b) in centered[j].iter().zip(&centered[l]) {
                acc = s.r(ACC, acc + s.r(PROD, a * b));
            }
            let cov = s.r(CORR, acc / nf);
            let denom = s.r(CORR, stddev[j] * stddev[l]);
            out.push(s.r(CORR, cov / denom));
        }
    }
    out
}
