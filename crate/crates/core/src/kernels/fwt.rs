//! In-place fast Walsh-Hadamard transform of a real vector.
//!
//! Slots: 0 `data` (the vector), 1 `t_butterfly` (butterfly sum/difference).

use super::{DependencyEdge, Slots};

pub(super) const SLOTS: &[&str] = &["data", "t_butterfly"];

const DATA: usize = 0;
const TMP: usize = 1;

pub(super) fn edges() -> Vec<DependencyEdge> {
    vec![DependencyEdge::assignment(TMP, DATA)]
}

pub(super) fn run(s: &Slots, v: &[f64]) -> Vec<f64> {
    let mut d: Vec<f64> = v.iter().map(|&x| s.r(DATA, x)).collect();
    let n = d.len();
    let mut h = 1;
    while h < n {
        for start in (0..n).step_by(2 * h) {
            for j in start..start + h {
                let (u, w) = (d[j], d[j + h]);
                d[j] = s.r(DATA, s.r(TMP, u + w));
                d[j + h] = s.r(DATA, s.r(TMP, u - w));
            }
        }
        h *= 2;
    }
    d
}
