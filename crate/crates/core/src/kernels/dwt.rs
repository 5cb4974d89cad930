//! Multi-level orthonormal Haar wavelet transform.
//!
//! Each level splits the current signal into even and odd samples and emits
//! `(even + odd) / sqrt(2)` as the next approximation and `(even - odd) / sqrt(2)`
//! as detail coefficients. Output: details of every level (finest first)
//! followed by the final approximation.
//!
//! Slots: 0 `even`, 1 `odd`, 2 `coef` (1/sqrt 2), 3 `t_sum`, 4 `t_diff`,
//! 5 `approx`, 6 `detail`.

use super::{DependencyEdge, Slots};

pub(super) const SLOTS: &[&str] = &["even", "odd", "coef", "t_sum", "t_diff", "approx", "detail"];

const EVEN: usize = 0;
const ODD: usize = 1;
const COEF: usize = 2;
const SUM: usize = 3;
const DIFF: usize = 4;
const APPROX: usize = 5;
const DETAIL: usize = 6;

pub(super) fn edges() -> Vec<DependencyEdge> {
    vec![
        DependencyEdge::cast(&[EVEN, ODD], SUM),
        DependencyEdge::cast(&[EVEN, ODD], DIFF),
        DependencyEdge::assignment(SUM, APPROX),
        DependencyEdge::assignment(DIFF, DETAIL),
    ]
}

pub(super) fn run(s: &Slots, v: &[f64]) -> Vec<f64> {
    let c = s.r(COEF, std::f64::consts::FRAC_1_SQRT_2);
    let mut out = Vec::with_capacity(v.len());
    let mut cur = v.to_vec();
    while cur.len() >= 2 {
        let half = cur.len() / 2;
        let mut approx = Vec::with_capacity(half);
        for pair in cur.chunks_exact(2) {
            let e = s.r(EVEN, pair[0]);
            let o = s.r(ODD, pair[1]);
            let sum = s.r(SUM, e + o);
            let diff = s.r(DIFF, e - o);
            approx.push(s.r(APPROX, sum * c));
            out.push(s.r(DETAIL, diff * c));
        }
        cur = approx;
    }
    out.push(cur[0]);
    out
}
