//! `y_i = a * x_i + y_i`.
//!
//! Slots: 0 `a`, 1 `x`, 2 `y`. The product `a * x_i` is formed at the
//! precision of `y`, which therefore also serves as the multiply temporary.
//! Input layout: `[a, x_0..x_n, y_0..y_n]`.

use super::{DependencyEdge, Slots};

pub(super) const SLOTS: &[&str] = &["a", "x", "y"];

const A: usize = 0;
const X: usize = 1;
const Y: usize = 2;

pub(super) fn edges() -> Vec<DependencyEdge> {
    vec![DependencyEdge::cast(&[A, X], Y)]
}

pub(super) fn run(s: &Slots, n: usize, v: &[f64]) -> Vec<f64> {
    let a = s.r(A, v[0]);
    let (xs, ys) = v[1..].split_at(n);
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let x = s.r(X, x);
            let y = s.r(Y, y);
            let t = s.r(Y, a * x);
            s.r(Y, t + y)
        })
        .collect()
}
