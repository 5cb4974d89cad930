//! Valid 2-D convolution of a square matrix with a square filter.
//!
//! Slots: 0 `image`, 1 `filter`, 2 `t_mul` (pixel-times-weight), 3 `acc`
//! (the running sum, which is also the output element).
//! Input layout: row-major image (`side^2`) then row-major filter (`k^2`).

use super::{DependencyEdge, Slots};

pub(super) const SLOTS: &[&str] = &["image", "filter", "t_mul", "acc"];

const IMAGE: usize = 0;
const FILTER: usize = 1;
const MUL: usize = 2;
const ACC: usize = 3;

pub(super) fn edges() -> Vec<DependencyEdge> {
    vec![DependencyEdge::cast(&[IMAGE, FILTER], MUL), DependencyEdge::assignment(MUL, ACC)]
}

pub(super) fn run(s: &Slots, side: usize, k: usize, v: &[f64]) -> Vec<f64> {
    let (img, flt) = v.split_at(side * side);
    let img: Vec<f64> = img.iter().map(|&x| s.r(IMAGE, x)).collect();
    let flt: Vec<f64> = flt.iter().map(|&x| s.r(FILTER, x)).collect();
    let out_side = side - k + 1;
    let mut out = Vec::with_capacity(out_side * out_side);
    for i in 0..out_side {
        for j in 0..out_side {
            let mut acc = 0.0;
            for ki in 0..k {
                let row = &img[(i + ki) * side + j..(i + ki) * side + j + k];
                for (kj, &p) in row.iter().enumerate() {
                    let t = s.r(MUL, p * flt[ki * k + kj]);
                    acc = s.r(ACC, acc + t);
                }
            }
            out.push(acc);
        }
    }
    out
}
