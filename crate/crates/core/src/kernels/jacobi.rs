//! Explicit heat-diffusion sweeps on a square grid with fixed boundary.
//!
//! Each sweep replaces every interior cell by a weighted five-point stencil
//! plus a heat source term, and accumulates the squared update as a residual.
//! Sweeping stops early once the residual drops to the tolerance.
//!
//! Slots:
//!  0 `u` (grid), 1 `u_new`,
//!  2..=6 stencil weights `w_c`, `w_n`, `w_s`, `w_w`, `w_e`,
//!  7..=11 weighted neighbours `p_c`, `p_n`, `p_s`, `p_w`, `p_e`,
//!  12 `s_ns`, 13 `s_we`, 14 `s_nbr`, 15 `s_all` (partial sums),
//!  16 `src`, 17 `dt`, 18 `t_heat` = dt * src, 19 `t_upd` = s_all + t_heat,
//!  20 `t_diff` = u_new - u, 21 `t_sq`, 22 `resid`, 23 `tol`, 24 `boundary`.
//!
//! Input layout: row-major initial grid (`side^2`, the border doubles as the
//! boundary condition) then row-major source term (`side^2`).

use super::{DependencyEdge, Slots};

pub(super) const SLOTS: &[&str] = &[
    "u", "u_new", "w_c", "w_n", "w_s", "w_w", "w_e", "p_c", "p_n", "p_s", "p_w", "p_e", "s_ns", "s_we",
    "s_nbr", "s_all", "src", "dt", "t_heat", "t_upd", "t_diff", "t_sq", "resid", "tol", "boundary",
];

const U: usize = 0;
const U_NEW: usize = 1;
const W: [usize; 5] = [2, 3, 4, 5, 6];
const P: [usize; 5] = [7, 8, 9, 10, 11];
const S_NS: usize = 12;
const S_WE: usize = 13;
const S_NBR: usize = 14;
const S_ALL: usize = 15;
const SRC: usize = 16;
const DT: usize = 17;
const HEAT: usize = 18;
const UPD: usize = 19;
const DIFF: usize = 20;
const SQ: usize = 21;
const RESID: usize = 22;
const TOL: usize = 23;
const BOUNDARY: usize = 24;

pub(crate) const WEIGHTS: [f64; 5] = [0.2, 0.2, 0.2, 0.2, 0.2];
pub(crate) const TIME_STEP: f64 = 0.1;
pub(crate) const TOLERANCE: f64 = 1e-12;

pub(super) fn edges() -> Vec<DependencyEdge> {
    let mut e: Vec<DependencyEdge> = (0..5).map(|k| DependencyEdge::cast(&[U, W[k]], P[k])).collect();
    e.extend([
        DependencyEdge::cast(&[P[1], P[2]], S_NS),
        DependencyEdge::cast(&[P[3], P[4]], S_WE),
        DependencyEdge::cast(&[S_NS, S_WE], S_NBR),
        DependencyEdge::cast(&[P[0], S_NBR], S_ALL),
        DependencyEdge::cast(&[SRC, DT], HEAT),
        DependencyEdge::cast(&[S_ALL, HEAT], UPD),
        DependencyEdge::assignment(UPD, U_NEW),
        DependencyEdge::assignment(BOUNDARY, U_NEW),
        DependencyEdge::cast(&[U_NEW, U], DIFF),
        DependencyEdge::assignment(SQ, RESID),
    ]);
    e
}

pub(super) fn run(s: &Slots, side: usize, iterations: usize, v: &[f64]) -> Vec<f64> {
    let (init, source) = v.split_at(side * side);
    let w: Vec<f64> = (0..5).map(|k| s.r(W[k], WEIGHTS[k])).collect();
    let dt = s.r(DT, TIME_STEP);
    let tol = s.r(TOL, TOLERANCE);
    let src: Vec<f64> = source.iter().map(|&x| s.r(SRC, x)).collect();
    let mut u: Vec<f64> = init.iter().map(|&x| s.r(U, x)).collect();
    let mut next = vec![0.0; side * side];
    let idx = |i: usize, j: usize| i * side + j;
    let on_border = |i: usize, j: usize| i == 0 || j == 0 || i == side - 1 || j == side - 1;

    for _ in 0..iterations {
        let mut resid = 0.0;
        for i in 0..side {
            for j in 0..side {
                if on_border(i, j) {
                    next[idx(i, j)] = s.r(U_NEW, s.r(BOUNDARY, init[idx(i, j)]));
                    continue;
                }
                let p_c = s.r(P[0], u[idx(i, j)] * w[0]);
                let p_n = s.r(P[1], u[idx(i - 1, j)] * w[1]);
                let p_s = s.r(P[2], u[idx(i + 1, j)] * w[2]);
                let p_w = s.r(P[3], u[idx(i, j - 1)] * w[3]);
                let p_e = s.r(P[4], u[idx(i, j + 1)] * w[4]);
                let s_ns = s.r(S_NS, p_n + p_s);
                let s_we = s.r(S_WE, p_w + p_e);
                let s_nbr = s.r(S_NBR, s_ns + s_we);
                let s_all = s.r(S_ALL, p_c + s_nbr);
                let heat = s.r(HEAT, dt * src[idx(i, j)]);
                let upd = s.r(UPD, s_all + heat);
                let new = s.r(U_NEW, upd);
                next[idx(i, j)] = new;
                let diff = s.r(DIFF, new - u[idx(i, j)]);
                resid = s.r(RESID, resid + s.r(SQ, diff * diff));
            }
        }
        for (dst, &x) in u.iter_mut().zip(&next) {
            *dst = s.r(U, x);
        }
        if resid <= tol {
            break;
        }
    }
    u
}
