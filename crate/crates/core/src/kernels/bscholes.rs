//! Black-Scholes price of European call options.
//!
//! Slots:
//!  0 `spot`, 1 `strike`, 2 `rate`, 3 `vol`, 4 `time`,
//!  5 `t_log` = ln(spot / strike),
//!  6 `t_drift` = rate + vol^2 / 2,
//!  7 `t_volsqrt` = vol * sqrt(time),
//!  8 `d1`, 9 `d2`,
//!  10 `t_cnd1` = N(d1), 11 `t_cnd2` = N(d2),
//!  12 `t_disc` = strike * exp(-rate * time),
//!  13 `t_call1` = spot * N(d1),
//!  14 `price`.
//!
//! Transcendentals are evaluated in binary64 and rounded to the slot that
//! consumes them. Input layout: `[spot, strike, rate, vol, time]` per option.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{DependencyEdge, Slots};

pub(super) const SLOTS: &[&str] = &[
    "spot", "strike", "rate", "vol", "time", "t_log", "t_drift", "t_volsqrt", "d1", "d2", "t_cnd1",
    "t_cnd2", "t_disc", "t_call1", "price",
];

pub(super) const PARAMS: usize = 5;

const SPOT: usize = 0;
const STRIKE: usize = 1;
const RATE: usize = 2;
const VOL: usize = 3;
const TIME: usize = 4;
const LOG: usize = 5;
const DRIFT: usize = 6;
const VOLSQRT: usize = 7;
const D1: usize = 8;
const D2: usize = 9;
const CND1: usize = 10;
const CND2: usize = 11;
const DISC: usize = 12;
const CALL1: usize = 13;
const PRICE: usize = 14;

pub(super) fn edges() -> Vec<DependencyEdge> {
    vec![
        DependencyEdge::cast(&[SPOT, STRIKE], LOG),
        DependencyEdge::cast(&[RATE, VOL], DRIFT),
        DependencyEdge::cast(&[VOL, TIME], VOLSQRT),
        DependencyEdge::cast(&[VOLSQRT, D1], D2),
        DependencyEdge::cast(&[STRIKE, RATE], DISC),
        DependencyEdge::cast(&[SPOT, CND1], CALL1),
        DependencyEdge::assignment(CALL1, PRICE),
    ]
}

pub(super) fn generate(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(PARAMS * n);
    for _ in 0..n {
        v.push(rng.gen_range(10.0..100.0));
        v.push(rng.gen_range(10.0..100.0));
        v.push(rng.gen_range(0.01..0.05));
        v.push(rng.gen_range(0.1..0.5));
        v.push(rng.gen_range(0.25..2.0));
    }
    v
}

/// Standard normal CDF.
pub(crate) fn cnd(d: f64) -> f64 {
    0.5 * libm::erfc(-d / std::f64::consts::SQRT_2)
}

pub(super) fn run(s: &Slots, n: usize, v: &[f64]) -> Vec<f64> {
    v.chunks_exact(PARAMS)
        .take(n)
        .map(|p| {
            let spot = s.r(SPOT, p[0]);
            let strike = s.r(STRIKE, p[1]);
            let rate = s.r(RATE, p[2]);
            let vol = s.r(VOL, p[3]);
            let time = s.r(TIME, p[4]);

            let log = s.r(LOG, s.r(LOG, spot / strike).ln());
            let half_var = s.r(DRIFT, s.r(DRIFT, vol * vol) * 0.5);
            let drift = s.r(DRIFT, rate + half_var);
            let volsqrt = s.r(VOLSQRT, vol * s.r(VOLSQRT, time.sqrt()));
            let num = s.r(D1, log + s.r(D1, drift * time));
            let d1 = s.r(D1, num / volsqrt);
            let d2 = s.r(D2, d1 - volsqrt);
            let cnd1 = s.r(CND1, cnd(d1));
            let cnd2 = s.r(CND2, cnd(d2));
            let disc = s.r(DISC, strike * s.r(DISC, (-s.r(DISC, rate * time)).exp()));
            let call1 = s.r(CALL1, spot * cnd1);
            s.r(PRICE, call1 - s.r(PRICE, disc * cnd2))
        })
        .collect()
}
