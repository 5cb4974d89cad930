//! Reduced-precision floating point emulated on top of `f64`.
//!
//! A [`FlexFormat`] describes a binary floating-point format with a
//! configurable number of explicit fraction bits and exponent bits. Values
//! are always carried as `f64`; [`FlexFormat::round`] snaps an `f64` onto the
//! nearest value the format can represent (round-to-nearest, ties to even),
//! including gradual underflow and overflow to infinity.
//!
//! Arithmetic is computed once in binary64 and then rounded to the result
//! format. Operands are never re-rounded by [`flex_op`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_MANTISSA_BITS: u32 = 1;
pub const MAX_MANTISSA_BITS: u32 = 52;
pub const MIN_EXPONENT_BITS: u32 = 2;
pub const MAX_EXPONENT_BITS: u32 = 11;

const F64_FRAC_BITS: u32 = 52;
const F64_FRAC_MASK: u64 = (1 << F64_FRAC_BITS) - 1;
const F64_EXP_MASK: u64 = 0x7ff;
const F64_SIGN_MASK: u64 = 1 << 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FlexFormat {
    mantissa_bits: u32,
    exponent_bits: u32,
}

impl FlexFormat {
    pub const BINARY64: FlexFormat = FlexFormat { mantissa_bits: 52, exponent_bits: 11 };

    pub fn new(mantissa_bits: u32, exponent_bits: u32) -> Result<Self> {
        if !(MIN_MANTISSA_BITS..=MAX_MANTISSA_BITS).contains(&mantissa_bits)
            || !(MIN_EXPONENT_BITS..=MAX_EXPONENT_BITS).contains(&exponent_bits)
        {
            return Err(Error::InvalidFormat { mantissa_bits, exponent_bits });
        }
        Ok(FlexFormat { mantissa_bits, exponent_bits })
    }

    /// Format with the given mantissa width and the full binary64 exponent range.
    pub fn with_mantissa(mantissa_bits: u32) -> Result<Self> {
        Self::new(mantissa_bits, MAX_EXPONENT_BITS)
    }

    pub fn mantissa_bits(&self) -> u32 {
        self.mantissa_bits
    }

    pub fn exponent_bits(&self) -> u32 {
        self.exponent_bits
    }

    pub fn is_binary64(&self) -> bool {
        *self == Self::BINARY64
    }

    /// Largest unbiased exponent of a normal number.
    pub fn emax(&self) -> i32 {
        (1i32 << (self.exponent_bits - 1)) - 1
    }

    /// Smallest unbiased exponent of a normal number.
    pub fn emin(&self) -> i32 {
        1 - self.emax()
    }

    pub fn max_finite(&self) -> f64 {
        // (2 - 2^-m) * 2^emax, built as (2^(m+1) - 1) * 2^(emax - m).
        let sig = ((1u64 << (self.mantissa_bits + 1)) - 1) as f64;
        sig * pow2(self.emax() - self.mantissa_bits as i32)
    }

    pub fn min_subnormal(&self) -> f64 {
        pow2(self.emin() - self.mantissa_bits as i32)
    }

    /// Rounds `x` to the nearest value representable in this format.
    #[inline]
    pub fn round(&self, x: f64) -> f64 {
        if self.is_binary64() || !x.is_finite() {
            return x;
        }
        if self.exponent_bits == MAX_EXPONENT_BITS {
            // Same exponent range as binary64: subnormals share the lowest
            // binade's quantum, so nearest-even on the encoding is exact and
            // a carry out of the top binade lands on infinity.
            let shift = F64_FRAC_BITS - self.mantissa_bits;
            let bits = x.to_bits();
            let lsb = (bits >> shift) & 1;
            let rounded = (bits + ((1u64 << (shift - 1)) - 1) + lsb) & !((1u64 << shift) - 1);
            return f64::from_bits(rounded);
        }
        self.round_general(x)
    }

    fn round_general(&self, x: f64) -> f64 {
        if x == 0.0 {
            return x;
        }
        let bits = x.to_bits();
        let sign = bits & F64_SIGN_MASK;
        let biased = ((bits >> F64_FRAC_BITS) & F64_EXP_MASK) as i32;
        let frac = bits & F64_FRAC_MASK;

        // |x| = sig * 2^scale, with `exp` = floor(log2 |x|).
        let (sig, scale, exp) = if biased == 0 {
            let width = 64 - frac.leading_zeros() as i32;
            (frac, -1074, width - 1 - 1074)
        } else {
            (frac | (1 << F64_FRAC_BITS), biased - 1075, biased - 1023)
        };

        let quantum = exp.max(self.emin()) - self.mantissa_bits as i32;
        let shift = quantum - scale;
        if shift <= 0 {
            return self.check_overflow(x);
        }
        let rounded = if shift >= 64 {
            0
        } else {
            let q = sig >> shift;
            let rem = sig & ((1u64 << shift) - 1);
            let half = 1u64 << (shift - 1);
            if rem > half || (rem == half && q & 1 == 1) {
                q + 1
            } else {
                q
            }
        };
        let magnitude = if rounded == 0 { 0.0 } else { rounded as f64 * pow2(quantum) };
        let value = f64::from_bits(magnitude.to_bits() | sign);
        self.check_overflow(value)
    }

    fn check_overflow(&self, x: f64) -> f64 {
        if x.abs() > self.max_finite() {
            f64::INFINITY.copysign(x)
        } else {
            x
        }
    }

    pub fn is_representable(&self, x: f64) -> bool {
        x.is_nan() || self.round(x) == x
    }
}

/// Exact power of two for `k` in the binary64 range, subnormals included.
fn pow2(k: i32) -> f64 {
    debug_assert!((-1074..=1023).contains(&k));
    if k >= -1022 {
        f64::from_bits(((k + 1023) as u64) << F64_FRAC_BITS)
    } else {
        f64::from_bits(1u64 << (k + 1074))
    }
}

pub fn round_to_format(x: f64, fmt: FlexFormat) -> f64 {
    fmt.round(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpKind {
    Add,
    Sub,
    Mul,
    Div,
}

impl OpKind {
    pub const ALL: [OpKind; 4] = [OpKind::Add, OpKind::Sub, OpKind::Mul, OpKind::Div];

    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            OpKind::Add => a + b,
            OpKind::Sub => a - b,
            OpKind::Mul => a * b,
            OpKind::Div => a / b,
        }
    }
}

pub fn flex_op(kind: OpKind, a: f64, b: f64, result_fmt: FlexFormat) -> f64 {
    result_fmt.round(kind.apply(a, b))
}


#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fmt(m: u32) -> FlexFormat {
        FlexFormat::with_mantissa(m).unwrap()
    }

    #[test]
    fn format_bounds() {
        assert!(FlexFormat::new(0, 11).is_err());
        assert!(FlexFormat::new(53, 11).is_err());
        assert!(FlexFormat::new(10, 1).is_err());
        assert!(FlexFormat::new(10, 12).is_err());
        assert_eq!(FlexFormat::new(52, 11).unwrap(), FlexFormat::BINARY64);
        assert_eq!(FlexFormat::BINARY64.max_finite(), f64::MAX);
        assert_eq!(FlexFormat::BINARY64.min_subnormal(), 5e-324);
        // binary16: 10 fraction bits, 5 exponent bits.
        let half = FlexFormat::new(10, 5).unwrap();
        assert_eq!(half.max_finite(), 65504.0);
        assert_eq!(half.min_subnormal(), 2f64.powi(-24));
    }

    #[test]
    fn round_examples() {
        assert_eq!(round_to_format(1.0, fmt(3)), 1.0);
        let table = oracle::enumerate(FlexFormat::new(2, 11).unwrap());
        assert_eq!(oracle::nearest_even(&table, 0.1), 0.09375);
        assert_eq!(round_to_format(0.1, fmt(2)), 0.09375);
        assert_eq!(round_to_format(0.1, FlexFormat::BINARY64), 0.1);
    }

    #[test]
    fn op_examples() {
        assert_eq!(flex_op(OpKind::Add, 1.0, 1.0, fmt(3)), 2.0);
        let x = 1.0 + 2f64.powi(-10);
        assert_eq!(flex_op(OpKind::Add, 1.0, 2f64.powi(-10), fmt(5)), 1.0);
        assert_eq!(flex_op(OpKind::Add, 1.0, 2f64.powi(-10), fmt(10)), x);
        assert_eq!(flex_op(OpKind::Mul, 3.0, 7.0, FlexFormat::BINARY64), 21.0);
        assert!(flex_op(OpKind::Div, 1.0, 0.0, fmt(5)).is_infinite());
        assert!(flex_op(OpKind::Div, 0.0, 0.0, fmt(5)).is_nan());
    }

    #[test]
    fn ties_go_to_even() {
        // 1.001b halfway between 1.00b and 1.01b at 2 bits: 1.125 -> 1.0
        assert_eq!(fmt(2).round(1.125), 1.0);
        // 1.011b halfway between 1.01b and 1.10b: 1.375 -> 1.5
        assert_eq!(fmt(2).round(1.375), 1.5);
        assert_eq!(fmt(2).round(-1.375), -1.5);
    }

    #[test]
    fn special_values() {
        let f = fmt(4);
        assert!(f.round(f64::NAN).is_nan());
        assert_eq!(f.round(f64::INFINITY), f64::INFINITY);
        assert_eq!(f.round(f64::NEG_INFINITY), f64::NEG_INFINITY);
        assert!(f.round(-0.0).is_sign_negative());
        // Rounds up past f64::MAX region into overflow.
        assert_eq!(f.round(f64::MAX), f64::INFINITY);
        assert_eq!(f.round(-f64::MAX), f64::NEG_INFINITY);
    }

    #[test]
    fn small_exponent_overflow_and_subnormals() {
        let half = FlexFormat::new(10, 5).unwrap();
        assert_eq!(half.round(65504.0), 65504.0);
        assert_eq!(half.round(65519.0), 65504.0);
        assert_eq!(half.round(65520.0), f64::INFINITY);
        let tiny = half.min_subnormal();
        assert_eq!(half.round(tiny * 0.5), 0.0);
        assert_eq!(half.round(tiny * 0.75), tiny);
        assert_eq!(half.round(tiny * 1.5), 2.0 * tiny);
        assert_eq!(half.round(tiny * 2.5), 2.0 * tiny);
    }

    #[test]
    fn binary64_subnormals_with_narrow_mantissa() {
        let f = fmt(1);
        let tiny = f.min_subnormal();
        assert_eq!(tiny, 2f64.powi(-1000) * 2f64.powi(-23));
        assert_eq!(f.round(5e-324), 0.0);
        assert_eq!(f.round(tiny), tiny);
        assert_eq!(f.round(0.6 * tiny), tiny);
        assert_eq!(f.round(3.0 * tiny), 3.0 * tiny);
        // 2^-1022 * 1.75 -> 2^-1021 at one fraction bit
        let v = 1.75 * 2f64.powi(-1022);
        assert_eq!(f.round(v), 2f64.powi(-1021));
    }

    #[test]
    fn oracle_agreement_small_mantissas() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for exp_bits in [4u32, 11] {
            for m in 1..=6 {
                let f = FlexFormat::new(m, exp_bits).unwrap();
                let table = oracle::enumerate(f);
                let lo = f.min_subnormal().log2() - 2.0;
                let hi = (f.max_finite().log2() + 1.0).min(1023.99);
                for _ in 0..2000 {
                    let x = 2f64.powf(rng.gen_range(lo..hi)) * if rng.gen() { 1.0 } else { -1.0 };
                    assert_eq!(f.round(x), oracle::nearest_even(&table, x), "m={m} e={exp_bits} x={x:e}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn fast_path_matches_general(bits in any::<u64>(), m in 1u32..52) {
            let f = fmt(m);
            let x = f64::from_bits(bits);
            prop_assume!(x.is_finite());
            prop_assert_eq!(f.round(x).to_bits(), f.round_general(x).to_bits());
        }

        #[test]
        fn idempotent(bits in any::<u64>(), m in 1u32..=52, e in 2u32..=11) {
            let f = FlexFormat::new(m, e).unwrap();
            let x = f64::from_bits(bits);
            let once = f.round(x);
            let twice = f.round(once);
            prop_assert!(once.to_bits() == twice.to_bits() || (once.is_nan() && twice.is_nan()));
        }

        #[test]
        fn representable_values_are_fixed(sig in 0u64..(1 << 10), exp in -30i32..30, m in 10u32..=52) {
            let x = sig as f64 * 2f64.powi(exp);
            let f = fmt(m);
            prop_assert_eq!(f.round(x), x);
        }

        #[test]
        fn binary64_identity(a in any::<f64>(), b in any::<f64>()) {
            for kind in OpKind::ALL {
                let got = flex_op(kind, a, b, FlexFormat::BINARY64);
                let want = kind.apply(a, b);
                prop_assert!(got.to_bits() == want.to_bits() || (got.is_nan() && want.is_nan()));
            }
        }

        #[test]
        fn rounding_is_monotone(a in -1e6f64..1e6, b in -1e6f64..1e6, m in 1u32..=20) {
            let f = fmt(m);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(f.round(lo) <= f.round(hi));
        }
    }
}
