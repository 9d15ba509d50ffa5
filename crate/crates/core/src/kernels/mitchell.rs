//! Mitchell's piecewise-linear base-2 logarithm and the entropy and KL terms
//! built on it.
//!
//! A positive binary64 value is split as `x = 2^e (1 + m)` with `m in [0, 1)`
//! straight from its bit pattern, and `log2(x)` is approximated by `e + m`.
//! The estimate is exact at powers of two and never overshoots.

use std::f64::consts::LN_2;

use crate::error::{check_probability, domain, Result};

const EXP_MASK: u64 = 0x7ff0_0000_0000_0000;
const FRAC_MASK: u64 = 0x000f_ffff_ffff_ffff;
const EXP_BIAS: i64 = 1023;
const FRAC_SCALE: f64 = 1.0 / (1u64 << 52) as f64;
// 2^64, used to lift subnormals into the normal range.
const SUBNORMAL_LIFT: f64 = 18_446_744_073_709_551_616.0;

/// Splits a finite positive `x` into `(e, m)` with `x = 2^e (1 + m)`.
#[inline(always)]
pub(crate) fn decompose(x: f64) -> (i64, f64) {
    let (bits, shift) = if x < f64::MIN_POSITIVE {
        ((x * SUBNORMAL_LIFT).to_bits(), 64)
    } else {
        (x.to_bits(), 0)
    };
    let e = ((bits & EXP_MASK) >> 52) as i64 - EXP_BIAS - shift;
    let m = (bits & FRAC_MASK) as f64 * FRAC_SCALE;
    (e, m)
}

#[inline(always)]
pub(crate) fn mitchell_log2_raw(x: f64) -> f64 {
    let (e, m) = decompose(x);
    e as f64 + m
}

/// Mitchell's approximation `e + m` of `log2(x)`.
pub fn mitchell_log2(x: f64) -> Result<f64> {
    if !(x.is_finite() && x > 0.0) {
        return Err(domain("mitchell_log2", format!("{x} must be finite and > 0")));
    }
    Ok(mitchell_log2_raw(x))
}

/// Entropy term `-x ln2 log2~(x)` in nats; `0` at `x = 0`.
pub fn mitchell_entropy_term(x: f64) -> Result<f64> {
    check_probability("mitchell_entropy_term", x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(-x * LN_2 * mitchell_log2_raw(x))
}

/// Derivative of [`mitchell_entropy_term`] inside an octave:
/// `-ln2 (e + 2m + 1)`. Piecewise continuous, undefined at `x = 0`.
pub fn mitchell_entropy_term_grad(x: f64) -> Result<f64> {
    if x == 0.0 {
        return Err(crate::error::FeaError::Singularity {
            op: "mitchell_entropy_term_grad",
            x,
        });
    }
    check_probability("mitchell_entropy_term_grad", x)?;
    let (e, m) = decompose(x);
    Ok(-LN_2 * (e as f64 + 2.0 * m + 1.0))
}

/// KL term `0.5 (x - y)(log2~(x) - log2~(y)) ln2` in nats.
///
/// Zero arguments are rejected: the Mitchell logarithm has no limit there.
pub fn mitchell_kl_term(x: f64, y: f64) -> Result<f64> {
    check_probability("mitchell_kl_term", x)?;
    check_probability("mitchell_kl_term", y)?;
    if x == 0.0 || y == 0.0 {
        return Err(domain("mitchell_kl_term", format!("zero argument in ({x}, {y})")));
    }
    Ok(0.5 * (x - y) * (mitchell_log2_raw(x) - mitchell_log2_raw(y)) * LN_2)
}
