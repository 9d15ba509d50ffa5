//! Unchecked slice kernels.
//!
//! Inputs are assumed to lie in `[0, 1]` (and strictly inside `(0, 1]` for
//! the Mitchell KL loop). The variant is dispatched once per call so each
//! inner loop is monomorphic and free to vectorize.

use super::mitchell::mitchell_log2_raw;
use super::{fea_term_grad_raw, kl_fea_raw, ApproxCoefficients, KernelVariant};
use std::f64::consts::LN_2;

#[inline(always)]
fn exact_term(x: f64) -> f64 {
    if x > 0.0 {
        -x * x.ln()
    } else {
        0.0
    }
}

#[inline(always)]
fn mitchell_term(x: f64) -> f64 {
    if x > 0.0 {
        -x * LN_2 * mitchell_log2_raw(x)
    } else {
        0.0
    }
}

/// Writes per-element entropy terms of `xs` into `out`.
///
/// With `omit_constant` the FEA additive constant is dropped, which leaves
/// gradients and minimizers unchanged.
pub fn entropy_terms_into(
    variant: KernelVariant,
    xs: &[f64],
    out: &mut [f64],
    coeffs: &ApproxCoefficients,
    omit_constant: bool,
) {
    assert_eq!(xs.len(), out.len());
    let scale = coeffs.base_scale;
    match variant {
        KernelVariant::ExactLog => {
            for (o, &x) in out.iter_mut().zip(xs) {
                *o = exact_term(x) * scale;
            }
        }
        KernelVariant::Fea => {
            let (a, b, c) = (coeffs.se_a, coeffs.se_b, coeffs.se_c);
            let d = if omit_constant { 0.0 } else { coeffs.se_d };
            if omit_constant {
                for (o, &x) in out.iter_mut().zip(xs) {
                    *o = x * (a / (x + b) - c * x);
                }
            } else {
                for (o, &x) in out.iter_mut().zip(xs) {
                    *o = x * (a / (x + b) - c * x) + d;
                }
            }
        }
        KernelVariant::Mitchell => {
            for (o, &x) in out.iter_mut().zip(xs) {
                *o = mitchell_term(x) * scale;
            }
        }
    }
}

/// Sum of entropy terms, accumulated left to right.
pub fn entropy_sum(variant: KernelVariant, xs: &[f64], coeffs: &ApproxCoefficients, omit_constant: bool) -> f64 {
    let scale = coeffs.base_scale;
    match variant {
        KernelVariant::ExactLog => xs.iter().fold(0.0, |acc, &x| acc + exact_term(x) * scale),
        KernelVariant::Fea => {
            let (a, b, c) = (coeffs.se_a, coeffs.se_b, coeffs.se_c);
            let d = if omit_constant { 0.0 } else { coeffs.se_d };
            xs.iter().fold(0.0, |acc, &x| acc + (x * (a / (x + b) - c * x) + d))
        }
        KernelVariant::Mitchell => xs.iter().fold(0.0, |acc, &x| acc + mitchell_term(x) * scale),
    }
}

/// FEA entropy gradient of every element of `xs`, written into `out`.
pub fn fea_grad_into(xs: &[f64], out: &mut [f64], coeffs: &ApproxCoefficients) {
    assert_eq!(xs.len(), out.len());
    for (o, &x) in out.iter_mut().zip(xs) {
        *o = fea_term_grad_raw(x, coeffs);
    }
}

/// Writes per-element KL terms into `out`.
///
/// The exact loop produces `+inf` where exactly one argument is zero.
pub fn kl_terms_into(variant: KernelVariant, xs: &[f64], ys: &[f64], out: &mut [f64], coeffs: &ApproxCoefficients) {
    assert_eq!(xs.len(), ys.len());
    assert_eq!(xs.len(), out.len());
    let scale = coeffs.base_scale;
    match variant {
        KernelVariant::ExactLog => {
            for ((o, &x), &y) in out.iter_mut().zip(xs).zip(ys) {
                *o = if x == y { 0.0 } else { 0.5 * (x - y) * (x.ln() - y.ln()) * scale };
            }
        }
        KernelVariant::Fea => {
            for ((o, &x), &y) in out.iter_mut().zip(xs).zip(ys) {
                *o = kl_fea_raw(x, y, coeffs);
            }
        }
        KernelVariant::Mitchell => {
            let k = 0.5 * LN_2 * scale;
            for ((o, &x), &y) in out.iter_mut().zip(xs).zip(ys) {
                *o = k * (x - y) * (mitchell_log2_raw(x) - mitchell_log2_raw(y));
            }
        }
    }
}
