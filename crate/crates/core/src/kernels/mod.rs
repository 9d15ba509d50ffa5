//! Per-term and per-distribution kernels for Shannon entropy and symmetrized
//! KL divergence.
//!
//! Three families are provided and selected through [`KernelVariant`]:
//!
//! | Variant | Entropy term | KL term |
//! |---------|--------------|---------|
//! | `ExactLog` | `-x ln x` | `0.5 (x - y)(ln x - ln y)` |
//! | `Fea` | `x (a / (x + b) - c x) + d` | `p (x - y)^2 / ((x + q)(y + q) + p)` |
//! | `Mitchell` | `-x ln2 log2~(x)` | `0.5 (x - y)(log2~(x) - log2~(y)) ln2` |
//!
//! where `log2~` is the exponent-plus-mantissa logarithm in [`mitchell`].
//!
//! The rational kernels and their gradients are finite on the whole closed
//! interval `[0, 1]` (and square `[0, 1]^2`). The exact gradient diverges at
//! zero and is reported as [`FeaError::Singularity`] instead of an infinity.
//!
//! Scalar functions validate their arguments. The allocation-free loops in
//! [`fused`] skip validation and are what the timing harness measures.

pub mod fused;
pub mod mitchell;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, domain, FeaError, Result};

pub use mitchell::{mitchell_entropy_term, mitchell_entropy_term_grad, mitchell_kl_term, mitchell_log2};

/// Scalar operations in one FEA entropy term, counting the additive constant.
pub const FEA_SE_OPS: usize = 6;
/// Scalar operations in one FEA entropy term with the constant dropped.
pub const FEA_SE_OPS_OPTIMIZATION: usize = 5;
/// Scalar operations in one FEA KL term under a naive count: the difference,
/// its square, the numerator scale, two shifts, their product, the added
/// constant and the division.
pub const FEA_KL_OPS: usize = 8;

/// Ambient tolerance on `sum(v) == 1` for [`ProbVector`].
pub const PROB_SUM_TOL: f64 = 1e-9;

/// Constants of the rational entropy and KL approximations.
///
/// `se_*` parameterize `h(x) = x (se_a / (x + se_b) - se_c x) + se_d` and
/// `kl_*` parameterize `k(x, y) = kl_p (x - y)^2 / ((x + kl_q)(y + kl_q) + kl_p)`.
/// `base_scale` converts natural-log units into the target base: it is `1` for
/// nats and `1 / ln(base)` after [`rebase_coefficients`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxCoefficients {
    pub se_a: f64,
    pub se_b: f64,
    pub se_c: f64,
    pub se_d: f64,
    pub kl_p: f64,
    pub kl_q: f64,
    pub base_scale: f64,
}

impl Default for ApproxCoefficients {
    fn default() -> Self {
        Self {
            se_a: 0.6648,
            se_b: 0.2086,
            se_c: 0.5754,
            se_d: 0.0206,
            kl_p: 0.3011,
            kl_q: 0.1636,
            base_scale: 1.0,
        }
    }
}

impl ApproxCoefficients {
    /// Checks that every coefficient is finite and strictly positive.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("se_a", self.se_a),
            ("se_b", self.se_b),
            ("se_c", self.se_c),
            ("se_d", self.se_d),
            ("kl_p", self.kl_p),
            ("kl_q", self.kl_q),
            ("base_scale", self.base_scale),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(domain(
                    "ApproxCoefficients",
                    format!("{name} = {v} must be finite and > 0"),
                ));
            }
        }
        Ok(())
    }

    /// The KL numerator coefficient in the target base.
    ///
    /// `kl_p` also sits in the denominator, so rebasing scales the numerator
    /// only; this is loop-invariant and hoisted out of vector loops.
    #[inline]
    pub fn kl_numerator(&self) -> f64 {
        self.kl_p * self.base_scale
    }
}

/// Re-expresses the approximations in logarithm base `base`.
///
/// The entropy coefficients `se_a`, `se_c`, `se_d` absorb the factor
/// `1 / ln(base)` so the rebased FEA term costs the same number of
/// operations. The shifts `se_b`, `kl_q` and the KL denominator constant are
/// unchanged; the KL numerator picks up the factor through `base_scale`.
pub fn rebase_coefficients(base: f64, coeffs: &ApproxCoefficients) -> Result<ApproxCoefficients> {
    if !(base.is_finite() && base > 1.0) {
        return Err(domain("rebase_coefficients", format!("base {base} must be > 1")));
    }
    let ln_base = base.ln();
    Ok(ApproxCoefficients {
        se_a: coeffs.se_a / ln_base,
        se_b: coeffs.se_b,
        se_c: coeffs.se_c / ln_base,
        se_d: coeffs.se_d / ln_base,
        kl_p: coeffs.kl_p,
        kl_q: coeffs.kl_q,
        base_scale: coeffs.base_scale / ln_base,
    })
}

/// Which family of kernels to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelVariant {
    #[serde(rename = "exact", alias = "exact-log")]
    ExactLog,
    Fea,
    Mitchell,
}

impl KernelVariant {
    pub const ALL: [KernelVariant; 3] = [KernelVariant::ExactLog, KernelVariant::Fea, KernelVariant::Mitchell];

    pub fn as_str(self) -> &'static str {
        match self {
            KernelVariant::ExactLog => "exact",
            KernelVariant::Fea => "fea",
            KernelVariant::Mitchell => "mitchell",
        }
    }
}

impl fmt::Display for KernelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelVariant {
    type Err = FeaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" | "exact-log" | "exactlog" => Ok(KernelVariant::ExactLog),
            "fea" => Ok(KernelVariant::Fea),
            "mitchell" => Ok(KernelVariant::Mitchell),
            other => Err(domain("KernelVariant", format!("unknown variant {other:?}"))),
        }
    }
}

/// A finite discrete probability distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(domain("ProbVector", "empty distribution"));
        }
        for &v in &values {
            check_probability("ProbVector", v)?;
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(domain("ProbVector", format!("entries sum to {sum}, not 1")));
        }
        Ok(Self(values))
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(domain("ProbVector", "empty distribution"));
        }
        Ok(Self(vec![1.0 / n as f64; n]))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for ProbVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// A KL value that may be the `+inf` limit of the exact divergence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KlValue {
    Finite(f64),
    Infinite,
}

impl KlValue {
    pub fn is_infinite(self) -> bool {
        matches!(self, KlValue::Infinite)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            KlValue::Finite(v) => Some(v),
            KlValue::Infinite => None,
        }
    }

    /// The value as an `f64`, with `Infinite` mapped to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        match self {
            KlValue::Finite(v) => v,
            KlValue::Infinite => f64::INFINITY,
        }
    }

    fn add(self, other: KlValue) -> KlValue {
        match (self, other) {
            (KlValue::Finite(a), KlValue::Finite(b)) => KlValue::Finite(a + b),
            _ => KlValue::Infinite,
        }
    }
}

// ---------------------------------------------------------------------------
// Entropy terms

/// `-x ln x` in nats, with the continuous limit `0` at `x = 0`.
pub fn shannon_term_exact(x: f64) -> Result<f64> {
    check_probability("shannon_term_exact", x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(-x * x.ln())
}

/// `-(ln x + 1)`; refuses `x = 0` where the derivative diverges.
pub fn shannon_term_exact_grad(x: f64) -> Result<f64> {
    if x == 0.0 {
        return Err(FeaError::Singularity {
            op: "shannon_term_exact_grad",
            x,
        });
    }
    check_probability("shannon_term_exact_grad", x)?;
    Ok(-(x.ln() + 1.0))
}

#[inline(always)]
pub(crate) fn fea_term_raw(x: f64, c: &ApproxCoefficients) -> f64 {
    x * (c.se_a / (x + c.se_b) - c.se_c * x) + c.se_d
}

#[inline(always)]
pub(crate) fn fea_term_grad_raw(x: f64, c: &ApproxCoefficients) -> f64 {
    let s = x + c.se_b;
    c.se_a * c.se_b / (s * s) - 2.0 * c.se_c * x
}

/// Second derivative of the FEA entropy term, `-2ab / (x + b)^3 - 2c`.
#[inline]
pub fn fea_term_second_derivative(x: f64, c: &ApproxCoefficients) -> f64 {
    let s = x + c.se_b;
    -2.0 * c.se_a * c.se_b / (s * s * s) - 2.0 * c.se_c
}

/// FEA entropy term `x (a / (x + b) - c x) + d`.
pub fn fea_term(x: f64, coeffs: &ApproxCoefficients) -> Result<f64> {
    check_probability("fea_term", x)?;
    Ok(fea_term_raw(x, coeffs))
}

/// Derivative of [`fea_term`], `a b / (x + b)^2 - 2 c x`. Bounded on `[0, 1]`.
pub fn fea_term_grad(x: f64, coeffs: &ApproxCoefficients) -> Result<f64> {
    check_probability("fea_term_grad", x)?;
    Ok(fea_term_grad_raw(x, coeffs))
}

/// Entropy term of the selected variant in the base carried by `coeffs`.
pub fn entropy_term(variant: KernelVariant, x: f64, coeffs: &ApproxCoefficients) -> Result<f64> {
    match variant {
        KernelVariant::ExactLog => Ok(shannon_term_exact(x)? * coeffs.base_scale),
        KernelVariant::Fea => fea_term(x, coeffs),
        KernelVariant::Mitchell => Ok(mitchell_entropy_term(x)? * coeffs.base_scale),
    }
}

/// Derivative of [`entropy_term`].
pub fn entropy_term_grad(variant: KernelVariant, x: f64, coeffs: &ApproxCoefficients) -> Result<f64> {
    match variant {
        KernelVariant::ExactLog => Ok(shannon_term_exact_grad(x)? * coeffs.base_scale),
        KernelVariant::Fea => fea_term_grad(x, coeffs),
        KernelVariant::Mitchell => Ok(mitchell_entropy_term_grad(x)? * coeffs.base_scale),
    }
}

/// Sum of per-term entropies, folded left to right.
pub fn entropy(v: &ProbVector, variant: KernelVariant, coeffs: &ApproxCoefficients) -> Result<f64> {
    v.as_slice()
        .iter()
        .try_fold(0.0, |acc, &x| Ok(acc + entropy_term(variant, x, coeffs)?))
}

/// Componentwise entropy gradient.
pub fn entropy_grad(v: &ProbVector, variant: KernelVariant, coeffs: &ApproxCoefficients) -> Result<Vec<f64>> {
    v.as_slice()
        .iter()
        .map(|&x| entropy_term_grad(variant, x, coeffs))
        .collect()
}

// ---------------------------------------------------------------------------
// KL terms

fn check_pair(op: &'static str, x: f64, y: f64) -> Result<()> {
    check_probability(op, x)?;
    check_probability(op, y)
}

/// Exact symmetrized KL term `0.5 (x - y)(ln x - ln y)` in nats.
///
/// Equal arguments (including both zero) give `0`. Exactly one zero argument
/// gives [`KlValue::Infinite`].
pub fn kl_term_exact(x: f64, y: f64) -> Result<KlValue> {
    check_pair("kl_term_exact", x, y)?;
    if x == y {
        return Ok(KlValue::Finite(0.0));
    }
    if x == 0.0 || y == 0.0 {
        return Ok(KlValue::Infinite);
    }
    Ok(KlValue::Finite(0.5 * (x - y) * (x.ln() - y.ln())))
}

#[inline(always)]
pub(crate) fn kl_fea_raw(x: f64, y: f64, c: &ApproxCoefficients) -> f64 {
    let d = x - y;
    c.kl_numerator() * (d * d) / ((x + c.kl_q) * (y + c.kl_q) + c.kl_p)
}

#[inline(always)]
fn kl_fea_dx_raw(x: f64, y: f64, c: &ApproxCoefficients) -> f64 {
    let d = x - y;
    let yq = y + c.kl_q;
    let den = (x + c.kl_q) * yq + c.kl_p;
    c.kl_numerator() * d * (2.0 * den - d * yq) / (den * den)
}

/// FEA symmetrized KL term `p (x - y)^2 / ((x + q)(y + q) + p)`.
///
/// Evaluated with a symmetric expression ordering, so swapping the
/// arguments gives a bit-identical result.
pub fn kl_term_fea(x: f64, y: f64, coeffs: &ApproxCoefficients) -> Result<f64> {
    check_pair("kl_term_fea", x, y)?;
    Ok(kl_fea_raw(x, y, coeffs))
}

/// Partial derivatives `(d/dx, d/dy)` of [`kl_term_fea`].
///
/// `d/dy` at `(x, y)` is computed as `d/dx` at `(y, x)`.
pub fn kl_term_fea_grad(x: f64, y: f64, coeffs: &ApproxCoefficients) -> Result<(f64, f64)> {
    check_pair("kl_term_fea_grad", x, y)?;
    Ok((kl_fea_dx_raw(x, y, coeffs), kl_fea_dx_raw(y, x, coeffs)))
}

/// KL term of the selected variant in the base carried by `coeffs`.
pub fn kl_term(variant: KernelVariant, x: f64, y: f64, coeffs: &ApproxCoefficients) -> Result<KlValue> {
    match variant {
        KernelVariant::ExactLog => Ok(match kl_term_exact(x, y)? {
            KlValue::Finite(v) => KlValue::Finite(v * coeffs.base_scale),
            KlValue::Infinite => KlValue::Infinite,
        }),
        KernelVariant::Fea => Ok(KlValue::Finite(kl_term_fea(x, y, coeffs)?)),
        KernelVariant::Mitchell => Ok(KlValue::Finite(mitchell_kl_term(x, y)? * coeffs.base_scale)),
    }
}

/// Componentwise sum of KL terms between two distributions.
pub fn kl_divergence(
    vx: &ProbVector,
    vy: &ProbVector,
    variant: KernelVariant,
    coeffs: &ApproxCoefficients,
) -> Result<KlValue> {
    if vx.len() != vy.len() {
        return Err(FeaError::Shape {
            op: "kl_divergence",
            expected: vx.len(),
            got: vy.len(),
        });
    }
    vx.as_slice()
        .iter()
        .zip(vy.as_slice())
        .try_fold(KlValue::Finite(0.0), |acc, (&x, &y)| {
            Ok(acc.add(kl_term(variant, x, y, coeffs)?))
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c() -> ApproxCoefficients {
        ApproxCoefficients::default()
    }

    #[test]
    fn default_coefficients_are_valid() {
        c().validate().unwrap();
        let mut bad = c();
        bad.kl_q = 0.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn exact_term_examples() {
        assert_eq!(shannon_term_exact(0.0).unwrap(), 0.0);
        assert_eq!(shannon_term_exact(1.0).unwrap(), 0.0);
        assert_relative_eq!(shannon_term_exact(0.5).unwrap(), 0.346_573_590_279_972_6, epsilon = 1e-15);
        assert!(matches!(shannon_term_exact(1.5), Err(FeaError::Domain { .. })));
        assert!(shannon_term_exact(-0.1).is_err());
        assert!(shannon_term_exact(f64::NAN).is_err());
    }

    #[test]
    fn exact_grad_examples() {
        assert_eq!(shannon_term_exact_grad(1.0).unwrap(), -1.0);
        assert!(shannon_term_exact_grad(std::f64::consts::E.recip()).unwrap().abs() < 1e-15);
        assert!(matches!(shannon_term_exact_grad(0.0), Err(FeaError::Singularity { .. })));
        assert!(matches!(shannon_term_exact_grad(1.2), Err(FeaError::Domain { .. })));
    }

    #[test]
    fn fea_term_examples() {
        assert_eq!(fea_term(0.0, &c()).unwrap(), 0.0206);
        assert_relative_eq!(fea_term(1.0, &c()).unwrap(), -0.004_742_081_747_476_5, epsilon = 1e-12);
        assert_relative_eq!(fea_term(0.5, &c()).unwrap(), 0.345_844_0, epsilon = 5e-8);
        assert!(fea_term(1.0 + 1e-12, &c()).is_err());
    }

    #[test]
    fn fea_grad_examples() {
        assert_relative_eq!(fea_term_grad(0.0, &c()).unwrap(), 0.6648 / 0.2086, epsilon = 1e-14);
        assert_relative_eq!(fea_term_grad(1.0, &c()).unwrap(), -1.055_861_987_632_4, epsilon = 1e-12);
        let h = 1e-6;
        let fd = (fea_term(0.3 + h, &c()).unwrap() - fea_term(0.3 - h, &c()).unwrap()) / (2.0 * h);
        let an = fea_term_grad(0.3, &c()).unwrap();
        assert!(((fd - an) / an).abs() < 1e-6);
    }

    #[test]
    fn entropy_examples() {
        let u4 = ProbVector::uniform(4).unwrap();
        assert_relative_eq!(entropy(&u4, KernelVariant::ExactLog, &c()).unwrap(), 4f64.ln(), epsilon = 1e-15);
        let det = ProbVector::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(entropy(&det, KernelVariant::ExactLog, &c()).unwrap(), 0.0);
        assert_relative_eq!(entropy(&det, KernelVariant::Fea, &c()).unwrap(), 0.036_457_918_252_523_5, epsilon = 1e-12);
    }

    #[test]
    fn entropy_grad_examples() {
        let u2 = ProbVector::uniform(2).unwrap();
        let g = entropy_grad(&u2, KernelVariant::Fea, &c()).unwrap();
        assert_eq!(g[0], g[1]);
        let g = entropy_grad(&u2, KernelVariant::ExactLog, &c()).unwrap();
        assert_relative_eq!(g[0], -(0.5f64.ln() + 1.0), epsilon = 1e-15);
        assert_relative_eq!(g[1], -0.306_852_819_440_054_7, epsilon = 1e-12);

        let edge = ProbVector::new(vec![0.0, 1.0]).unwrap();
        let g = entropy_grad(&edge, KernelVariant::Fea, &c()).unwrap();
        assert_relative_eq!(g[0], 3.186_960_690_316_394_7, epsilon = 1e-12);
        assert_relative_eq!(g[1], -1.055_861_987_632_4, epsilon = 1e-12);
        assert!(matches!(
            entropy_grad(&edge, KernelVariant::ExactLog, &c()),
            Err(FeaError::Singularity { .. })
        ));
    }

    #[test]
    fn prob_vector_validation() {
        assert!(ProbVector::new(vec![]).is_err());
        assert!(ProbVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbVector::new(vec![1.5, -0.5]).is_err());
        assert!(ProbVector::new(vec![0.5, 0.5 + 5e-10]).is_ok());
        assert!(ProbVector::uniform(0).is_err());
    }

    #[test]
    fn exact_kl_examples() {
        assert_eq!(kl_term_exact(0.3, 0.3).unwrap(), KlValue::Finite(0.0));
        assert_eq!(kl_term_exact(0.0, 0.0).unwrap(), KlValue::Finite(0.0));
        assert_relative_eq!(kl_term_exact(0.2, 0.8).unwrap().to_f64(), 0.3 * 4f64.ln(), epsilon = 1e-15);
        assert_eq!(kl_term_exact(0.5, 0.0).unwrap(), KlValue::Infinite);
        assert_eq!(kl_term_exact(0.0, 0.5).unwrap(), KlValue::Infinite);
        assert!(kl_term_exact(0.5, 1.5).is_err());
    }

    #[test]
    fn fea_kl_examples() {
        for x in [0.0, 0.25, 0.7, 1.0] {
            assert_eq!(kl_term_fea(x, x, &c()).unwrap(), 0.0);
            assert_eq!(kl_term_fea_grad(x, x, &c()).unwrap(), (0.0, 0.0));
        }
        assert_relative_eq!(kl_term_fea(0.2, 0.8, &c()).unwrap(), 0.166_388_074_041_618_5, epsilon = 1e-12);
        assert_relative_eq!(kl_term_fea(1.0, 0.0, &c()).unwrap(), 0.3011 / (1.1636 * 0.1636 + 0.3011), epsilon = 1e-15);
        let (gx, gy) = kl_term_fea_grad(1.0, 0.0, &c()).unwrap();
        assert!(gx.is_finite() && gy.is_finite());
        assert!(kl_term_fea(-0.1, 0.5, &c()).is_err());
    }

    #[test]
    fn kl_divergence_examples() {
        let a = ProbVector::new(vec![0.2, 0.8]).unwrap();
        let b = ProbVector::new(vec![0.8, 0.2]).unwrap();
        for v in KernelVariant::ALL {
            assert_eq!(kl_divergence(&a, &a, v, &c()).unwrap(), KlValue::Finite(0.0));
        }
        assert_relative_eq!(
            kl_divergence(&a, &b, KernelVariant::ExactLog, &c()).unwrap().to_f64(),
            0.6 * 4f64.ln(),
            epsilon = 1e-14
        );
        assert_relative_eq!(
            kl_divergence(&a, &b, KernelVariant::Fea, &c()).unwrap().to_f64(),
            2.0 * 0.166_388_074_041_618_5,
            epsilon = 1e-12
        );
        let three = ProbVector::uniform(3).unwrap();
        assert!(matches!(
            kl_divergence(&a, &three, KernelVariant::Fea, &c()),
            Err(FeaError::Shape { .. })
        ));
        let z = ProbVector::new(vec![0.0, 1.0]).unwrap();
        assert!(kl_divergence(&a, &z, KernelVariant::ExactLog, &c()).unwrap().is_infinite());
    }

    #[test]
    fn rebase_examples() {
        let e = rebase_coefficients(std::f64::consts::E, &c()).unwrap();
        assert_relative_eq!(e.se_a, c().se_a, epsilon = 1e-15);
        assert_relative_eq!(e.base_scale, 1.0, epsilon = 1e-15);
        let two = rebase_coefficients(2.0, &c()).unwrap();
        assert_relative_eq!(two.se_a, 0.959_103, epsilon = 1e-6);
        assert_eq!(two.se_b, c().se_b);
        assert_eq!(two.kl_q, c().kl_q);
        assert_relative_eq!(fea_term(0.5, &two).unwrap(), 0.498_948, epsilon = 1e-6);
        assert_relative_eq!(
            kl_term_fea(0.2, 0.8, &two).unwrap(),
            kl_term_fea(0.2, 0.8, &c()).unwrap() / 2f64.ln(),
            max_relative = 1e-14
        );
        assert!(rebase_coefficients(1.0, &c()).is_err());
        assert!(rebase_coefficients(0.5, &c()).is_err());
    }

    #[test]
    fn variant_parsing() {
        for v in KernelVariant::ALL {
            assert_eq!(v.as_str().parse::<KernelVariant>().unwrap(), v);
        }
        assert!("log".parse::<KernelVariant>().is_err());
    }
}
