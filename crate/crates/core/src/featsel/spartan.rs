//! Entropic sparse regression with simplex-constrained feature weights.
//!
//! The model is `y ~ sum_i beta_i w_i F_i` with `w` on the probability
//! simplex. For a regularization weight `eps` the loss is
//!
//! ```text
//! L(beta, w) = (1/T) ||y - F diag(w) beta||^2 + delta ||beta||^2 + eps sum_i h(w_i)
//! ```
//!
//! where `h` is the selected entropy kernel. The ridge term is what ties the
//! scale of `beta` to `w`: without it only the product `w_i beta_i` is
//! identified and uniform weights are a stationary point. Minimizing over `w`
//! for fixed `u = w * beta` turns the ridge into a sparsity-promoting
//! `(sum |u_i|^(2/3))^3` penalty, and the entropy term then pushes small
//! weights to exactly zero. The fit alternates a closed-form ridge solve in
//! `beta` with an SPG solve in `w`.
//!
//! At `w_i = 0` the exact entropy gradient is singular; the rational
//! approximation keeps it bounded, which is what makes SPG usable here.
//! This is a minimal concretization of the published SPARTAn method, not a
//! reimplementation of it.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::benchmark::{support_of, RegressionDataset};
use super::{l1_param_error, Method, SelectionResult};
use crate::error::{domain, FeaError, Result};
use crate::kernels::{entropy_term, entropy_term_grad, ApproxCoefficients, KernelVariant};
use crate::spg::{spg_minimize, Simplex, SpgConfig};

/// Candidate entropy weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpsGrid {
    /// Multiplied by the sample variance of the training responses.
    RelativeToVariance(Vec<f64>),
    Absolute(Vec<f64>),
}

impl Default for EpsGrid {
    fn default() -> Self {
        EpsGrid::RelativeToVariance(log_space(1e-4, 1.0, 8))
    }
}

impl EpsGrid {
    fn resolve(&self, var_y: f64) -> Vec<f64> {
        match self {
            EpsGrid::RelativeToVariance(v) => v.iter().map(|e| e * var_y).collect(),
            EpsGrid::Absolute(v) => v.clone(),
        }
    }

    fn values(&self) -> &[f64] {
        match self {
            EpsGrid::RelativeToVariance(v) | EpsGrid::Absolute(v) => v,
        }
    }
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpartanConfig {
    pub eps_grid: EpsGrid,
    /// Weights below this are declared inactive.
    pub tau_sparse: f64,
    /// Ridge weight on `beta`; dimensionless, since `beta` scales with `y`.
    pub delta_ridge: f64,
    /// Relative outer objective decrease that stops the alternation.
    pub tol_outer: f64,
    pub max_outer: usize,
    pub spg: SpgConfig,
    /// Trailing share of samples held out to select `eps`.
    pub validation_fraction: f64,
    pub coeffs: ApproxCoefficients,
}

impl Default for SpartanConfig {
    fn default() -> Self {
        Self {
            eps_grid: EpsGrid::default(),
            tau_sparse: 1e-3,
            delta_ridge: 1e-3,
            tol_outer: 1e-8,
            max_outer: 2000,
            spg: SpgConfig::default(),
            validation_fraction: 0.25,
            coeffs: ApproxCoefficients::default(),
        }
    }
}

impl SpartanConfig {
    pub fn validate(&self) -> Result<()> {
        let grid = self.eps_grid.values();
        if grid.is_empty() || grid.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(domain("SpartanConfig", "eps grid must be non-empty and non-negative"));
        }
        if !(self.tau_sparse > 0.0 && self.delta_ridge > 0.0 && self.tol_outer > 0.0) {
            return Err(domain("SpartanConfig", "tau_sparse, delta_ridge and tol_outer must be > 0"));
        }
        if self.max_outer == 0 {
            return Err(domain("SpartanConfig", "max_outer must be >= 1"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction <= 0.5) {
            return Err(domain("SpartanConfig", "validation_fraction must be in (0, 0.5]"));
        }
        self.spg.validate()?;
        self.coeffs.validate()
    }
}

/// Sufficient statistics of a least-squares problem.
#[derive(Debug, Clone)]
pub(crate) struct Moments {
    /// `F'F / T`
    gram: DMatrix<f64>,
    /// `F'y / T`
    fty: DVector<f64>,
    /// `y'y / T`
    yy: f64,
}

impl Moments {
    pub(crate) fn new(data: &RegressionDataset) -> Self {
        let t = data.n_samples() as f64;
        let f = &data.features;
        let y = &data.responses;
        Self {
            gram: f.transpose() * f / t,
            fty: f.transpose() * y / t,
            yy: y.dot(y) / t,
        }
    }

    fn n(&self) -> usize {
        self.fty.len()
    }

    /// `(1/T) ||y - F u||^2`
    fn residual(&self, u: &DVector<f64>) -> f64 {
        u.dot(&(&self.gram * u)) - 2.0 * u.dot(&self.fty) + self.yy
    }
}

/// Minimizes `(1/T) ||y - F diag(w) beta||^2 + delta ||beta||^2` over `beta`.
pub(crate) fn beta_step(m: &Moments, w: &[f64], delta: f64) -> Result<Vec<f64>> {
    let n = m.n();
    let mut a = DMatrix::from_fn(n, n, |i, j| w[i] * m.gram[(i, j)] * w[j]);
    for i in 0..n {
        a[(i, i)] += delta;
    }
    let rhs = DVector::from_fn(n, |i, _| w[i] * m.fty[i]);
    let chol = a.cholesky().ok_or_else(|| FeaError::Numeric {
        op: "beta_step",
        detail: "reweighted normal equations are not positive definite".into(),
    })?;
    Ok(chol.solve(&rhs).iter().copied().collect())
}

fn entropy_penalty(w: &[f64], variant: KernelVariant, c: &ApproxCoefficients) -> Result<f64> {
    w.iter().try_fold(0.0, |acc, &x| Ok(acc + entropy_term(variant, x, c)?))
}

fn loss(m: &Moments, beta: &[f64], w: &[f64], eps: f64, delta: f64, variant: KernelVariant, c: &ApproxCoefficients) -> Result<f64> {
    let u = DVector::from_fn(m.n(), |i, _| beta[i] * w[i]);
    let ridge: f64 = beta.iter().map(|b| b * b).sum();
    Ok(m.residual(&u) + delta * ridge + eps * entropy_penalty(w, variant, c)?)
}

/// Outcome of the alternating minimization at one `eps`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlternatingFit {
    pub beta: Vec<f64>,
    pub weights: Vec<f64>,
    /// Loss after the initial `beta` solve and after every outer iteration.
    pub objective_history: Vec<f64>,
    pub outer_iterations: usize,
    pub converged: bool,
    pub spg_iterations: usize,
}

impl AlternatingFit {
    /// `beta_i w_i`, zeroed where `w_i < tau`.
    pub fn effective_coefficients(&self, tau: f64) -> Vec<f64> {
        self.beta
            .iter()
            .zip(&self.weights)
            .map(|(&b, &w)| if w < tau { 0.0 } else { b * w })
            .collect()
    }
}

/// Alternating `beta` / `w` minimization of the entropic loss at fixed `eps`,
/// starting from uniform weights.
pub fn fit_alternating(
    data: &RegressionDataset,
    eps: f64,
    cfg: &SpartanConfig,
    variant: KernelVariant,
) -> Result<AlternatingFit> {
    let m = Moments::new(data);
    fit_alternating_moments(&m, eps, cfg, variant)
}

pub(crate) fn fit_alternating_moments(
    m: &Moments,
    eps: f64,
    cfg: &SpartanConfig,
    variant: KernelVariant,
) -> Result<AlternatingFit> {
    let n = m.n();
    let c = &cfg.coeffs;
    let delta = cfg.delta_ridge;
    let mut w = vec![1.0 / n as f64; n];
    let mut beta = beta_step(m, &w, delta)?;
    let mut current = loss(m, &beta, &w, eps, delta, variant, c)?;
    let mut history = vec![current];
    let mut converged = false;
    let mut outer = 0;
    let mut spg_iterations = 0;

    while outer < cfg.max_outer {
        outer += 1;

        // w-step: quadratic fit term in w plus the entropy penalty
        let q = DMatrix::from_fn(n, n, |i, j| beta[i] * m.gram[(i, j)] * beta[j]);
        let b = DVector::from_fn(n, |i, _| beta[i] * m.fty[i]);
        let constant = m.yy + delta * beta.iter().map(|v| v * v).sum::<f64>();
        let objective = |x: &[f64], g: &mut [f64]| -> Result<f64> {
            let xv = DVector::from_column_slice(x);
            let qx = &q * &xv;
            let mut f = xv.dot(&qx) - 2.0 * xv.dot(&b) + constant;
            for i in 0..n {
                f += eps * entropy_term(variant, x[i], c)?;
                g[i] = 2.0 * qx[i] - 2.0 * b[i] + eps * entropy_term_grad(variant, x[i], c)?;
            }
            Ok(f)
        };
        let w_obj_now = current;
        match spg_minimize(objective, &Simplex, &w, &cfg.spg) {
            Ok(r) => {
                spg_iterations += r.iterations;
                if r.objective_value <= w_obj_now {
                    w = r.minimizer;
                }
            }
            Err(FeaError::Stagnation { best, best_value, iterations }) => {
                spg_iterations += iterations;
                if best_value <= w_obj_now {
                    w = best;
                }
            }
            Err(e) => return Err(e),
        }

        beta = beta_step(m, &w, delta)?;
        let next = loss(m, &beta, &w, eps, delta, variant, c)?;
        history.push(next);
        let decrease = current - next;
        current = next;
        if decrease.abs() <= cfg.tol_outer * next.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }

    Ok(AlternatingFit {
        beta,
        weights: w,
        objective_history: history,
        outer_iterations: outer,
        converged,
        spg_iterations,
    })
}

fn sample_variance(y: &DVector<f64>) -> f64 {
    let n = y.len() as f64;
    let mean = y.sum() / n;
    y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Entropic feature selection with `eps` chosen on a trailing holdout.
///
/// `variant` picks the entropy kernel. With [`KernelVariant::ExactLog`] the
/// fit fails with [`FeaError::Singularity`] as soon as SPG drives any weight
/// to exactly zero.
pub fn spartan_fea_fit(data: &RegressionDataset, cfg: &SpartanConfig, variant: KernelVariant) -> Result<SelectionResult> {
    cfg.validate()?;
    if variant == KernelVariant::Mitchell {
        return Err(domain("spartan_fea_fit", "variant must be fea or exact"));
    }
    let start = Instant::now();
    let t = data.n_samples();
    let n_val = ((t as f64) * cfg.validation_fraction).round().max(1.0) as usize;
    let n_train = t - n_val;
    if n_train < 2 {
        return Err(domain("spartan_fea_fit", "too few samples for a holdout split"));
    }

    let train = data.rows(0..n_train);
    let valid = data.rows(n_train..t);
    let train_m = Moments::new(&train);
    let valid_m = Moments::new(&valid);
    let grid = cfg.eps_grid.resolve(sample_variance(&train.responses));

    let mut best: Option<(f64, f64)> = None;
    for &eps in &grid {
        let fit = fit_alternating_moments(&train_m, eps, cfg, variant)?;
        let u = DVector::from_vec(fit.effective_coefficients(cfg.tau_sparse));
        let mse = valid_m.residual(&u);
        log::debug!("spartan eps={eps:.6e} validation_mse={mse:.6e} outer={}", fit.outer_iterations);
        if best.is_none_or(|(_, b)| mse < b) {
            best = Some((eps, mse));
        }
    }
    let (eps, _) = best.expect("eps grid is non-empty");

    let fit = fit_alternating(data, eps, cfg, variant)?;
    let x_star = fit.effective_coefficients(cfg.tau_sparse);
    let method = match variant {
        KernelVariant::ExactLog => Method::SpartanExact,
        _ => Method::SpartanFea,
    };
    Ok(SelectionResult {
        method,
        support: support_of(&x_star),
        l1_error: l1_param_error(&x_star, &data.truth)?,
        x_star,
        runtime_seconds: start.elapsed().as_secs_f64(),
        iterations: fit.outer_iterations,
        converged: fit.converged,
        hyperparameter: eps,
    })
}
