//! LASSO by cyclic coordinate descent on standardized columns, warm-started
//! along a descending `lambda` path with k-fold cross-validation.
//!
//! The per-`lambda` problem is
//! `min (1/(2T)) ||y - X b||^2 + lambda ||b||_1`
//! with centered `y` and columns of `X` centered and scaled to unit
//! (population) variance.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::benchmark::{support_of, RegressionDataset};
use super::spartan::log_space;
use super::{l1_param_error, Method, SelectionResult};
use crate::error::{domain, FeaError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaGrid {
    /// `n` log-spaced values from `lambda_max` down to `lambda_max * ratio`.
    Auto { n: usize, ratio: f64 },
    Explicit(Vec<f64>),
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid::Auto { n: 50, ratio: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoConfig {
    pub lambda_grid: LambdaGrid,
    pub cv_folds: usize,
    /// Stop a coordinate-descent run when no coefficient moves by more.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoConfig {
    fn default() -> Self {
        Self {
            lambda_grid: LambdaGrid::default(),
            cv_folds: 5,
            tol: 1e-12,
            max_sweeps: 100_000,
        }
    }
}

/// Centered and scaled copy of a design with the statistics to undo it.
#[derive(Debug, Clone)]
pub struct Standardized {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub x_mean: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub y_mean: f64,
}

impl Standardized {
    pub fn new(features: &DMatrix<f64>, responses: &DVector<f64>) -> Result<Self> {
        if features.iter().chain(responses.iter()).any(|v| !v.is_finite()) {
            return Err(FeaError::Numeric {
                op: "lasso_fit",
                detail: "data contains non-finite entries".into(),
            });
        }
        let t = features.nrows() as f64;
        let mut x = features.clone();
        let mut x_mean = Vec::with_capacity(x.ncols());
        let mut x_scale = Vec::with_capacity(x.ncols());
        for mut col in x.column_iter_mut() {
            let mean = col.sum() / t;
            col.add_scalar_mut(-mean);
            let sd = (col.norm_squared() / t).sqrt();
            // constant columns stay zero and never enter the model
            let scale = if sd > 0.0 { sd } else { 1.0 };
            col /= scale;
            x_mean.push(mean);
            x_scale.push(scale);
        }
        let y_mean = responses.sum() / t;
        let y = responses.add_scalar(-y_mean);
        Ok(Self {
            x,
            y,
            x_mean,
            x_scale,
            y_mean,
        })
    }

    /// Smallest `lambda` with an all-zero solution, `max_j |x_j'y| / T`.
    pub fn lambda_max(&self) -> f64 {
        let t = self.x.nrows() as f64;
        (self.x.transpose() * &self.y).amax() / t
    }

    /// Coefficients on the original feature scale.
    pub fn unscale(&self, beta: &DVector<f64>) -> Vec<f64> {
        beta.iter().zip(&self.x_scale).map(|(b, s)| b / s).collect()
    }

    /// Intercept matching [`unscale`](Self::unscale).
    pub fn intercept(&self, beta: &DVector<f64>) -> f64 {
        self.y_mean
            - self
                .unscale(beta)
                .iter()
                .zip(&self.x_mean)
                .map(|(b, m)| b * m)
                .sum::<f64>()
    }
}

#[inline]
fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

/// Cyclic coordinate descent at one `lambda`, updating `beta` in place from
/// its current value. Returns the number of sweeps.
///
/// Columns of `x` are assumed to satisfy `||x_j||^2 / T = 1` (or be zero).
pub fn coordinate_descent(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    beta: &mut DVector<f64>,
    tol: f64,
    max_sweeps: usize,
) -> usize {
    let t = x.nrows() as f64;
    let col_sq: Vec<f64> = x.column_iter().map(|c| c.norm_squared() / t).collect();
    let mut resid = y - x * &*beta;
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        sweeps += 1;
        let mut max_delta = 0.0f64;
        for j in 0..x.ncols() {
            if col_sq[j] == 0.0 {
                continue;
            }
            let col = x.column(j);
            let old = beta[j];
            let rho = col.dot(&resid) / t + col_sq[j] * old;
            let new = soft_threshold(rho, lambda) / col_sq[j];
            if new != old {
                resid.axpy(old - new, &col, 1.0);
                beta[j] = new;
                max_delta = max_delta.max((new - old).abs());
            }
        }
        if max_delta <= tol {
            break;
        }
    }
    sweeps
}

/// Largest violation of the LASSO subgradient conditions at `beta`.
pub fn kkt_violation(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>, lambda: f64) -> f64 {
    let t = x.nrows() as f64;
    let grad = x.transpose() * (y - x * beta) / t;
    grad.iter()
        .zip(beta.iter())
        .map(|(&g, &b)| {
            if b == 0.0 {
                (g.abs() - lambda).max(0.0)
            } else {
                (g - lambda * b.signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

fn resolve_grid(grid: &LambdaGrid, lambda_max: f64) -> Result<Vec<f64>> {
    match grid {
        LambdaGrid::Auto { n, ratio } => {
            if *n == 0 || !(*ratio > 0.0 && *ratio < 1.0) {
                return Err(domain("lasso_fit", "auto grid needs n >= 1 and ratio in (0, 1)"));
            }
            let top = if lambda_max > 0.0 { lambda_max } else { 1.0 };
            Ok(log_space(top, top * ratio, *n))
        }
        LambdaGrid::Explicit(v) => {
            if v.is_empty() {
                return Err(domain("lasso_fit", "lambda grid is empty"));
            }
            if v.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
                return Err(domain("lasso_fit", "lambda values must be positive"));
            }
            if v.windows(2).any(|w| w[1] > w[0]) {
                return Err(domain("lasso_fit", "lambda grid must be descending"));
            }
            Ok(v.clone())
        }
    }
}

/// Warm-started solutions along `lambdas`.
fn path(s: &Standardized, lambdas: &[f64], cfg: &LassoConfig) -> Vec<(DVector<f64>, usize)> {
    let mut beta = DVector::zeros(s.x.ncols());
    lambdas
        .iter()
        .map(|&l| {
            let sweeps = coordinate_descent(&s.x, &s.y, l, &mut beta, cfg.tol, cfg.max_sweeps);
            (beta.clone(), sweeps)
        })
        .collect()
}

fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

/// LASSO with `lambda` chosen by minimum k-fold cross-validated MSE.
///
/// Folds are contiguous blocks of rows. The reported coefficients are on the
/// original feature scale; the intercept absorbed by centering is dropped.
pub fn lasso_fit(data: &RegressionDataset, cfg: &LassoConfig) -> Result<SelectionResult> {
    let start = Instant::now();
    let t = data.n_samples();
    if cfg.cv_folds < 2 || cfg.cv_folds > t {
        return Err(domain("lasso_fit", format!("cv_folds = {} must be in [2, T]", cfg.cv_folds)));
    }
    let full = Standardized::new(&data.features, &data.responses)?;
    let lambdas = resolve_grid(&cfg.lambda_grid, full.lambda_max())?;

    let mut cv_mse = vec![0.0; lambdas.len()];
    for k in 0..cfg.cv_folds {
        let lo = k * t / cfg.cv_folds;
        let hi = (k + 1) * t / cfg.cv_folds;
        let train: Vec<usize> = (0..lo).chain(hi..t).collect();
        let test: Vec<usize> = (lo..hi).collect();
        let xtr = select_rows(&data.features, &train);
        let ytr = DVector::from_iterator(train.len(), train.iter().map(|&i| data.responses[i]));
        let s = Standardized::new(&xtr, &ytr)?;
        let xte = select_rows(&data.features, &test);
        for (mse, (beta, _)) in cv_mse.iter_mut().zip(path(&s, &lambdas, cfg)) {
            let coef = DVector::from_vec(s.unscale(&beta));
            let b0 = s.intercept(&beta);
            let err: f64 = test
                .iter()
                .enumerate()
                .map(|(r, &i)| {
                    let pred = b0 + xte.row(r).transpose().dot(&coef);
                    (data.responses[i] - pred).powi(2)
                })
                .sum();
            *mse += err / t as f64;
        }
    }
    let best = cv_mse
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("lambda grid is non-empty");

    let fitted = path(&full, &lambdas[..=best], cfg);
    let (beta, sweeps) = fitted.last().expect("path is non-empty");
    let x_star = full.unscale(beta);
    Ok(SelectionResult {
        method: Method::Lasso,
        support: support_of(&x_star),
        l1_error: l1_param_error(&x_star, &data.truth)?,
        x_star,
        runtime_seconds: start.elapsed().as_secs_f64(),
        iterations: *sweeps,
        converged: *sweeps < cfg.max_sweeps,
        hyperparameter: lambdas[best],
    })
}
