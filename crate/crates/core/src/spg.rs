//! Spectral projected gradient (SPG2) over the probability simplex or a box.
//!
//! Each iteration projects one trial point `x - lambda g` onto the feasible
//! set and backtracks along the resulting feasible direction `d` until the
//! nonmonotone Armijo condition
//!
//! ```text
//! f(x + a d) <= max(f_{k-M+1}, ..., f_k) + gamma a g'd
//! ```
//!
//! holds. The spectral step `lambda = s's / s'y` is safeguarded to
//! `[alpha_min, alpha_max]`, and set to `alpha_max` when `s'y <= 0`.
//!
//! Reference: Birgin, Martinez, Raydan, "Nonmonotone spectral projected
//! gradient methods on convex sets", SIAM J. Optim. 10 (2000).

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{domain, FeaError, Result};
use crate::kernels::ProbVector;

const MAX_BACKTRACKS: usize = 50;
const SIGMA_LO: f64 = 0.1;
const SIGMA_HI: f64 = 0.9;

/// A closed convex set with a Euclidean projection.
pub trait Projection {
    /// Replaces `v` by its projection.
    fn project(&self, v: &mut [f64]) -> Result<()>;

    /// Removes rounding drift from a convex combination of feasible points.
    fn repair(&self, _v: &mut [f64]) {}
}

/// The probability simplex `{w : w >= 0, sum(w) = 1}`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Simplex;

impl Projection for Simplex {
    fn project(&self, v: &mut [f64]) -> Result<()> {
        project_simplex_in_place(v)
    }

    fn repair(&self, v: &mut [f64]) {
        for x in v.iter_mut() {
            *x = x.clamp(0.0, 1.0);
        }
    }
}

/// The box `{x : lo <= x <= hi}`.
#[derive(Debug, Clone)]
pub struct BoxSet {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxSet {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(FeaError::Shape {
                op: "BoxSet",
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l <= h)) {
            return Err(domain("BoxSet", "lower bound exceeds upper bound"));
        }
        Ok(Self { lo, hi })
    }
}

impl Projection for BoxSet {
    fn project(&self, v: &mut [f64]) -> Result<()> {
        if v.len() != self.lo.len() {
            return Err(FeaError::Shape {
                op: "project_box",
                expected: self.lo.len(),
                got: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(domain("project_box", "non-finite input"));
        }
        for ((x, &l), &h) in v.iter_mut().zip(&self.lo).zip(&self.hi) {
            *x = x.clamp(l, h);
        }
        Ok(())
    }

    fn repair(&self, v: &mut [f64]) {
        for ((x, &l), &h) in v.iter_mut().zip(&self.lo).zip(&self.hi) {
            *x = x.clamp(l, h);
        }
    }
}

fn project_simplex_in_place(v: &mut [f64]) -> Result<()> {
    if v.is_empty() {
        return Err(domain("project_simplex", "empty vector"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(domain("project_simplex", "non-finite input"));
    }
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    let top = v
        .iter()
        .enumerate()
        .fold(0, |m, (i, &x)| if x > v[m] { i } else { m });
    for x in v.iter_mut() {
        *x = (*x - theta).clamp(0.0, 1.0);
    }
    // With huge entries the threshold loses the unit budget to cancellation;
    // the support is still right, so rescale onto the simplex.
    let total: f64 = v.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        if total > 0.0 {
            v.iter_mut().for_each(|x| *x /= total);
        } else {
            v[top] = 1.0;
        }
    }
    Ok(())
}

/// Euclidean projection onto the probability simplex (sort-and-threshold).
pub fn project_simplex(v: &[f64]) -> Result<ProbVector> {
    let mut w = v.to_vec();
    project_simplex_in_place(&mut w)?;
    ProbVector::new(w)
}

/// Componentwise clamp of `v` into `[lo, hi]`.
pub fn project_box(v: &[f64], lo: &[f64], hi: &[f64]) -> Result<Vec<f64>> {
    let set = BoxSet::new(lo.to_vec(), hi.to_vec())?;
    let mut out = v.to_vec();
    set.project(&mut out)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpgConfig {
    /// Sufficient-decrease parameter.
    pub gamma: f64,
    /// Nonmonotone window length.
    pub history_len: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// Stop when `||P(x - g) - x||_inf <= tol_pg`.
    pub tol_pg: f64,
    pub max_iter: usize,
    /// Keep one [`SpgTraceRow`] per iteration in the result.
    pub record_trace: bool,
}

impl Default for SpgConfig {
    fn default() -> Self {
        Self {
            gamma: 1e-4,
            history_len: 10,
            alpha_min: 1e-30,
            alpha_max: 1e30,
            tol_pg: 1e-8,
            max_iter: 10_000,
            record_trace: false,
        }
    }
}

impl SpgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(domain("SpgConfig", "gamma must be in (0, 1)"));
        }
        if !(self.alpha_min > 0.0 && self.alpha_min < self.alpha_max) {
            return Err(domain("SpgConfig", "need 0 < alpha_min < alpha_max"));
        }
        if self.history_len == 0 {
            return Err(domain("SpgConfig", "history_len must be >= 1"));
        }
        if !(self.tol_pg > 0.0) {
            return Err(domain("SpgConfig", "tol_pg must be > 0"));
        }
        Ok(())
    }
}

/// One accepted SPG step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpgTraceRow {
    pub iter: usize,
    /// Objective after the step.
    pub f: f64,
    /// Reference value `max` over the nonmonotone window before the step.
    pub f_ref: f64,
    /// Directional derivative `g'd` at the start of the step.
    pub gtd: f64,
    /// Accepted backtracking factor.
    pub step: f64,
    /// Spectral step used to build the direction.
    pub alpha: f64,
    pub backtracks: usize,
    /// Projected-gradient norm after the step.
    pub pg_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpgResult {
    pub minimizer: Vec<f64>,
    pub objective_value: f64,
    pub iterations: usize,
    pub function_evals: usize,
    pub converged: bool,
    pub final_pg_norm: f64,
    pub trace: Vec<SpgTraceRow>,
}

fn pg_norm_inf<P: Projection>(proj: &P, x: &[f64], g: &[f64], buf: &mut [f64]) -> Result<f64> {
    for ((b, &xi), &gi) in buf.iter_mut().zip(x).zip(g) {
        *b = xi - gi;
    }
    proj.project(buf)?;
    Ok(buf.iter().zip(x).fold(0.0f64, |m, (&p, &xi)| m.max((p - xi).abs())))
}

fn check_finite(f: f64, g: &[f64]) -> Result<()> {
    if !f.is_finite() {
        return Err(FeaError::Numeric {
            op: "spg_minimize",
            detail: format!("objective value {f}"),
        });
    }
    if let Some(v) = g.iter().find(|v| !v.is_finite()) {
        return Err(FeaError::Numeric {
            op: "spg_minimize",
            detail: format!("gradient entry {v}"),
        });
    }
    Ok(())
}

/// Minimizes a smooth function over a convex set.
///
/// `objective(x, grad)` returns `f(x)` and writes `grad f(x)` into `grad`.
/// Errors raised by the objective are propagated unchanged.
pub fn spg_minimize<F, P>(mut objective: F, projection: &P, x0: &[f64], cfg: &SpgConfig) -> Result<SpgResult>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64>,
    P: Projection,
{
    cfg.validate()?;
    let n = x0.len();
    let mut x = x0.to_vec();
    projection.project(&mut x)?;

    let mut g = vec![0.0; n];
    let mut f = objective(&x, &mut g)?;
    let mut evals = 1;
    check_finite(f, &g)?;

    let mut buf = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut xt = vec![0.0; n];
    let mut gt = vec![0.0; n];

    let mut history: VecDeque<f64> = VecDeque::with_capacity(cfg.history_len);
    history.push_back(f);
    let mut pg = pg_norm_inf(projection, &x, &g, &mut buf)?;
    let mut lambda = if pg > 0.0 {
        (1.0 / pg).clamp(cfg.alpha_min, cfg.alpha_max)
    } else {
        1.0
    };
    let mut best = (f, x.clone());
    let mut trace = Vec::new();
    let mut iterations = 0;

    while pg > cfg.tol_pg && iterations < cfg.max_iter {
        for ((b, &xi), &gi) in buf.iter_mut().zip(&x).zip(&g) {
            *b = xi - lambda * gi;
        }
        projection.project(&mut buf)?;
        for ((di, &p), &xi) in d.iter_mut().zip(&buf).zip(&x) {
            *di = p - xi;
        }
        let gtd: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        if !(gtd < 0.0) {
            // no numerical descent left along the projected direction
            break;
        }

        let f_ref = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut step = 1.0;
        let mut backtracks = 0;
        let ft = loop {
            if step == 1.0 {
                xt.copy_from_slice(&buf);
            } else {
                for ((t, &xi), &di) in xt.iter_mut().zip(&x).zip(&d) {
                    *t = xi + step * di;
                }
                projection.repair(&mut xt);
            }
            let ft = objective(&xt, &mut gt)?;
            evals += 1;
            check_finite(ft, &gt)?;
            if ft <= f_ref + cfg.gamma * step * gtd {
                break ft;
            }
            backtracks += 1;
            if backtracks >= MAX_BACKTRACKS {
                return Err(FeaError::Stagnation {
                    iterations,
                    best: best.1,
                    best_value: best.0,
                });
            }
            let trial = -0.5 * step * step * gtd / (ft - f - step * gtd);
            step = if trial >= SIGMA_LO && trial <= SIGMA_HI * step {
                trial
            } else {
                0.5 * step
            };
        };

        let mut sts = 0.0;
        let mut sty = 0.0;
        for i in 0..n {
            let s = xt[i] - x[i];
            let y = gt[i] - g[i];
            sts += s * s;
            sty += s * y;
        }
        std::mem::swap(&mut x, &mut xt);
        std::mem::swap(&mut g, &mut gt);
        f = ft;
        iterations += 1;

        let alpha_used = lambda;
        lambda = if sty <= 0.0 {
            cfg.alpha_max
        } else {
            (sts / sty).clamp(cfg.alpha_min, cfg.alpha_max)
        };
        if history.len() == cfg.history_len {
            history.pop_front();
        }
        history.push_back(f);
        if f < best.0 {
            best = (f, x.clone());
        }
        pg = pg_norm_inf(projection, &x, &g, &mut buf)?;

        let row = SpgTraceRow {
            iter: iterations,
            f,
            f_ref,
            gtd,
            step,
            alpha: alpha_used,
            backtracks,
            pg_norm: pg,
        };
        log::trace!(
            "spg iter={} f={:.17e} pg_norm={:.3e} alpha={:.3e} backtracks={}",
            row.iter,
            row.f,
            row.pg_norm,
            row.alpha,
            row.backtracks
        );
        if cfg.record_trace {
            trace.push(row);
        }
    }

    Ok(SpgResult {
        minimizer: x,
        objective_value: f,
        iterations,
        function_evals: evals,
        converged: pg <= cfg.tol_pg,
        final_pg_norm: pg,
        trace,
    })
}
