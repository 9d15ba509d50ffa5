//! Sparse-regression feature selection: the synthetic benchmark, an entropic
//! selector whose feature weights live on the simplex, a LASSO baseline, and
//! paired comparisons between them.

pub mod benchmark;
pub mod compare;
pub mod lasso;
pub mod spartan;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, FeaError, Result};

pub use benchmark::{generate_benchmark, BenchmarkConfig, RegressionDataset, DEFAULT_X_TRUE};
pub use compare::{derive_seed, run_comparison, CellAggregate, ComparisonSettings, ComparisonTable, RawRow};
pub use lasso::{lasso_fit, LambdaGrid, LassoConfig};
pub use spartan::{spartan_fea_fit, EpsGrid, SpartanConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Entropic selector with the rational entropy approximation.
    SpartanFea,
    /// Entropic selector with the exact `-x ln x` entropy.
    SpartanExact,
    Lasso,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::SpartanFea => "spartan-fea",
            Method::SpartanExact => "spartan-exact",
            Method::Lasso => "lasso",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = FeaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spartan-fea" => Ok(Method::SpartanFea),
            "spartan-exact" => Ok(Method::SpartanExact),
            "lasso" => Ok(Method::Lasso),
            other => Err(domain("Method", format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionResult {
    pub method: Method,
    pub x_star: Vec<f64>,
    /// Indices with `x_star[i] != 0`.
    pub support: Vec<usize>,
    pub l1_error: f64,
    pub runtime_seconds: f64,
    /// Outer iterations (entropic selector) or coordinate sweeps (LASSO) of
    /// the final fit.
    pub iterations: usize,
    pub converged: bool,
    /// Selected regularization weight (`eps_H` or `lambda`).
    pub hyperparameter: f64,
}

/// Average absolute coefficient error `(1/N) sum |x*_i - x_i|`.
pub fn l1_param_error(x_star: &[f64], x_true: &[f64]) -> Result<f64> {
    if x_star.len() != x_true.len() {
        return Err(FeaError::Shape {
            op: "l1_param_error",
            expected: x_true.len(),
            got: x_star.len(),
        });
    }
    if x_true.is_empty() {
        return Err(domain("l1_param_error", "empty coefficient vectors"));
    }
    let total: f64 = x_star.iter().zip(x_true).map(|(a, b)| (a - b).abs()).sum();
    Ok(total / x_true.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l1_examples() {
        let truth = DEFAULT_X_TRUE;
        assert_eq!(l1_param_error(&truth, &truth).unwrap(), 0.0);
        assert_eq!(l1_param_error(&[0.0; 8], &truth).unwrap(), 0.8125);
        let mut a = vec![1.0, 2.0, 3.0];
        let mut b = vec![0.5, 2.5, 2.0];
        let before = l1_param_error(&a, &b).unwrap();
        a.reverse();
        b.reverse();
        assert_eq!(l1_param_error(&a, &b).unwrap(), before);
        assert!(matches!(l1_param_error(&[1.0], &[1.0, 2.0]), Err(FeaError::Shape { .. })));
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::SpartanFea, Method::SpartanExact, Method::Lasso] {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("ridge".parse::<Method>().is_err());
    }
}
