//! Synthetic sparse linear regression benchmark with AR(1)-correlated
//! Gaussian features.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, FeaError, Result};

/// Default sparse coefficients: three active features out of eight.
pub const DEFAULT_X_TRUE: [f64; 8] = [3.0, 1.5, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    /// Number of features `N`.
    pub n_features: usize,
    /// Number of samples `T`.
    pub n_samples: usize,
    /// Noise standard deviation.
    pub sigma: f64,
    /// Feature correlation decay, `corr(f_i, f_j) = rho^|i - j|`.
    pub rho: f64,
    pub x_true: Vec<f64>,
    pub seed: u64,
}

impl BenchmarkConfig {
    /// The eight-feature family with `rho = 0.5` and [`DEFAULT_X_TRUE`].
    pub fn standard(n_samples: usize, sigma: f64, seed: u64) -> Self {
        Self {
            n_features: DEFAULT_X_TRUE.len(),
            n_samples,
            sigma,
            rho: 0.5,
            x_true: DEFAULT_X_TRUE.to_vec(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_features < 2 {
            return Err(domain("BenchmarkConfig", "need at least 2 features"));
        }
        if self.n_samples < 2 {
            return Err(domain("BenchmarkConfig", "need at least 2 samples"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(domain("BenchmarkConfig", format!("sigma = {} must be >= 0", self.sigma)));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(domain("BenchmarkConfig", format!("rho = {} must be in [0, 1)", self.rho)));
        }
        if self.x_true.len() != self.n_features {
            return Err(FeaError::Shape {
                op: "BenchmarkConfig",
                expected: self.n_features,
                got: self.x_true.len(),
            });
        }
        if self.x_true.iter().any(|v| !v.is_finite()) {
            return Err(domain("BenchmarkConfig", "x_true must be finite"));
        }
        Ok(())
    }

    /// Indices of the nonzero entries of `x_true`.
    pub fn true_support(&self) -> Vec<usize> {
        support_of(&self.x_true)
    }
}

pub(crate) fn support_of(x: &[f64]) -> Vec<usize> {
    x.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// Design matrix, responses and ground truth of one benchmark draw.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionDataset {
    /// `T x N` feature matrix.
    pub features: DMatrix<f64>,
    pub responses: DVector<f64>,
    pub truth: Vec<f64>,
    pub config: BenchmarkConfig,
}

impl RegressionDataset {
    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    /// Rows `range` of the dataset.
    pub fn rows(&self, range: std::ops::Range<usize>) -> RegressionDataset {
        let len = range.end - range.start;
        RegressionDataset {
            features: self.features.rows(range.start, len).into_owned(),
            responses: self.responses.rows(range.start, len).into_owned(),
            truth: self.truth.clone(),
            config: self.config.clone(),
        }
    }

    /// Writes `f_1, ..., f_N, y` with a header row.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let n = self.n_features();
        let mut header: Vec<String> = (1..=n).map(|j| format!("f_{j}")).collect();
        header.push("y".into());
        w.write_record(&header).map_err(io_err)?;
        for t in 0..self.n_samples() {
            let mut rec: Vec<String> = (0..n).map(|j| self.features[(t, j)].to_string()).collect();
            rec.push(self.responses[t].to_string());
            w.write_record(&rec).map_err(io_err)?;
        }
        w.flush().map_err(|e| io_err(e.into()))?;
        Ok(())
    }

    /// Reads the format of [`write_csv`](Self::write_csv). The config is
    /// rebuilt from the shape; `truth` must be supplied by the caller.
    pub fn read_csv<R: Read>(reader: R, truth: Vec<f64>) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers().map_err(io_err)?.clone();
        let n = header.len().saturating_sub(1);
        if n < 1 || &header[n] != "y" {
            return Err(domain("read_csv", "last column must be y"));
        }
        if truth.len() != n {
            return Err(FeaError::Shape {
                op: "read_csv",
                expected: n,
                got: truth.len(),
            });
        }
        let mut data = Vec::new();
        let mut ys = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(io_err)?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| domain("read_csv", e.to_string())))
                .collect::<Result<_>>()?;
            data.extend_from_slice(&vals[..n]);
            ys.push(vals[n]);
        }
        let t = ys.len();
        let features = DMatrix::from_row_slice(t, n, &data);
        Ok(Self {
            features,
            responses: DVector::from_vec(ys),
            config: BenchmarkConfig {
                n_features: n,
                n_samples: t,
                sigma: f64::NAN,
                rho: f64::NAN,
                x_true: truth.clone(),
                seed: 0,
            },
            truth,
        })
    }
}

fn io_err(e: csv::Error) -> FeaError {
    domain("csv", e.to_string())
}

/// Draws `T` rows `F(t) ~ N(0, C)` with `C_ij = rho^|i-j|`, standard normal
/// noise, and `y = F x_true + sigma noise`. Fully determined by `cfg.seed`.
pub fn generate_benchmark(cfg: &BenchmarkConfig) -> Result<RegressionDataset> {
    cfg.validate()?;
    let (t_len, n) = (cfg.n_samples, cfg.n_features);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let innovation = (1.0 - cfg.rho * cfg.rho).sqrt();
    let mut features = DMatrix::zeros(t_len, n);
    let mut responses = DVector::zeros(t_len);
    for t in 0..t_len {
        // stationary AR(1) across the feature index has exactly this covariance
        let mut prev: f64 = StandardNormal.sample(&mut rng);
        features[(t, 0)] = prev;
        for j in 1..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            prev = cfg.rho * prev + innovation * z;
            features[(t, j)] = prev;
        }
        let noise: f64 = StandardNormal.sample(&mut rng);
        let signal: f64 = (0..n).map(|j| features[(t, j)] * cfg.x_true[j]).sum();
        responses[t] = signal + cfg.sigma * noise;
    }
    Ok(RegressionDataset {
        features,
        responses,
        truth: cfg.x_true.clone(),
        config: cfg.clone(),
    })
}
