//! Paired multi-seed comparison of selection methods over a sweep of
//! benchmark configurations.

use serde::Serialize;

use super::benchmark::{generate_benchmark, BenchmarkConfig};
use super::lasso::{lasso_fit, LassoConfig};
use super::spartan::{spartan_fea_fit, SpartanConfig};
use super::{Method, SelectionResult};
use crate::error::{domain, Result};
use crate::kernels::KernelVariant;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Dataset seed for one (config, repeat) cell; every method sees the same data.
pub fn derive_seed(master: u64, config_index: usize, repeat: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ config_index as u64) ^ repeat as u64)
}

/// One fit of one method on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawRow {
    pub config_id: usize,
    pub method: Method,
    pub repeat: usize,
    pub seed: u64,
    /// `NaN` when the fit failed.
    pub l1_error: f64,
    pub runtime_s: f64,
    pub iterations: usize,
    pub converged: bool,
    pub support: Vec<usize>,
    pub hyperparameter: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellAggregate {
    pub config_id: usize,
    pub config: BenchmarkConfig,
    pub method: Method,
    pub n_ok: usize,
    pub n_failed: usize,
    pub l1_median: f64,
    pub l1_iqr: f64,
    pub runtime_median: f64,
    pub runtime_iqr: f64,
    /// Fits whose support equals the true support.
    pub exact_support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub cells: Vec<CellAggregate>,
    pub raw: Vec<RawRow>,
}

impl ComparisonTable {
    pub fn cell(&self, config_id: usize, method: Method) -> Option<&CellAggregate> {
        self.cells.iter().find(|c| c.config_id == config_id && c.method == method)
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn median_iqr(mut v: Vec<f64>) -> (f64, f64) {
    v.sort_by(f64::total_cmp);
    (quantile(&v, 0.5), quantile(&v, 0.75) - quantile(&v, 0.25))
}

/// Settings shared by every cell of a sweep.
#[derive(Debug, Clone, Default)]
pub struct ComparisonSettings {
    pub spartan: SpartanConfig,
    pub lasso: LassoConfig,
}

fn fit(method: Method, data: &super::RegressionDataset, s: &ComparisonSettings) -> Result<SelectionResult> {
    match method {
        Method::SpartanFea => spartan_fea_fit(data, &s.spartan, KernelVariant::Fea),
        Method::SpartanExact => spartan_fea_fit(data, &s.spartan, KernelVariant::ExactLog),
        Method::Lasso => lasso_fit(data, &s.lasso),
    }
}

/// Runs every method on `repeats` datasets per configuration.
///
/// Dataset seeds come from [`derive_seed`]; the `seed` field of each config is
/// ignored. A failed fit is recorded in its row and excluded from the cell
/// statistics; it never aborts the sweep.
pub fn run_comparison(
    sweep: &[BenchmarkConfig],
    methods: &[Method],
    repeats: usize,
    master_seed: u64,
    settings: &ComparisonSettings,
) -> Result<ComparisonTable> {
    if repeats == 0 {
        return Err(domain("run_comparison", "repeats must be >= 1"));
    }
    if methods.is_empty() {
        return Err(domain("run_comparison", "no methods selected"));
    }
    let mut raw = Vec::new();
    for (config_id, base) in sweep.iter().enumerate() {
        for repeat in 0..repeats {
            let seed = derive_seed(master_seed, config_id, repeat);
            let cfg = BenchmarkConfig { seed, ..base.clone() };
            let data = generate_benchmark(&cfg)?;
            for &method in methods {
                let row = match fit(method, &data, settings) {
                    Ok(r) => RawRow {
                        config_id,
                        method,
                        repeat,
                        seed,
                        l1_error: r.l1_error,
                        runtime_s: r.runtime_seconds,
                        iterations: r.iterations,
                        converged: r.converged,
                        support: r.support,
                        hyperparameter: r.hyperparameter,
                        error: None,
                    },
                    Err(e) => RawRow {
                        config_id,
                        method,
                        repeat,
                        seed,
                        l1_error: f64::NAN,
                        runtime_s: f64::NAN,
                        iterations: 0,
                        converged: false,
                        support: Vec::new(),
                        hyperparameter: f64::NAN,
                        error: Some(e.to_string()),
                    },
                };
                log::debug!(
                    "featsel config={} repeat={} method={} l1={:.6e}",
                    config_id,
                    repeat,
                    method,
                    row.l1_error
                );
                raw.push(row);
            }
        }
    }

    let mut cells = Vec::new();
    for (config_id, base) in sweep.iter().enumerate() {
        let truth = base.true_support();
        for &method in methods {
            let rows: Vec<&RawRow> = raw
                .iter()
                .filter(|r| r.config_id == config_id && r.method == method)
                .collect();
            let ok: Vec<&&RawRow> = rows.iter().filter(|r| r.error.is_none()).collect();
            let (l1_median, l1_iqr) = median_iqr(ok.iter().map(|r| r.l1_error).collect());
            let (runtime_median, runtime_iqr) = median_iqr(ok.iter().map(|r| r.runtime_s).collect());
            cells.push(CellAggregate {
                config_id,
                config: base.clone(),
                method,
                n_ok: ok.len(),
                n_failed: rows.len() - ok.len(),
                l1_median,
                l1_iqr,
                runtime_median,
                runtime_iqr,
                exact_support: ok.iter().filter(|r| r.support == truth).count(),
            });
        }
    }
    Ok(ComparisonTable { cells, raw })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        assert_eq!(quantile(&[3.0], 0.5), 3.0);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.5);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.25), 2.0);
        assert!(quantile(&[], 0.5).is_nan());
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a = derive_seed(7, 0, 0);
        assert_eq!(a, derive_seed(7, 0, 0));
        assert_ne!(a, derive_seed(7, 0, 1));
        assert_ne!(a, derive_seed(7, 1, 0));
        assert_ne!(a, derive_seed(8, 0, 0));
    }

    #[test]
    fn single_repeat_median_is_the_value() {
        let sweep = [BenchmarkConfig::standard(40, 1.0, 0)];
        let t = run_comparison(&sweep, &[Method::Lasso], 1, 3, &ComparisonSettings::default()).unwrap();
        assert_eq!(t.raw.len(), 1);
        assert_eq!(t.cells[0].l1_median, t.raw[0].l1_error);
        assert_eq!(t.cells[0].l1_iqr, 0.0);
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let sweep = [BenchmarkConfig::standard(40, 1.0, 0)];
        let t = run_comparison(
            &sweep,
            &[Method::SpartanExact, Method::Lasso],
            2,
            3,
            &ComparisonSettings::default(),
        )
        .unwrap();
        assert_eq!(t.raw.len(), 4);
        let lasso = t.cell(0, Method::Lasso).unwrap();
        assert_eq!(lasso.n_ok, 2);
        let exact = t.cell(0, Method::SpartanExact).unwrap();
        assert_eq!(exact.n_ok + exact.n_failed, 2);
    }

    #[test]
    fn zero_repeats_rejected() {
        assert!(run_comparison(&[], &[Method::Lasso], 0, 0, &ComparisonSettings::default()).is_err());
    }
}
