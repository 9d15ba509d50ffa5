use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use super::{usage, CliError, GlobalOpts, Outcome, Table};
use crate::analysis::{
    entropy_concavity_probe, kl_convexity_probe, kl_pointwise, kl_property_probe, lipschitz_estimate, mae_on_grid,
    mae_on_grid_2d, se_pointwise, two_symbol_stationary_point, AccuracyReport, BiasProfile, ConvexityProbeConfig,
    Grid1D, Grid2D, KlPropertyConfig, KlRegion, Measure, STANDARD_GRID_POINTS, STANDARD_KL_EPS,
    STANDARD_KL_GRID_POINTS,
};
use crate::bench::{run_bench, BenchConfig};
use crate::featsel::{
    run_comparison, BenchmarkConfig, ComparisonSettings, LassoConfig, Method, SpartanConfig, DEFAULT_X_TRUE,
};
use crate::kernels::{fea_term_grad, fea_term_second_derivative, ApproxCoefficients, KernelVariant};

/// Value quoted in the source publication for the FEA Lipschitz constant.
pub const PUBLISHED_LIPSCHITZ: f64 = 31.616;

fn to_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("report types serialize to JSON")
}

// ---------------------------------------------------------------------------
// accuracy

#[derive(Debug, Clone, Args)]
pub struct AccuracyArgs {
    /// `se` (entropy term) or `kl` (symmetrized KL term).
    #[arg(long, default_value = "se")]
    pub measure: Measure,
    /// Approximate variants compared against the exact kernel.
    #[arg(long = "variant", value_delimiter = ',', default_value = "fea,mitchell")]
    pub variants: Vec<KernelVariant>,
    /// Grid points (per axis for `kl`).
    #[arg(long)]
    pub grid: Option<usize>,
    /// Lower end of the `kl` grid on both axes.
    #[arg(long, default_value_t = STANDARD_KL_EPS)]
    pub kl_lo: f64,
    /// Restrict `kl` to `|x - y| <= BAND`.
    #[arg(long)]
    pub band: Option<f64>,
}

#[derive(Serialize)]
struct AccuracyConfig<'a> {
    command: &'static str,
    measure: Measure,
    variants: &'a [KernelVariant],
    grid: usize,
    kl_lo: f64,
    band: Option<f64>,
    coeffs: ApproxCoefficients,
}

fn accuracy_summary(reports: &[AccuracyReport]) -> Table {
    let mut t = Table::new(vec![
        "measure",
        "variant",
        "mae",
        "max_abs_error",
        "argmax",
        "n_evaluated",
        "n_excluded",
        "grid",
    ]);
    for r in reports {
        let at: Vec<String> = r.argmax_error.iter().map(|v| v.to_string()).collect();
        t.push(vec![
            r.measure.as_str().into(),
            r.variant.as_str().into(),
            r.mae.into(),
            r.max_abs_error.into(),
            at.join(" ").into(),
            r.n_evaluated.into(),
            r.n_excluded.into(),
            r.grid.clone().into(),
        ]);
    }
    t
}

pub(crate) fn cmd_accuracy(a: &AccuracyArgs, g: &GlobalOpts) -> Result<Outcome, CliError> {
    let coeffs = ApproxCoefficients::default();
    let reference = KernelVariant::ExactLog;
    if a.variants.is_empty() {
        return Err(usage("at least one --variant is required"));
    }
    let region = match a.band {
        None => KlRegion::Full,
        Some(w) if a.measure == Measure::Kl && w >= 0.0 => KlRegion::DiagonalBand(w),
        Some(_) => return Err(usage("--band needs --measure kl and a non-negative width")),
    };
    let default_grid = match a.measure {
        Measure::Se => STANDARD_GRID_POINTS,
        Measure::Kl => STANDARD_KL_GRID_POINTS,
    };
    let n = a.grid.unwrap_or(default_grid);
    let cfg = AccuracyConfig {
        command: "accuracy",
        measure: a.measure,
        variants: &a.variants,
        grid: n,
        kl_lo: a.kl_lo,
        band: a.band,
        coeffs,
    };

    let want_points = g.out.is_some();
    let (summary_reports, full) = match a.measure {
        Measure::Se => {
            let grid = Grid1D::unit(n).map_err(usage)?;
            let mut full = Table::new(vec!["x", "exact", "variant", "abs_error"]);
            let mut reports = Vec::new();
            for &v in &a.variants {
                if want_points {
                    for p in se_pointwise(reference, v, &grid, &coeffs) {
                        full.push(vec![p.x.into(), p.reference.into(), v.as_str().into(), p.abs_error().into()]);
                    }
                }
                reports.push(mae_on_grid(reference, v, &grid, &coeffs));
            }
            (reports, full)
        }
        Measure::Kl => {
            let grid = Grid2D::square(Grid1D::new(a.kl_lo, 1.0, n).map_err(usage)?);
            let mut full = Table::new(vec!["x", "y", "exact", "variant", "abs_error"]);
            let mut reports = Vec::new();
            for &v in &a.variants {
                if want_points {
                    for p in kl_pointwise(reference, v, &grid, region, &coeffs) {
                        full.push(vec![
                            p.x.into(),
                            p.y.into(),
                            p.reference.into(),
                            v.as_str().into(),
                            p.abs_error().into(),
                        ]);
                    }
                }
                reports.push(mae_on_grid_2d(reference, v, &grid, region, &coeffs));
            }
            (reports, full)
        }
    };
    for r in &summary_reports {
        log::info!("accuracy {} {}: mae {:e}, max {:e}", r.measure.as_str(), r.variant, r.mae, r.max_abs_error);
    }
    Ok(Outcome {
        summary: accuracy_summary(&summary_reports),
        full,
        summary_json: to_json(&summary_reports),
        config_json: to_json(&cfg),
        failure: None,
    })
}

// ---------------------------------------------------------------------------
// bench

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// `se`, `kl`, or both when omitted.
    #[arg(long)]
    pub measure: Option<Measure>,
    /// Variants timed against the exact kernel.
    #[arg(long = "variant", value_delimiter = ',', default_value = "fea,mitchell")]
    pub variants: Vec<KernelVariant>,
    #[arg(long, default_value_t = 1_000_000)]
    pub batch: usize,
    #[arg(long, default_value_t = 31)]
    pub repeats: usize,
}

pub(crate) fn cmd_bench(a: &BenchArgs, g: &GlobalOpts) -> Result<Outcome, CliError> {
    let coeffs = ApproxCoefficients::default();
    let measures = match a.measure {
        Some(m) => vec![m],
        None => vec![Measure::Se, Measure::Kl],
    };
    let configs: Vec<BenchConfig> = measures
        .iter()
        .map(|&m| BenchConfig {
            batch_size: a.batch,
            repeats: a.repeats,
            ..BenchConfig::new(m, g.seed)
        })
        .collect();
    for c in &configs {
        c.validate().map_err(usage)?;
    }
    let mut reports = Vec::new();
    for c in &configs {
        reports.extend(run_bench(c, &a.variants, &coeffs)?);
    }
    let mut t = Table::new(vec![
        "measure",
        "variant",
        "batch",
        "repeats",
        "ns_per_elem_median",
        "ns_per_elem_mean",
        "speedup",
    ]);
    for r in &reports {
        t.push(vec![
            r.measure.as_str().into(),
            r.variant.as_str().into(),
            r.batch_size.into(),
            r.repeats.into(),
            r.ns_per_elem_median.into(),
            r.ns_per_elem_mean.into(),
            r.speedup_vs_exact.into(),
        ]);
    }
    let full = Table {
        header: t.header.clone(),
        rows: t.rows.clone(),
    };
    Ok(Outcome {
        summary: t,
        full,
        summary_json: to_json(&reports),
        config_json: serde_json::json!({
            "command": "bench",
            "runs": configs,
            "variants": a.variants,
            "threads": 1,
        }),
        failure: None,
    })
}

// ---------------------------------------------------------------------------
// props

#[derive(Debug, Clone, Args)]
pub struct PropsArgs {
    /// Random pairs for the KL pointwise properties.
    #[arg(long, default_value_t = 100_000)]
    pub kl_pairs: usize,
    /// Random segments for the KL midpoint-convexity test.
    #[arg(long, default_value_t = 100_000)]
    pub segments: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// A soft claim that the probe could not confirm.
    Unconfirmed,
}

impl Verdict {
    fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Unconfirmed => "unconfirmed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyVerdict {
    pub property: &'static str,
    pub verdict: Verdict,
    /// Hard properties fail the run; soft ones are reported only.
    pub hard: bool,
    pub value: f64,
    pub detail: String,
}

fn verdict(property: &'static str, ok: bool, value: f64, detail: String) -> PropertyVerdict {
    PropertyVerdict {
        property,
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        hard: true,
        value,
        detail,
    }
}

/// Runs every shape probe with its default tolerances.
pub fn property_verdicts(kl_pairs: usize, segments: usize, seed: u64) -> crate::Result<Vec<PropertyVerdict>> {
    let c = ApproxCoefficients::default();
    let grid = Grid1D::standard();
    let mut out = Vec::new();

    let mut worst_grad = 0.0f64;
    let mut nonfinite = 0;
    for x in grid.points() {
        let g = fea_term_grad(x, &c)?;
        if g.is_finite() {
            worst_grad = worst_grad.max(g.abs());
        } else {
            nonfinite += 1;
        }
    }
    out.push(verdict(
        "se_gradient_nonsingular",
        nonfinite == 0,
        worst_grad,
        format!("max |h'| on {} = {worst_grad}; non-finite: {nonfinite}", grid.describe()),
    ));

    let kl = kl_property_probe(
        &KlPropertyConfig {
            random_pairs: kl_pairs,
            seed,
            ..KlPropertyConfig::default()
        },
        &c,
    )?;
    out.push(verdict(
        "kl_non_negative",
        kl.negative_values == 0,
        kl.min_value,
        format!("min value {} over {} pairs", kl.min_value, kl.pairs),
    ));
    out.push(verdict(
        "kl_symmetric",
        kl.max_asymmetry <= 1e-15,
        kl.max_asymmetry,
        format!("max |D(x,y) - D(y,x)| = {}", kl.max_asymmetry),
    ));
    out.push(verdict(
        "kl_zero_iff_equal",
        kl.exact_zero_violations == 0 && kl.zero_threshold_mismatches == 0,
        (kl.exact_zero_violations + kl.zero_threshold_mismatches) as f64,
        format!(
            "exact-zero violations {}; threshold mismatches {} (examples {:?})",
            kl.exact_zero_violations, kl.zero_threshold_mismatches, kl.mismatch_examples
        ),
    ));
    out.push(verdict(
        "kl_gradient_finite",
        kl.nonfinite_gradients == 0,
        kl.nonfinite_gradients as f64,
        format!("non-finite gradients: {}", kl.nonfinite_gradients),
    ));

    let conv = kl_convexity_probe(
        &ConvexityProbeConfig {
            segments,
            seed,
            ..ConvexityProbeConfig::default()
        },
        &c,
    )?;
    let convex = conv.is_convex(1e-6);
    out.push(PropertyVerdict {
        property: "kl_convexity",
        verdict: if convex { Verdict::Pass } else { Verdict::Unconfirmed },
        hard: false,
        value: conv.min_hessian_eigenvalue,
        detail: format!(
            "min Hessian eigenvalue {} at {:?}; midpoint violations {}/{} (worst gap {}, e.g. {:?})",
            conv.min_hessian_eigenvalue,
            conv.argmin_eigenvalue,
            conv.midpoint_violations,
            conv.segments,
            conv.worst_midpoint_gap,
            conv.violation_examples.first()
        ),
    });

    let conc = entropy_concavity_probe(&grid, &c)?;
    out.push(verdict(
        "se_two_symbol_concave",
        conc.max_second_difference <= 0.0 && conc.minima_at_endpoints(),
        conc.max_second_difference,
        format!(
            "max second difference {} at {}; minimum {} at {}",
            conc.max_second_difference, conc.argmax_second_difference, conc.min_value, conc.argmin
        ),
    ));

    let lip = lipschitz_estimate(&grid, &c);
    let closed_form = fea_term_second_derivative(0.0, &c).abs();
    out.push(verdict(
        "se_gradient_lipschitz",
        lip.argmax == 0.0 && (lip.value - closed_form).abs() <= 1e-12 * closed_form,
        lip.value,
        format!(
            "sup |h''| = {} at x = {} (published {PUBLISHED_LIPSCHITZ}, delta {:+})",
            lip.value,
            lip.argmax,
            lip.value - PUBLISHED_LIPSCHITZ
        ),
    ));

    match two_symbol_stationary_point(&c) {
        Ok(sp) => out.push(verdict(
            "se_two_symbol_stationary_point",
            (sp.location - 0.5).abs() <= 1e-9 && sp.curvature < 0.0,
            sp.location,
            format!("x = {}, curvature {}", sp.location, sp.curvature),
        )),
        Err(e) => out.push(verdict("se_two_symbol_stationary_point", false, f64::NAN, e.to_string())),
    }

    let bias = BiasProfile::compute(Grid1D::unit(10_001)?, &c)?;
    let (inner, at) = bias.max_abs_in(0.1, 0.9);
    let end = bias.bias[0];
    let rel = end / std::f64::consts::LN_2;
    out.push(verdict(
        "bernoulli_bias_bounds",
        inner <= 0.003 && (end - 0.01586).abs() <= 1e-4 && (rel - 0.0229).abs() <= 5e-4,
        inner,
        format!("max |bias| on [0.1, 0.9] = {inner} at p = {at}; bias at p = 0 is {end} ({:.4}% of ln 2)", 100.0 * rel),
    ));
    Ok(out)
}

pub(crate) fn cmd_props(a: &PropsArgs, g: &GlobalOpts) -> Result<Outcome, CliError> {
    if a.kl_pairs == 0 || a.segments == 0 {
        return Err(usage("--kl-pairs and --segments must be >= 1"));
    }
    let verdicts = property_verdicts(a.kl_pairs, a.segments, g.seed)?;
    let mut t = Table::new(vec!["property", "verdict", "hard", "value", "detail"]);
    for v in &verdicts {
        t.push(vec![
            v.property.into(),
            v.verdict.as_str().into(),
            v.hard.into(),
            v.value.into(),
            v.detail.clone().into(),
        ]);
    }
    let failed: Vec<&str> = verdicts
        .iter()
        .filter(|v| v.hard && v.verdict == Verdict::Fail)
        .map(|v| v.property)
        .collect();
    let full = Table {
        header: t.header.clone(),
        rows: t.rows.clone(),
    };
    Ok(Outcome {
        summary: t,
        full,
        summary_json: to_json(&verdicts),
        config_json: serde_json::json!({
            "command": "props",
            "kl_pairs": a.kl_pairs,
            "segments": a.segments,
            "coeffs": ApproxCoefficients::default(),
        }),
        failure: (!failed.is_empty()).then(|| CliError::Property(failed.join(", "))),
    })
}

// ---------------------------------------------------------------------------
// featsel

#[derive(Debug, Clone, Args)]
pub struct FeatselArgs {
    /// JSON sweep specification; replaces the inline list flags.
    #[arg(long, conflicts_with_all = ["n_features", "n_samples", "sigma", "rho", "repeats", "methods"])]
    pub config: Option<PathBuf>,
    /// Feature counts; `x_true` is the default vector padded with zeros or truncated.
    #[arg(long = "n", value_delimiter = ',')]
    pub n_features: Option<Vec<usize>>,
    #[arg(long = "t", value_delimiter = ',')]
    pub n_samples: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub sigma: Option<Vec<f64>>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
}

/// A feature-selection sweep: the Cartesian product of the list fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatselSpec {
    pub n_features: Vec<usize>,
    pub n_samples: Vec<usize>,
    pub sigma: Vec<f64>,
    pub rho: f64,
    pub repeats: usize,
    pub methods: Vec<Method>,
    pub spartan: SpartanConfig,
    pub lasso: LassoConfig,
}

impl Default for FeatselSpec {
    fn default() -> Self {
        Self {
            n_features: vec![DEFAULT_X_TRUE.len()],
            n_samples: vec![20, 100, 1000],
            sigma: vec![1.0, 3.0],
            rho: 0.5,
            repeats: 50,
            methods: vec![Method::SpartanFea, Method::Lasso],
            spartan: SpartanConfig::default(),
            lasso: LassoConfig::default(),
        }
    }
}

impl FeatselSpec {
    pub fn sweep(&self) -> Vec<BenchmarkConfig> {
        let mut out = Vec::new();
        for &n in &self.n_features {
            let mut x_true = DEFAULT_X_TRUE.to_vec();
            x_true.resize(n, 0.0);
            for &t in &self.n_samples {
                for &sigma in &self.sigma {
                    out.push(BenchmarkConfig {
                        n_features: n,
                        n_samples: t,
                        sigma,
                        rho: self.rho,
                        x_true: x_true.clone(),
                        seed: 0,
                    });
                }
            }
        }
        out
    }

    pub fn validate(&self) -> crate::Result<()> {
        if self.repeats == 0 || self.methods.is_empty() {
            return Err(crate::error::domain("FeatselSpec", "repeats and methods must be non-empty"));
        }
        let sweep = self.sweep();
        if sweep.is_empty() {
            return Err(crate::error::domain("FeatselSpec", "empty sweep"));
        }
        for c in &sweep {
            c.validate()?;
        }
        self.spartan.validate()
    }
}

fn resolve_spec(a: &FeatselArgs) -> Result<FeatselSpec, CliError> {
    if let Some(path) = &a.config {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        return serde_json::from_str(&text).map_err(|e| usage(format!("bad config {}: {e}", path.display())));
    }
    let d = FeatselSpec::default();
    Ok(FeatselSpec {
        n_features: a.n_features.clone().unwrap_or(d.n_features),
        n_samples: a.n_samples.clone().unwrap_or(d.n_samples),
        sigma: a.sigma.clone().unwrap_or(d.sigma),
        rho: a.rho.unwrap_or(d.rho),
        repeats: a.repeats.unwrap_or(d.repeats),
        methods: a.methods.clone().unwrap_or(d.methods),
        ..d
    })
}

pub(crate) fn cmd_featsel(a: &FeatselArgs, g: &GlobalOpts) -> Result<Outcome, CliError> {
    let spec = resolve_spec(a)?;
    spec.validate().map_err(usage)?;
    let settings = ComparisonSettings {
        spartan: spec.spartan.clone(),
        lasso: spec.lasso.clone(),
    };
    let table = run_comparison(&spec.sweep(), &spec.methods, spec.repeats, g.seed, &settings)?;

    let mut full = Table::new(vec!["config_id", "method", "repeat", "l1_error", "runtime_s", "iterations", "converged"]);
    for r in &table.raw {
        full.push(vec![
            r.config_id.into(),
            r.method.as_str().into(),
            r.repeat.into(),
            r.l1_error.into(),
            r.runtime_s.into(),
            r.iterations.into(),
            r.converged.into(),
        ]);
    }
    let mut summary = Table::new(vec![
        "config_id",
        "n_features",
        "n_samples",
        "sigma",
        "method",
        "n_ok",
        "n_failed",
        "l1_median",
        "l1_iqr",
        "runtime_median",
        "runtime_iqr",
        "exact_support",
    ]);
    for c in &table.cells {
        summary.push(vec![
            c.config_id.into(),
            c.config.n_features.into(),
            c.config.n_samples.into(),
            c.config.sigma.into(),
            c.method.as_str().into(),
            c.n_ok.into(),
            c.n_failed.into(),
            c.l1_median.into(),
            c.l1_iqr.into(),
            c.runtime_median.into(),
            c.runtime_iqr.into(),
            c.exact_support.into(),
        ]);
    }
    Ok(Outcome {
        summary,
        full,
        summary_json: to_json(&table),
        config_json: serde_json::json!({ "command": "featsel", "spec": spec }),
        failure: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_sweep_is_the_standard_family() {
        let s = FeatselSpec::default();
        let sweep = s.sweep();
        assert_eq!(sweep.len(), 6);
        assert!(sweep.iter().all(|c| c.x_true == DEFAULT_X_TRUE && c.rho == 0.5));
    }

    #[test]
    fn x_true_is_padded_or_truncated() {
        let s = FeatselSpec {
            n_features: vec![4, 10],
            n_samples: vec![50],
            sigma: vec![0.0],
            ..FeatselSpec::default()
        };
        let sweep = s.sweep();
        assert_eq!(sweep[0].x_true, vec![3.0, 1.5, 0.0, 0.0]);
        assert_eq!(sweep[1].x_true.len(), 10);
        assert_eq!(sweep[1].x_true[8..], [0.0, 0.0]);
    }

    #[test]
    fn spec_parses_partial_json() {
        let s: FeatselSpec = serde_json::from_str(r#"{"n_samples": [30], "methods": ["lasso"]}"#).unwrap();
        assert_eq!(s.n_samples, vec![30]);
        assert_eq!(s.methods, vec![Method::Lasso]);
        assert_eq!(s.repeats, 50);
        assert!(serde_json::from_str::<FeatselSpec>(r#"{"bogus": 1}"#).is_err());
    }
}
