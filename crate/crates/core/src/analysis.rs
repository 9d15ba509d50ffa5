//! Accuracy sweeps, bias profiles and shape-property probes for the kernels.
//!
//! Every sweep runs over an explicit uniform grid and accumulates with
//! compensated summation, so reported means do not depend on how a caller
//! partitions the grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, domain, FeaError, Result};
use crate::kernels::{
    entropy_term, fea_term_grad, fea_term_second_derivative, kl_term, kl_term_fea, kl_term_fea_grad,
    shannon_term_exact, ApproxCoefficients, KernelVariant, KlValue,
};

/// Points in the standard 1-D accuracy grid on `[0, 1]`.
pub const STANDARD_GRID_POINTS: usize = 100_001;
/// Points per axis in the standard 2-D KL grid.
pub const STANDARD_KL_GRID_POINTS: usize = 1001;
/// Lower edge of the standard 2-D KL grid; the exact divergence is unbounded
/// on the axes.
pub const STANDARD_KL_EPS: f64 = 1e-3;

/// Neumaier compensated accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Uniform grid on `[lo, hi]` including both endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid1D {
    lo: f64,
    hi: f64,
    n_points: usize,
}

impl Grid1D {
    pub fn new(lo: f64, hi: f64, n_points: usize) -> Result<Self> {
        check_probability("Grid1D", lo)?;
        check_probability("Grid1D", hi)?;
        if lo >= hi {
            return Err(domain("Grid1D", format!("lo = {lo} must be < hi = {hi}")));
        }
        if n_points < 2 {
            return Err(domain("Grid1D", "need at least 2 points"));
        }
        Ok(Self { lo, hi, n_points })
    }

    /// `n_points` uniformly spaced points on `[0, 1]`.
    pub fn unit(n_points: usize) -> Result<Self> {
        Self::new(0.0, 1.0, n_points)
    }

    /// The standard accuracy grid, 100001 points on `[0, 1]`.
    pub fn standard() -> Self {
        Self {
            lo: 0.0,
            hi: 1.0,
            n_points: STANDARD_GRID_POINTS,
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.hi
        } else {
            self.lo + (self.hi - self.lo) * (i as f64 / (self.n_points - 1) as f64)
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.point(i))
    }

    pub fn describe(&self) -> String {
        format!("uniform {} points on [{}, {}]", self.n_points, self.lo, self.hi)
    }
}

/// Tensor grid for two-argument kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid2D {
    pub x: Grid1D,
    pub y: Grid1D,
}

impl Grid2D {
    pub fn square(grid: Grid1D) -> Self {
        Self { x: grid, y: grid }
    }

    /// The standard KL accuracy grid, 1001 x 1001 on `[1e-3, 1]^2`.
    pub fn standard_kl() -> Self {
        Self::square(Grid1D {
            lo: STANDARD_KL_EPS,
            hi: 1.0,
            n_points: STANDARD_KL_GRID_POINTS,
        })
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.x.points().flat_map(move |x| self.y.points().map(move |y| (x, y)))
    }

    pub fn describe(&self) -> String {
        format!("x: {}; y: {}", self.x.describe(), self.y.describe())
    }
}

/// Subset of a 2-D grid used for a KL sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum KlRegion {
    /// Every grid point.
    Full,
    /// Points with `|x - y| <= width`.
    DiagonalBand(f64),
}

impl KlRegion {
    fn contains(self, x: f64, y: f64) -> bool {
        match self {
            KlRegion::Full => true,
            KlRegion::DiagonalBand(w) => (x - y).abs() <= w,
        }
    }

    fn describe(self) -> String {
        match self {
            KlRegion::Full => "full grid".into(),
            KlRegion::DiagonalBand(w) => format!("band |x - y| <= {w}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Se,
    Kl,
}

impl std::str::FromStr for Measure {
    type Err = FeaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "se" => Ok(Measure::Se),
            "kl" => Ok(Measure::Kl),
            other => Err(domain("Measure", format!("unknown measure {other:?}"))),
        }
    }
}

impl Measure {
    pub fn as_str(self) -> &'static str {
        match self {
            Measure::Se => "se",
            Measure::Kl => "kl",
        }
    }
}

/// One grid point of an accuracy sweep. `reference` and `approx` are `None`
/// where the kernel is infinite or undefined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointError {
    pub x: f64,
    pub y: Option<f64>,
    pub reference: Option<f64>,
    pub approx: Option<f64>,
}

impl PointError {
    pub fn abs_error(&self) -> Option<f64> {
        Some((self.approx? - self.reference?).abs())
    }
}

/// Mean and maximum absolute difference between two kernel variants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyReport {
    pub measure: Measure,
    pub reference: KernelVariant,
    pub variant: KernelVariant,
    pub mae: f64,
    pub max_abs_error: f64,
    /// Location of the maximum error, `[x]` or `[x, y]`.
    pub argmax_error: Vec<f64>,
    pub n_evaluated: usize,
    /// Grid points dropped because either side was infinite or undefined.
    pub n_excluded: usize,
    pub grid: String,
}

impl AccuracyReport {
    fn collect(
        measure: Measure,
        reference: KernelVariant,
        variant: KernelVariant,
        grid: String,
        points: impl Iterator<Item = PointError>,
    ) -> Self {
        let mut sum = CompensatedSum::default();
        let mut max_err = 0.0f64;
        let mut argmax = Vec::new();
        let mut n = 0usize;
        let mut excluded = 0usize;
        for p in points {
            match p.abs_error() {
                Some(e) => {
                    sum.add(e);
                    n += 1;
                    if e > max_err || argmax.is_empty() {
                        max_err = e;
                        argmax = match p.y {
                            Some(y) => vec![p.x, y],
                            None => vec![p.x],
                        };
                    }
                }
                None => excluded += 1,
            }
        }
        let mae = if n == 0 { f64::NAN } else { sum.value() / n as f64 };
        Self {
            measure,
            reference,
            variant,
            mae,
            max_abs_error: max_err,
            argmax_error: argmax,
            n_evaluated: n,
            n_excluded: excluded,
            grid,
        }
    }
}

/// Pointwise entropy-term values of two variants on a grid.
pub fn se_pointwise<'a>(
    reference: KernelVariant,
    variant: KernelVariant,
    grid: &'a Grid1D,
    coeffs: &'a ApproxCoefficients,
) -> impl Iterator<Item = PointError> + 'a {
    grid.points().map(move |x| PointError {
        x,
        y: None,
        reference: entropy_term(reference, x, coeffs).ok(),
        approx: entropy_term(variant, x, coeffs).ok(),
    })
}

/// Pointwise KL-term values of two variants over a region of a 2-D grid.
pub fn kl_pointwise<'a>(
    reference: KernelVariant,
    variant: KernelVariant,
    grid: &'a Grid2D,
    region: KlRegion,
    coeffs: &'a ApproxCoefficients,
) -> impl Iterator<Item = PointError> + 'a {
    let eval = move |v, x, y| kl_term(v, x, y, coeffs).ok().and_then(KlValue::finite);
    grid.points()
        .filter(move |&(x, y)| region.contains(x, y))
        .map(move |(x, y)| PointError {
            x,
            y: Some(y),
            reference: eval(reference, x, y),
            approx: eval(variant, x, y),
        })
}

/// Entropy-term MAE of `variant` against `reference` on a 1-D grid.
pub fn mae_on_grid(
    reference: KernelVariant,
    variant: KernelVariant,
    grid: &Grid1D,
    coeffs: &ApproxCoefficients,
) -> AccuracyReport {
    AccuracyReport::collect(
        Measure::Se,
        reference,
        variant,
        grid.describe(),
        se_pointwise(reference, variant, grid, coeffs),
    )
}

/// KL-term MAE of `variant` against `reference` over a region of a 2-D grid.
///
/// Points where either side is infinite (exact KL on an axis) or undefined
/// (Mitchell at zero) are counted in `n_excluded`.
pub fn mae_on_grid_2d(
    reference: KernelVariant,
    variant: KernelVariant,
    grid: &Grid2D,
    region: KlRegion,
    coeffs: &ApproxCoefficients,
) -> AccuracyReport {
    AccuracyReport::collect(
        Measure::Kl,
        reference,
        variant,
        format!("{}; {}", grid.describe(), region.describe()),
        kl_pointwise(reference, variant, grid, region, coeffs),
    )
}

// ---------------------------------------------------------------------------
// Bias

/// FEA minus exact entropy of a Bernoulli(p) variable, in the base of `coeffs`.
pub fn bernoulli_bias(p: f64, coeffs: &ApproxCoefficients) -> Result<f64> {
    check_probability("bernoulli_bias", p)?;
    let q = 1.0 - p;
    let fea = entropy_term(KernelVariant::Fea, p, coeffs)? + entropy_term(KernelVariant::Fea, q, coeffs)?;
    let exact = entropy_term(KernelVariant::ExactLog, p, coeffs)? + entropy_term(KernelVariant::ExactLog, q, coeffs)?;
    Ok(fea - exact)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasProfile {
    pub p_grid: Grid1D,
    pub bias: Vec<f64>,
}

impl BiasProfile {
    pub fn compute(grid: Grid1D, coeffs: &ApproxCoefficients) -> Result<Self> {
        let bias = grid.points().map(|p| bernoulli_bias(p, coeffs)).collect::<Result<_>>()?;
        Ok(Self { p_grid: grid, bias })
    }

    /// Largest `|bias|` over grid points in `[lo, hi]`, with its location.
    pub fn max_abs_in(&self, lo: f64, hi: f64) -> (f64, f64) {
        self.p_grid
            .points()
            .zip(&self.bias)
            .filter(|(p, _)| (lo..=hi).contains(p))
            .fold((0.0, f64::NAN), |(m, at), (p, &b)| if b.abs() > m { (b.abs(), p) } else { (m, at) })
    }

    pub fn max_abs(&self) -> (f64, f64) {
        self.max_abs_in(0.0, 1.0)
    }
}

// ---------------------------------------------------------------------------
// Lipschitz constant of the FEA gradient

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzReport {
    pub value: f64,
    pub argmax: f64,
}

/// Supremum of `|h''|` for the FEA entropy term over the grid, from the
/// closed-form second derivative.
pub fn lipschitz_estimate(grid: &Grid1D, coeffs: &ApproxCoefficients) -> LipschitzReport {
    grid.points().fold(
        LipschitzReport {
            value: f64::NEG_INFINITY,
            argmax: f64::NAN,
        },
        |best, x| {
            let v = fea_term_second_derivative(x, coeffs).abs();
            if v > best.value {
                LipschitzReport { value: v, argmax: x }
            } else {
                best
            }
        },
    )
}

// ---------------------------------------------------------------------------
// Two-symbol extremality

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationaryPoint {
    pub location: f64,
    pub gradient: f64,
    pub curvature: f64,
}

fn two_symbol_grad(x: f64, c: &ApproxCoefficients) -> f64 {
    // d/dx [h(x) + h(1 - x)]
    fea_term_grad(x, c).unwrap_or(f64::NAN) - fea_term_grad(1.0 - x, c).unwrap_or(f64::NAN)
}

/// Locates the unique interior stationary point of the two-symbol FEA entropy
/// `h(x) + h(1 - x)` by bisection and checks that it is a maximum.
pub fn two_symbol_stationary_point(coeffs: &ApproxCoefficients) -> Result<StationaryPoint> {
    let scan = Grid1D::unit(10_001)?;
    let mut sign_changes = 0;
    let mut prev = 0.0f64;
    for x in scan.points() {
        let g = two_symbol_grad(x, coeffs);
        if g != 0.0 {
            if prev != 0.0 && g.signum() != prev.signum() {
                sign_changes += 1;
            }
            prev = g;
        }
    }
    if sign_changes != 1 {
        return Err(FeaError::PropertyViolation(format!(
            "two-symbol gradient changes sign {sign_changes} times on [0, 1]"
        )));
    }

    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let g_lo = two_symbol_grad(lo, coeffs);
    let location = loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break mid;
        }
        let g = two_symbol_grad(mid, coeffs);
        if g == 0.0 {
            break mid;
        }
        if g.signum() == g_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    };
    let curvature = fea_term_second_derivative(location, coeffs) + fea_term_second_derivative(1.0 - location, coeffs);
    if curvature >= 0.0 {
        return Err(FeaError::PropertyViolation(format!(
            "two-symbol curvature {curvature} at {location} is not negative"
        )));
    }
    Ok(StationaryPoint {
        location,
        gradient: two_symbol_grad(location, coeffs),
        curvature,
    })
}

// ---------------------------------------------------------------------------
// Convexity of the KL approximation

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvexityProbeConfig {
    /// Points per axis of the interior Hessian grid.
    pub grid_points: usize,
    /// Distance kept from the boundary of `[0, 1]^2`.
    pub margin: f64,
    /// Finite-difference step.
    pub step: f64,
    /// Random segments for the midpoint test.
    pub segments: usize,
    pub seed: u64,
    /// Slack allowed in `f(mid) <= (f(u) + f(v)) / 2 + slack`.
    pub slack: f64,
}

impl Default for ConvexityProbeConfig {
    fn default() -> Self {
        Self {
            grid_points: 201,
            margin: 1e-3,
            step: 1e-4,
            segments: 100_000,
            seed: 0x5eed,
            slack: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityReport {
    pub min_hessian_eigenvalue: f64,
    pub argmin_eigenvalue: (f64, f64),
    pub segments: usize,
    pub midpoint_violations: usize,
    /// Up to ten violating segments as `[ux, uy, vx, vy]`.
    pub violation_examples: Vec<[f64; 4]>,
    /// Largest `f(mid) - (f(u) + f(v)) / 2` seen.
    pub worst_midpoint_gap: f64,
}

impl ConvexityReport {
    pub fn is_convex(&self, eig_tol: f64) -> bool {
        self.midpoint_violations == 0 && self.min_hessian_eigenvalue >= -eig_tol
    }
}

fn min_eig_sym2(a: f64, b: f64, c: f64) -> f64 {
    let mean = 0.5 * (a + c);
    let r = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    mean - r
}

/// Finite-difference Hessian of the FEA KL term at `(x, y)`.
pub fn kl_fea_fd_hessian(x: f64, y: f64, h: f64, coeffs: &ApproxCoefficients) -> Result<[f64; 3]> {
    let f = |u: f64, v: f64| kl_term_fea(u, v, coeffs);
    let f0 = f(x, y)?;
    let fxx = (f(x + h, y)? - 2.0 * f0 + f(x - h, y)?) / (h * h);
    let fyy = (f(x, y + h)? - 2.0 * f0 + f(x, y - h)?) / (h * h);
    let fxy = (f(x + h, y + h)? - f(x + h, y - h)? - f(x - h, y + h)? + f(x - h, y - h)?) / (4.0 * h * h);
    Ok([fxx, fxy, fyy])
}

/// Probes joint convexity of the FEA KL term by finite-difference Hessians on
/// an interior grid and by midpoint tests on random segments in `[0, 1]^2`.
pub fn kl_convexity_probe(cfg: &ConvexityProbeConfig, coeffs: &ApproxCoefficients) -> Result<ConvexityReport> {
    if cfg.margin < cfg.step {
        return Err(domain("kl_convexity_probe", "margin must be at least the step"));
    }
    let grid = Grid1D::new(cfg.margin, 1.0 - cfg.margin, cfg.grid_points)?;
    let mut min_eig = f64::INFINITY;
    let mut argmin = (f64::NAN, f64::NAN);
    for (x, y) in Grid2D::square(grid).points() {
        let [a, b, c] = kl_fea_fd_hessian(x, y, cfg.step, coeffs)?;
        let e = min_eig_sym2(a, b, c);
        if e < min_eig {
            min_eig = e;
            argmin = (x, y);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut violations = 0;
    let mut examples = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..cfg.segments {
        let (ux, uy, vx, vy): (f64, f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen(), rng.gen());
        let mid = kl_term_fea(0.5 * (ux + vx), 0.5 * (uy + vy), coeffs)?;
        let chord = 0.5 * (kl_term_fea(ux, uy, coeffs)? + kl_term_fea(vx, vy, coeffs)?);
        let gap = mid - chord;
        worst = worst.max(gap);
        if gap > cfg.slack {
            violations += 1;
            if examples.len() < 10 {
                examples.push([ux, uy, vx, vy]);
            }
        }
    }
    Ok(ConvexityReport {
        min_hessian_eigenvalue: min_eig,
        argmin_eigenvalue: argmin,
        segments: cfg.segments,
        midpoint_violations: violations,
        violation_examples: examples,
        worst_midpoint_gap: worst,
    })
}

// ---------------------------------------------------------------------------
// Pointwise properties of the KL approximation

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KlPropertyConfig {
    /// Uniform random pairs in `[0, 1]^2`.
    pub random_pairs: usize,
    /// Points per edge, diagonal and near-diagonal offset family.
    pub structured_points: usize,
    pub seed: u64,
    pub symmetry_tol: f64,
    /// A value below this counts as "zero" ...
    pub zero_value_tol: f64,
    /// ... and should occur exactly when `|x - y|` is below this.
    pub zero_gap: f64,
}

impl Default for KlPropertyConfig {
    fn default() -> Self {
        Self {
            random_pairs: 100_000,
            structured_points: 1001,
            seed: 0x6b6c,
            symmetry_tol: 1e-15,
            zero_value_tol: 1e-15,
            zero_gap: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KlPropertyReport {
    pub pairs: usize,
    pub negative_values: usize,
    pub min_value: f64,
    pub max_asymmetry: f64,
    /// `D(x, x) != 0`, or `D(x, y) == 0` with `x != y`.
    pub exact_zero_violations: usize,
    /// Pairs where `value < zero_value_tol` disagrees with `|x - y| < zero_gap`.
    pub zero_threshold_mismatches: usize,
    pub mismatch_examples: Vec<[f64; 2]>,
    pub nonfinite_gradients: usize,
}

impl KlPropertyReport {
    pub fn all_hold(&self, symmetry_tol: f64) -> bool {
        self.negative_values == 0
            && self.max_asymmetry <= symmetry_tol
            && self.exact_zero_violations == 0
            && self.zero_threshold_mismatches == 0
            && self.nonfinite_gradients == 0
    }
}

fn kl_probe_pairs(cfg: &KlPropertyConfig) -> Result<Vec<(f64, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pairs: Vec<(f64, f64)> = (0..cfg.random_pairs).map(|_| (rng.gen(), rng.gen())).collect();
    let grid = Grid1D::unit(cfg.structured_points)?;
    for t in grid.points() {
        pairs.extend([(0.0, t), (1.0, t), (t, 0.0), (t, 1.0), (t, t)]);
        // just inside and just outside the zero band
        for off in [0.1 * cfg.zero_gap, 10.0 * cfg.zero_gap] {
            if t + off <= 1.0 {
                pairs.push((t, t + off));
            }
        }
    }
    Ok(pairs)
}

/// Non-negativity, symmetry, the zero property and gradient finiteness of
/// the FEA KL term on random, boundary and (near-)diagonal pairs.
pub fn kl_property_probe(cfg: &KlPropertyConfig, coeffs: &ApproxCoefficients) -> Result<KlPropertyReport> {
    let pairs = kl_probe_pairs(cfg)?;
    let mut r = KlPropertyReport {
        pairs: pairs.len(),
        negative_values: 0,
        min_value: f64::INFINITY,
        max_asymmetry: 0.0,
        exact_zero_violations: 0,
        zero_threshold_mismatches: 0,
        mismatch_examples: Vec::new(),
        nonfinite_gradients: 0,
    };
    for &(x, y) in &pairs {
        let v = kl_term_fea(x, y, coeffs)?;
        let w = kl_term_fea(y, x, coeffs)?;
        r.min_value = r.min_value.min(v);
        if v < 0.0 {
            r.negative_values += 1;
        }
        r.max_asymmetry = r.max_asymmetry.max((v - w).abs());
        if (x == y) != (v == 0.0) {
            r.exact_zero_violations += 1;
        }
        if (v < cfg.zero_value_tol) != ((x - y).abs() < cfg.zero_gap) {
            r.zero_threshold_mismatches += 1;
            if r.mismatch_examples.len() < 10 {
                r.mismatch_examples.push([x, y]);
            }
        }
        let (gx, gy) = kl_term_fea_grad(x, y, coeffs)?;
        if !(gx.is_finite() && gy.is_finite()) {
            r.nonfinite_gradients += 1;
        }
    }
    Ok(r)
}

// ---------------------------------------------------------------------------
// Concavity of the two-symbol FEA entropy

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcavityReport {
    /// Largest undivided second difference of `p -> h(p) + h(1 - p)`.
    pub max_second_difference: f64,
    pub argmax_second_difference: f64,
    pub min_value: f64,
    pub argmin: f64,
    pub value_at_zero: f64,
    pub value_at_one: f64,
}

impl ConcavityReport {
    pub fn minima_at_endpoints(&self) -> bool {
        self.argmin == 0.0 || self.argmin == 1.0
    }
}

pub fn entropy_concavity_probe(grid: &Grid1D, coeffs: &ApproxCoefficients) -> Result<ConcavityReport> {
    let values: Vec<f64> = grid
        .points()
        .map(|p| {
            Ok(entropy_term(KernelVariant::Fea, p, coeffs)? + entropy_term(KernelVariant::Fea, 1.0 - p, coeffs)?)
        })
        .collect::<Result<_>>()?;
    let mut max_sd = f64::NEG_INFINITY;
    let mut arg_sd = f64::NAN;
    for (i, w) in values.windows(3).enumerate() {
        let sd = w[0] - 2.0 * w[1] + w[2];
        if sd > max_sd {
            max_sd = sd;
            arg_sd = grid.point(i + 1);
        }
    }
    let (argmin_i, &min_value) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid has at least two points");
    Ok(ConcavityReport {
        max_second_difference: max_sd,
        argmax_second_difference: arg_sd,
        min_value,
        argmin: grid.point(argmin_i),
        value_at_zero: values[0],
        value_at_one: values[values.len() - 1],
    })
}

/// Shannon entropy of a Bernoulli(p) variable in nats.
pub fn bernoulli_entropy_exact(p: f64) -> Result<f64> {
    Ok(shannon_term_exact(p)? + shannon_term_exact(1.0 - p)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kl_properties_hold_on_small_probe() {
        let cfg = KlPropertyConfig {
            random_pairs: 2000,
            structured_points: 101,
            ..KlPropertyConfig::default()
        };
        let r = kl_property_probe(&cfg, &c()).unwrap();
        assert_eq!(r.pairs, 2000 + 101 * 5 + 100 * 2);
        assert!(r.all_hold(0.0), "{r:?}");
        assert_eq!(r.min_value, 0.0);
    }

    fn c() -> ApproxCoefficients {
        ApproxCoefficients::default()
    }

    #[test]
    fn grid_includes_endpoints() {
        let g = Grid1D::new(0.2, 0.9, 8).unwrap();
        let pts: Vec<f64> = g.points().collect();
        assert_eq!(pts[0], 0.2);
        assert_eq!(pts[7], 0.9);
        assert!(Grid1D::new(0.5, 0.5, 3).is_err());
        assert!(Grid1D::new(0.0, 1.0, 1).is_err());
        assert!(Grid1D::new(-0.1, 1.0, 3).is_err());
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1.0);
        for _ in 0..10 {
            s.add(1e-17);
        }
        s.add(-1.0);
        assert_relative_eq!(s.value(), 1e-16, max_relative = 1e-12);
    }

    #[test]
    fn self_comparison_is_zero() {
        let g = Grid1D::unit(1001).unwrap();
        for v in KernelVariant::ALL {
            let r = mae_on_grid(v, v, &g, &c());
            assert_eq!(r.mae, 0.0);
            assert_eq!(r.max_abs_error, 0.0);
        }
    }

    #[test]
    fn two_point_grid_averages_endpoints() {
        let g = Grid1D::unit(2).unwrap();
        let r = mae_on_grid(KernelVariant::ExactLog, KernelVariant::Fea, &g, &c());
        let e0 = 0.0206;
        let e1 = 0.004_742_081_747_476_5;
        assert_relative_eq!(r.mae, 0.5 * (e0 + e1), epsilon = 1e-12);
        assert_eq!(r.argmax_error, vec![0.0]);
    }

    #[test]
    fn kl_exclusions_are_counted() {
        let g = Grid2D::square(Grid1D::unit(11).unwrap());
        let r = mae_on_grid_2d(KernelVariant::ExactLog, KernelVariant::Fea, &g, KlRegion::Full, &c());
        // 20 boundary points with exactly one zero coordinate
        assert_eq!(r.n_excluded, 20);
        assert_eq!(r.n_evaluated, 121 - 20);
        let band = mae_on_grid_2d(KernelVariant::ExactLog, KernelVariant::Fea, &g, KlRegion::DiagonalBand(0.1 + 1e-12), &c());
        assert!(band.mae < r.mae);
    }

    #[test]
    fn bias_examples() {
        assert_relative_eq!(bernoulli_bias(0.0, &c()).unwrap(), 0.015_857_918_252_523_5, epsilon = 1e-12);
        assert_relative_eq!(bernoulli_bias(1.0, &c()).unwrap(), 0.015_857_918_252_523_5, epsilon = 1e-12);
        let half = bernoulli_bias(0.5, &c()).unwrap();
        let expected = 2.0 * (crate::kernels::fea_term(0.5, &c()).unwrap() - shannon_term_exact(0.5).unwrap());
        assert_relative_eq!(half, expected, epsilon = 1e-15);
        assert_relative_eq!(half, -0.001_459_2, epsilon = 1e-6);
        assert_relative_eq!(bernoulli_bias(0.2, &c()).unwrap(), bernoulli_bias(0.8, &c()).unwrap(), epsilon = 1e-15);
        assert!(bernoulli_bias(1.5, &c()).is_err());
    }

    #[test]
    fn bias_profile_is_symmetric() {
        let prof = BiasProfile::compute(Grid1D::unit(1001).unwrap(), &c()).unwrap();
        let n = prof.bias.len();
        for i in 0..n {
            assert!((prof.bias[i] - prof.bias[n - 1 - i]).abs() < 1e-12);
        }
    }

    #[test]
    fn lipschitz_closed_form() {
        let r = lipschitz_estimate(&Grid1D::unit(101).unwrap(), &c());
        assert_eq!(r.argmax, 0.0);
        assert_relative_eq!(r.value, 31.706_511_316_552_2, epsilon = 1e-9);
        assert_relative_eq!(fea_term_second_derivative(1.0, &c()).abs(), 1.307_904_107_839_808, epsilon = 1e-12);
        // finite-difference cross-check of the second derivative
        for &x in &[0.001, 0.2, 0.7] {
            let h = 1e-5;
            let fd = (fea_term_grad(x + h, &c()).unwrap() - fea_term_grad(x - h, &c()).unwrap()) / (2.0 * h);
            assert_relative_eq!(fd, fea_term_second_derivative(x, &c()), max_relative = 1e-6);
        }
    }

    #[test]
    fn stationary_point_is_half() {
        let s = two_symbol_stationary_point(&c()).unwrap();
        assert!((s.location - 0.5).abs() <= 1e-9);
        assert!(s.gradient.abs() <= 1e-12);
        assert!(s.curvature < 0.0);
    }

    #[test]
    fn stationary_point_rejects_convex_two_symbol_entropy() {
        let mut flipped = c();
        flipped.se_c = -1.0;
        assert!(matches!(
            two_symbol_stationary_point(&flipped),
            Err(FeaError::PropertyViolation(_))
        ));
    }

    #[test]
    fn kl_edge_second_derivative_is_positive() {
        // f(x, 0) = p x^2 / (q x + q^2 + p); second derivative 2 p (q^2 + p)^2 / (q x + q^2 + p)^3
        let (p, q) = (c().kl_p, c().kl_q);
        for &x in &[0.1, 0.5, 0.9] {
            let den = q * x + q * q + p;
            let closed = 2.0 * p * (q * q + p).powi(2) / den.powi(3);
            assert!(closed > 0.0);
            let h = 1e-4;
            let fd = (kl_term_fea(x + h, 0.0, &c()).unwrap() - 2.0 * kl_term_fea(x, 0.0, &c()).unwrap()
                + kl_term_fea(x - h, 0.0, &c()).unwrap())
                / (h * h);
            assert_relative_eq!(fd, closed, max_relative = 1e-5);
        }
    }

    #[test]
    fn kl_hessian_vanishes_along_diagonal_direction() {
        for &t in &[0.1, 0.4, 0.8] {
            let [a, b, cc] = kl_fea_fd_hessian(t, t, 1e-4, &c()).unwrap();
            // direction (1, 1): a + 2b + c = 0
            assert!((a + 2.0 * b + cc).abs() < 1e-6);
        }
    }

    #[test]
    fn concavity_probe_small_grid() {
        let r = entropy_concavity_probe(&Grid1D::unit(1001).unwrap(), &c()).unwrap();
        assert!(r.max_second_difference <= 1e-10);
        assert!(r.minima_at_endpoints());
        assert_eq!(r.value_at_zero, r.value_at_one);
    }
}
