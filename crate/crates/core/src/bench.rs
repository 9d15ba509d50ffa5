//! Single-threaded microbenchmarks of the slice kernels.
//!
//! Every variant is timed over the same preallocated batch of probabilities
//! drawn from `(1e-6, 1]`. One untimed warmup pass precedes the timed
//! repeats, outputs go to a preallocated buffer, and the buffer is passed
//! through [`black_box`] after each pass so the loop cannot be elided.
//! Speedups are keyed to the median because timing noise is one-sided.

use std::hint::black_box;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::Measure;
use crate::error::{domain, FeaError, Result};
use crate::kernels::fused::{entropy_terms_into, kl_terms_into};
use crate::kernels::{ApproxCoefficients, KernelVariant};

/// Smallest input value; keeps the exact and Mitchell logs finite.
pub const INPUT_FLOOR: f64 = 1e-6;
/// A batch must last at least this many timer ticks.
pub const MIN_TICKS: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub measure: Measure,
    pub batch_size: usize,
    pub repeats: usize,
    pub warmup: usize,
    pub seed: u64,
}

impl BenchConfig {
    pub fn new(measure: Measure, seed: u64) -> Self {
        Self {
            measure,
            batch_size: 1_000_000,
            repeats: 31,
            warmup: 1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(domain("BenchConfig", "batch_size must be >= 1"));
        }
        if self.repeats == 0 {
            return Err(domain("BenchConfig", "repeats must be >= 1"));
        }
        Ok(())
    }
}

/// Per-element timing of one kernel variant.
///
/// `min <= median` always holds; `median <= mean` is typical for timing noise
/// but not enforced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingReport {
    pub measure: Measure,
    pub variant: KernelVariant,
    pub batch_size: usize,
    pub repeats: usize,
    pub ns_per_elem_median: f64,
    pub ns_per_elem_min: f64,
    pub ns_per_elem_mean: f64,
    /// `exact median / this median`.
    pub speedup_vs_exact: f64,
}

/// Smallest nonzero step of the monotonic clock, in nanoseconds.
pub fn timer_resolution_ns() -> f64 {
    let mut best = f64::INFINITY;
    for _ in 0..200 {
        let t0 = Instant::now();
        let mut t1 = Instant::now();
        while t1 == t0 {
            t1 = Instant::now();
        }
        best = best.min((t1 - t0).as_nanos() as f64);
    }
    best.max(1.0)
}

/// Seeded inputs in `(INPUT_FLOOR, 1]`: one slice for entropy, two for KL.
pub fn bench_inputs(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || INPUT_FLOOR + (1.0 - INPUT_FLOOR) * (1.0 - rng.gen::<f64>());
    let xs: Vec<f64> = (0..n).map(|_| draw()).collect();
    let ys: Vec<f64> = (0..n).map(|_| draw()).collect();
    (xs, ys)
}

fn run_once(measure: Measure, variant: KernelVariant, xs: &[f64], ys: &[f64], out: &mut [f64], c: &ApproxCoefficients) {
    match measure {
        Measure::Se => entropy_terms_into(variant, black_box(xs), out, c, false),
        Measure::Kl => kl_terms_into(variant, black_box(xs), black_box(ys), out, c),
    }
    black_box(out);
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Wall-clock nanoseconds of each timed pass.
fn time_variant(cfg: &BenchConfig, variant: KernelVariant, xs: &[f64], ys: &[f64], out: &mut [f64], c: &ApproxCoefficients) -> Vec<f64> {
    for _ in 0..cfg.warmup {
        run_once(cfg.measure, variant, xs, ys, out, c);
    }
    (0..cfg.repeats)
        .map(|_| {
            let t0 = Instant::now();
            run_once(cfg.measure, variant, xs, ys, out, c);
            t0.elapsed().as_nanos() as f64
        })
        .collect()
}

/// Times the exact kernel and every requested variant on one shared batch.
///
/// Fails with [`FeaError::TimerResolution`] when any median batch time is
/// shorter than [`MIN_TICKS`] clock ticks.
pub fn run_bench(cfg: &BenchConfig, variants: &[KernelVariant], coeffs: &ApproxCoefficients) -> Result<Vec<TimingReport>> {
    cfg.validate()?;
    coeffs.validate()?;
    let (xs, ys) = bench_inputs(cfg.batch_size, cfg.seed);
    let mut out = vec![0.0; cfg.batch_size];
    let tick = timer_resolution_ns();

    let mut order = vec![KernelVariant::ExactLog];
    order.extend(variants.iter().copied().filter(|v| *v != KernelVariant::ExactLog));

    let mut timed = Vec::with_capacity(order.len());
    for &variant in &order {
        let mut samples = time_variant(cfg, variant, &xs, &ys, &mut out, coeffs);
        samples.sort_by(f64::total_cmp);
        let med = median(&samples);
        if med / tick < MIN_TICKS {
            return Err(FeaError::TimerResolution { ticks: med / tick });
        }
        let n = cfg.batch_size as f64;
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        log::debug!("bench {} {} median {:.3} ns/elem", cfg.measure.as_str(), variant, med / n);
        timed.push((variant, med / n, samples[0] / n, mean / n));
    }

    let exact_median = timed[0].1;
    Ok(timed
        .into_iter()
        .filter(|(v, ..)| *v != KernelVariant::ExactLog || variants.contains(&KernelVariant::ExactLog))
        .map(|(variant, med, min, mean)| TimingReport {
            measure: cfg.measure,
            variant,
            batch_size: cfg.batch_size,
            repeats: cfg.repeats,
            ns_per_elem_median: med,
            ns_per_elem_min: min,
            ns_per_elem_mean: mean,
            speedup_vs_exact: exact_median / med,
        })
        .collect())
}
