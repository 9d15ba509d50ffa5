use thiserror::Error;

/// Errors produced by kernels, probes, the optimizer and the pipelines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum FeaError {
    /// An argument fell outside the domain of the operation.
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    /// The exact entropy gradient was requested at a point where it diverges.
    #[error("gradient singularity in {op} at x = {x}")]
    Singularity { op: &'static str, x: f64 },

    /// Two inputs that must agree in length did not.
    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    Shape {
        op: &'static str,
        expected: usize,
        got: usize,
    },

    /// A NaN or infinity surfaced where finite values are required.
    #[error("non-finite value in {op}: {detail}")]
    Numeric { op: &'static str, detail: String },

    /// The line search failed to find an acceptable step.
    #[error("line search stagnated after {iterations} iterations (best objective {best_value})")]
    Stagnation {
        iterations: usize,
        best: Vec<f64>,
        best_value: f64,
    },

    /// A mathematical property that was expected to hold did not.
    #[error("property violation: {0}")]
    PropertyViolation(String),

    /// Timer granularity is too coarse for the requested batch.
    #[error("timer resolution too coarse: median batch time is {ticks:.1} ticks (need >= 100); increase the batch size")]
    TimerResolution { ticks: f64 },
}

pub type Result<T> = std::result::Result<T, FeaError>;

pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> FeaError {
    FeaError::Domain {
        op,
        detail: detail.into(),
    }
}

#[inline]
pub(crate) fn check_probability(op: &'static str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(domain(op, format!("{x} is not in [0, 1]")))
    }
}
