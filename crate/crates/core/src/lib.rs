//! Fast rational approximations of Shannon entropy and symmetrized KL
//! divergence, together with the tooling needed to measure them.
//!
//! - [`kernels`]: exact, rational (FEA) and Mitchell-log entropy and KL terms
//!   with gradients.
//! - [`analysis`]: accuracy sweeps, bias profiles and shape-property probes.
//! - [`spg`]: spectral projected gradient over the simplex or a box.
//! - [`featsel`]: synthetic sparse-regression benchmark, entropic feature
//!   selection driven by SPG, and a coordinate-descent LASSO baseline.
//! - [`bench`]: single-threaded microbenchmarks of the slice kernels.
//! - [`cli`]: the `fea` command-line subcommands.
//!
//! ```
//! use fea::kernels::{entropy, ApproxCoefficients, KernelVariant, ProbVector};
//!
//! let c = ApproxCoefficients::default();
//! let p = ProbVector::new(vec![0.25, 0.25, 0.5]).unwrap();
//! let exact = entropy(&p, KernelVariant::ExactLog, &c).unwrap();
//! let approx = entropy(&p, KernelVariant::Fea, &c).unwrap();
//! assert!((exact - approx).abs() < 0.01);
//! ```

pub mod analysis;
pub mod bench;
pub mod cli;
pub mod error;
pub mod featsel;
pub mod kernels;
pub mod spg;

pub use error::{FeaError, Result};
