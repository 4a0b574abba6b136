//! Spectral-domain testing for long-range dependence in functional time
//! series on the sphere.
//!
//! The crate is organised bottom-up:
//!
//! - [`harmonics`]: Laplace–Beltrami eigenbasis bookkeeping on S² and field
//!   synthesis from harmonic coefficients.
//! - [`models`]: SPHARMA(p, q) spectral models, LRD exponent profiles and
//!   the per-degree spectral eigenvalues `f_n(ω)`.
//! - [`simulate`]: Gaussian simulation of coefficient panels, optionally
//!   multifractionally integrated.
//! - [`spectral`]: functional DFT, Fejér kernel, smoothing weights and the
//!   weighted periodogram.
//! - [`lrdtest`]: the test statistic operator, its null calibration, and
//!   the projected / random-projection tests.
//! - [`harness`]: Monte Carlo experiment drivers (size, power, null
//!   distribution, divergence, bandwidth sweep, consistency).
//! - [`io`]: CSV / JSON import and export.

pub mod error;
pub mod harmonics;
pub mod harness;
pub mod io;
pub mod lrdtest;
pub mod models;
pub mod quadrature;
pub mod rng;
pub mod simulate;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use harmonics::{DegreeRange, HarmonicIndex, SphereGrid};
pub use models::{AlphaProfile, Hypothesis, ModelConfig, SpectralModel};
pub use rng::SeedSpec;
pub use simulate::{CoefficientPanel, FracFilterSpec};
pub use spectral::{DftPanel, Kernel, SmoothingSpec};

/// Library version recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
