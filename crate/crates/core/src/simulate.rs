//! Gaussian simulation of SPHARMA coefficient panels.
//!
//! Each coefficient `a_{n,j}(t)` is an independent scalar ARMA(p, q) series
//! driven by `N(0, λ_n(R₀^η))` innovations, started from zero and warmed up
//! for `burn_in` steps. When α(n) > 0 the ARMA output is passed through the
//! truncated fractional integration filter `(1 - B)^{-α(n)}`.

use std::sync::Arc;

use ndarray::{Array2, ArrayView1, ShapeBuilder};
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::{DegreeRange, HarmonicIndex};
use crate::models::SpectralModel;
use crate::rng::{Domain, SeedSpec};

/// Truncation and warm-up of the fractional filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FracFilterSpec {
    /// Number of MA(∞) weights kept beyond ψ₀.
    pub truncation: usize,
    /// Steps discarded before the pre-sample.
    pub burn_in: usize,
}

impl Default for FracFilterSpec {
    fn default() -> Self {
        Self {
            truncation: 2000,
            burn_in: 1000,
        }
    }
}

impl FracFilterSpec {
    pub fn validate(&self) -> Result<()> {
        if self.truncation == 0 {
            return Err(Error::Config(
                "fractional filter truncation must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Real `T × D` matrix of harmonic coefficients, columns ordered by
/// `(n, j)` ascending. Stored column-major so each series is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientPanel {
    degrees: DegreeRange,
    data: Array2<f64>,
}

impl CoefficientPanel {
    pub fn new(degrees: DegreeRange, data: Array2<f64>) -> Result<Self> {
        if data.ncols() != degrees.dim() {
            return Err(Error::LengthMismatch {
                expected: degrees.dim(),
                got: data.ncols(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse("panel contains non-finite values".into()));
        }
        Ok(Self { degrees, data })
    }

    /// Builds a panel from one series per column (all of length T).
    pub fn from_columns(degrees: DegreeRange, columns: Vec<Vec<f64>>) -> Result<Self> {
        if columns.len() != degrees.dim() {
            return Err(Error::LengthMismatch {
                expected: degrees.dim(),
                got: columns.len(),
            });
        }
        let t = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != t) {
            return Err(Error::Config("panel columns differ in length".into()));
        }
        let flat: Vec<f64> = columns.into_iter().flatten().collect();
        let data = Array2::from_shape_vec((t, degrees.dim()).f(), flat)
            .map_err(|e| Error::Config(e.to_string()))?;
        Self::new(degrees, data)
    }

    pub fn zeros(degrees: DegreeRange, t: usize) -> Self {
        Self {
            degrees,
            data: Array2::zeros((t, degrees.dim()).f()),
        }
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn degrees(&self) -> DegreeRange {
        self.degrees
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn column(&self, col: usize) -> ArrayView1<'_, f64> {
        self.data.column(col)
    }

    pub fn series(&self, idx: HarmonicIndex) -> Result<ArrayView1<'_, f64>> {
        Ok(self.data.column(self.degrees.column(idx)?))
    }

    /// Coefficient vector at time `t` (one spatial snapshot).
    pub fn snapshot(&self, t: usize) -> Vec<f64> {
        self.data.row(t).to_vec()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            degrees: self.degrees,
            data: &self.data * factor,
        }
    }
}

/// MA(∞) weights of `(1 - B)^{-α}` truncated at lag `k`:
/// `ψ₀ = 1`, `ψ_k = ψ_{k-1} (k - 1 + α) / k`.
pub fn fractional_weights(alpha: f64, k: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(k + 1);
    w.push(1.0);
    for i in 1..=k {
        let prev = w[i - 1];
        w.push(prev * (i as f64 - 1.0 + alpha) / i as f64);
    }
    w
}

/// FFT convolution with a fixed filter, shared by all orders of a degree.
struct FracConvolver {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    filter_hat: Vec<Complex64>,
}

impl FracConvolver {
    fn new(weights: &[f64], len: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let mut filter_hat = vec![Complex64::new(0.0, 0.0); len];
        for (slot, w) in filter_hat.iter_mut().zip(weights) {
            slot.re = *w;
        }
        forward.process(&mut filter_hat);
        Self {
            len,
            forward,
            inverse,
            filter_hat,
        }
    }

    /// Circular convolution of `x` (length `self.len`) with the filter.
    /// Entries with index >= filter length - 1 equal the linear convolution.
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex64> = x.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        buf.resize(self.len, Complex64::new(0.0, 0.0));
        self.forward.process(&mut buf);
        for (b, h) in buf.iter_mut().zip(&self.filter_hat) {
            *b *= h;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.len as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }
}

/// Simulates a `T`-long panel from `model`. Degrees with α(n) > 0 are
/// passed through `(1 - B)^{-α(n)/2}`, giving the spectral factor
/// `|1 - e^{-iω}|^{-α(n)}`.
pub fn simulate_panel(
    model: &SpectralModel,
    t: usize,
    seed: SeedSpec,
    frac: FracFilterSpec,
) -> Result<CoefficientPanel> {
    if t < 2 {
        return Err(Error::Config(format!("sample length T={t} must be >= 2")));
    }
    frac.validate()?;
    let degrees = model.degrees();
    let convolvers: Vec<Option<FracConvolver>> = degrees
        .degrees()
        .map(|n| {
            let a = model.alpha(n);
            (a > 0.0).then(|| {
                let len = frac.burn_in + frac.truncation + t;
                FracConvolver::new(&fractional_weights(0.5 * a, frac.truncation), len)
            })
        })
        .collect();
    let indices: Vec<HarmonicIndex> = degrees.indices().collect();
    let columns: Vec<Vec<f64>> = indices
        .par_iter()
        .map(|idx| {
            let conv = convolvers[idx.n - degrees.n_min].as_ref();
            simulate_column(model, *idx, t, seed, frac, conv)
        })
        .collect();
    CoefficientPanel::from_columns(degrees, columns)
}

fn simulate_column(
    model: &SpectralModel,
    idx: HarmonicIndex,
    t: usize,
    seed: SeedSpec,
    frac: FracFilterSpec,
    conv: Option<&FracConvolver>,
) -> Vec<f64> {
    let lead = if conv.is_some() { frac.truncation } else { 0 };
    let total = frac.burn_in + lead + t;
    let sd = model.innovation(idx.n).sqrt();
    let phi = model.phi(idx.n);
    let psi = model.psi(idx.n);
    let mut rng = seed.substream(Domain::Innovation, idx.n as u32, idx.j as u32);
    let eps: Vec<f64> = (0..total)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sd * z
        })
        .collect();
    let mut arma = vec![0.0; total];
    for s in 0..total {
        let mut v = eps[s];
        for (i, c) in phi.iter().enumerate() {
            if s > i {
                v += c * arma[s - i - 1];
            }
        }
        for (l, c) in psi.iter().enumerate() {
            if s > l {
                v += c * eps[s - l - 1];
            }
        }
        arma[s] = v;
    }
    match conv {
        None => arma.split_off(total - t),
        Some(c) => {
            let mut out = c.apply(&arma);
            out.truncate(total);
            out.split_off(total - t)
        }
    }
}
