//! Spectral-domain estimation: fDFT, Fejér kernel, smoothing weights and
//! the weighted periodogram operator.
//!
//! Conventions: the fDFT of column `a` at Fourier index `s` is
//! `ã_a(ω_s) = (2πT)^{-1/2} Σ_t a(t) e^{-iω_s t}` with `ω_s = 2πs/T`, and the
//! weighted periodogram is
//!
//! ```text
//! f̂_ω[a, b] = (2π/T) Σ_{s=1}^{T-1} W^{(T)}(ω - ω_s) ã_a(ω_s) conj(ã_b(ω_s))
//! ```
//!
//! where `W^{(T)}(x) = B⁻¹ W(x / B)` after reducing `x` to `(-π, π]`. The
//! `s = 0` term is always excluded.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use ndarray::{Array2, ShapeBuilder};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::{DegreeRange, HarmonicIndex};
use crate::quadrature::adaptive_simpson;
use crate::simulate::CoefficientPanel;

const TWO_PI: f64 = 2.0 * PI;

/// Fejér kernel `F_T(ω) = T⁻¹ [sin(Tω/2) / sin(ω/2)]²`, equal to `T` on 2πℤ.
pub fn fejer_kernel(omega: f64, t: usize) -> f64 {
    let tf = t as f64;
    let den = (0.5 * omega).sin();
    if den.abs() < 1e-300 || (reduce_angle(omega)).abs() < 1e-12 / tf {
        return tf;
    }
    let num = (0.5 * tf * omega).sin();
    (num / den).powi(2) / tf
}

/// Reduces an angle to `(-π, π]`.
pub fn reduce_angle(x: f64) -> f64 {
    let mut r = x - TWO_PI * (x / TWO_PI).round();
    if r <= -PI {
        r += TWO_PI;
    } else if r > PI {
        r -= TWO_PI;
    }
    r
}

/// Signed Fourier index of `s mod T` in `(-T/2, T/2]`.
pub fn signed_index(s: i64, t: usize) -> i64 {
    let t = t as i64;
    let r = s.rem_euclid(t);
    if 2 * r > t {
        r - t
    } else {
        r
    }
}

// ---------------------------------------------------------------------------
// Smoothing kernels

/// User-supplied weight function validated on construction.
#[derive(Clone)]
pub struct CustomKernel {
    name: String,
    func: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    l2_sq: f64,
}

impl CustomKernel {
    /// Checks the kernel axioms numerically: nonnegative, even, supported on
    /// `[-1, 1]`, unit mass and finite `∫W²`.
    pub fn new<F>(name: impl Into<String>, func: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let name = name.into();
        let probes: Vec<f64> = (0..=400).map(|i| -1.2 + 2.4 * i as f64 / 400.0).collect();
        for &x in &probes {
            let v = func(x);
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidKernel(format!("{name}: W({x}) = {v}")));
            }
            if (v - func(-x)).abs() > 1e-12 * v.abs().max(1.0) {
                return Err(Error::InvalidKernel(format!("{name}: not even at {x}")));
            }
            if x.abs() >= 1.0 && v != 0.0 {
                return Err(Error::InvalidKernel(format!(
                    "{name}: nonzero outside (-1, 1) at {x}"
                )));
            }
        }
        let mass = adaptive_simpson(&|x| func(x), -1.0, 1.0, 1e-12);
        if (mass - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidKernel(format!(
                "{name}: ∫W = {mass}, expected 1"
            )));
        }
        let l2_sq = adaptive_simpson(&|x| func(x).powi(2), -1.0, 1.0, 1e-12);
        Ok(Self {
            name,
            func: Arc::new(func),
            l2_sq,
        })
    }
}

impl fmt::Debug for CustomKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomKernel")
            .field("name", &self.name)
            .field("l2_sq", &self.l2_sq)
            .finish()
    }
}

impl PartialEq for CustomKernel {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.func, &other.func)
    }
}

/// Weight function `W`, compactly supported on `[-1, 1]` with unit mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// `0.75 (1 - x²)`.
    #[default]
    Epanechnikov,
    /// `1 - |x|`.
    Triangular,
    /// `(15/16)(1 - x²)²`.
    Quartic,
    #[serde(skip)]
    Custom(CustomKernel),
}

impl Kernel {
    pub fn value(&self, x: f64) -> f64 {
        if x.abs() >= 1.0 {
            return 0.0;
        }
        match self {
            Kernel::Epanechnikov => 0.75 * (1.0 - x * x),
            Kernel::Triangular => 1.0 - x.abs(),
            Kernel::Quartic => 0.9375 * (1.0 - x * x).powi(2),
            Kernel::Custom(k) => (k.func)(x),
        }
    }

    /// `∫_{-1}^{x} W(u) du`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= -1.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        match self {
            Kernel::Epanechnikov => 0.5 + 0.75 * (x - x.powi(3) / 3.0),
            Kernel::Triangular => {
                if x <= 0.0 {
                    0.5 * (1.0 + x).powi(2)
                } else {
                    1.0 - 0.5 * (1.0 - x).powi(2)
                }
            }
            Kernel::Quartic => 0.5 + 0.9375 * (x - 2.0 * x.powi(3) / 3.0 + x.powi(5) / 5.0),
            Kernel::Custom(k) => adaptive_simpson(&|u| (k.func)(u), -1.0, x, 1e-12),
        }
    }

    /// `∫ W(x)² dx`.
    pub fn l2_sq(&self) -> f64 {
        match self {
            Kernel::Epanechnikov => 0.6,
            Kernel::Triangular => 2.0 / 3.0,
            Kernel::Quartic => 5.0 / 7.0,
            Kernel::Custom(k) => k.l2_sq,
        }
    }
}

/// Epanechnikov weight `W(x)`.
pub fn weight_value(x: f64) -> f64 {
    Kernel::Epanechnikov.value(x)
}

/// `∫W²` of the Epanechnikov weight (3/5).
pub fn weight_l2_sq() -> f64 {
    Kernel::Epanechnikov.l2_sq()
}

/// Bandwidth `B_T` and weight function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingSpec {
    pub bandwidth: f64,
    #[serde(default)]
    pub kernel: Kernel,
}

impl SmoothingSpec {
    pub fn new(bandwidth: f64, kernel: Kernel) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth < 1.0) {
            return Err(Error::Config(format!(
                "bandwidth must lie in (0, 1), got {bandwidth}"
            )));
        }
        Ok(Self { bandwidth, kernel })
    }

    pub fn epanechnikov(bandwidth: f64) -> Result<Self> {
        Self::new(bandwidth, Kernel::Epanechnikov)
    }

    /// `W^{(T)}(x)`; 2π-periodic.
    pub fn periodized_weight(&self, x: f64) -> f64 {
        let r = reduce_angle(x);
        self.kernel.value(r / self.bandwidth) / self.bandwidth
    }

    /// `W^{(T)}(2πk/T)`, reducing `k` exactly modulo `T`.
    pub fn grid_weight(&self, k: i64, t: usize) -> f64 {
        let k = signed_index(k, t);
        self.kernel
            .value(TWO_PI * k as f64 / t as f64 / self.bandwidth)
            / self.bandwidth
    }

    /// Largest `|k|` with possibly nonzero `W^{(T)}(2πk/T)`.
    pub fn grid_half_width(&self, t: usize) -> i64 {
        ((self.bandwidth * t as f64 / TWO_PI).ceil() as i64).min(t as i64 / 2)
    }
}

/// Free-function form of [`SmoothingSpec::periodized_weight`].
pub fn periodized_weight(x: f64, spec: &SmoothingSpec) -> f64 {
    spec.periodized_weight(x)
}

// ---------------------------------------------------------------------------
// fDFT

/// Complex `T × D` matrix of fDFT coefficients (column-major).
#[derive(Debug, Clone, PartialEq)]
pub struct DftPanel {
    degrees: DegreeRange,
    coeffs: Array2<Complex64>,
}

impl DftPanel {
    pub fn len(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.nrows() == 0
    }

    pub fn degrees(&self) -> DegreeRange {
        self.degrees
    }

    pub fn coeffs(&self) -> &Array2<Complex64> {
        &self.coeffs
    }

    /// `ã_col(ω_s)` for any integer `s` (reduced modulo T).
    pub fn at(&self, s: i64, col: usize) -> Complex64 {
        let t = self.len() as i64;
        self.coeffs[[s.rem_euclid(t) as usize, col]]
    }

    /// Periodogram cross-product `ã_a(ω_s) conj(ã_b(ω_s))`.
    pub fn cross(&self, s: i64, a: usize, b: usize) -> Complex64 {
        self.at(s, a) * self.at(s, b).conj()
    }
}

/// fDFT of every column by FFT.
pub fn fdft_panel(panel: &CoefficientPanel) -> Result<DftPanel> {
    let t = panel.len();
    if t < 2 {
        return Err(Error::Config(format!("fDFT needs T >= 2, got {t}")));
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(t);
    let norm = 1.0 / (2.0 * PI * t as f64).sqrt();
    let d = panel.degrees().dim();
    let columns: Vec<Vec<Complex64>> = (0..d)
        .into_par_iter()
        .map(|c| {
            let mut buf: Vec<Complex64> = panel
                .column(c)
                .iter()
                .map(|v| Complex64::new(*v, 0.0))
                .collect();
            fft.process(&mut buf);
            buf.iter_mut().for_each(|z| *z *= norm);
            buf
        })
        .collect();
    let flat: Vec<Complex64> = columns.into_iter().flatten().collect();
    let coeffs = Array2::from_shape_vec((t, d).f(), flat).expect("shape matches");
    Ok(DftPanel {
        degrees: panel.degrees(),
        coeffs,
    })
}

/// fDFT by the direct O(T²) sum; reference implementation.
pub fn fdft_panel_direct(panel: &CoefficientPanel) -> Result<DftPanel> {
    let t = panel.len();
    if t < 2 {
        return Err(Error::Config(format!("fDFT needs T >= 2, got {t}")));
    }
    let d = panel.degrees().dim();
    let norm = 1.0 / (2.0 * PI * t as f64).sqrt();
    let mut coeffs = Array2::zeros((t, d).f());
    for c in 0..d {
        let col = panel.column(c);
        for s in 0..t {
            let mut acc = Complex64::new(0.0, 0.0);
            for (u, v) in col.iter().enumerate() {
                // exact phase reduction keeps large T accurate
                let k = (s * u) % t;
                acc += Complex64::from_polar(*v, -TWO_PI * k as f64 / t as f64);
            }
            coeffs[[s, c]] = acc * norm;
        }
    }
    Ok(DftPanel {
        degrees: panel.degrees(),
        coeffs,
    })
}

// ---------------------------------------------------------------------------
// Weighted periodogram

/// `f̂_ω[a, b]` at an arbitrary frequency ω ∈ [-π, π].
pub fn smoothed_cross_spectrum(
    dft: &DftPanel,
    a: HarmonicIndex,
    b: HarmonicIndex,
    omega: f64,
    spec: &SmoothingSpec,
) -> Result<Complex64> {
    let degrees = dft.degrees();
    let (ca, cb) = (degrees.column(a)?, degrees.column(b)?);
    let t = dft.len();
    let step = TWO_PI / t as f64;
    // only s with |ω - ω_s| < B (mod 2π) contribute
    let centre = (omega / step).round() as i64;
    let half = spec.grid_half_width(t) + 1;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut seen = std::collections::BTreeSet::new();
    for k in (centre - half)..=(centre + half) {
        let s = k.rem_euclid(t as i64);
        if s == 0 || !seen.insert(s) {
            continue;
        }
        let w = spec.periodized_weight(omega - step * s as f64);
        if w != 0.0 {
            acc += dft.cross(s, ca, cb) * w;
        }
    }
    Ok(acc * step)
}

/// Smoothed spectrum `f̂_{ω_r}[a, b]` at every Fourier frequency
/// `r = 0..T-1`, as a circular convolution evaluated by FFT.
pub fn smoothed_spectrum_grid(
    dft: &DftPanel,
    a: usize,
    b: usize,
    spec: &SmoothingSpec,
) -> Vec<Complex64> {
    let t = dft.len();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(t);
    let inv = planner.plan_fft_inverse(t);
    let mut kernel: Vec<Complex64> = (0..t)
        .map(|k| Complex64::new(spec.grid_weight(k as i64, t), 0.0))
        .collect();
    fwd.process(&mut kernel);
    grid_smooth_with(dft, a, b, &kernel, fwd.as_ref(), inv.as_ref())
}

/// Reusable FFT plan and kernel transform for [`smoothed_spectrum_grid`].
pub struct GridSmoother {
    t: usize,
    fwd: Arc<dyn rustfft::Fft<f64>>,
    inv: Arc<dyn rustfft::Fft<f64>>,
    kernel_hat: Vec<Complex64>,
}

impl GridSmoother {
    pub fn new(t: usize, spec: &SmoothingSpec) -> Self {
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(t);
        let inv = planner.plan_fft_inverse(t);
        let mut kernel_hat: Vec<Complex64> = (0..t)
            .map(|k| Complex64::new(spec.grid_weight(k as i64, t), 0.0))
            .collect();
        fwd.process(&mut kernel_hat);
        Self {
            t,
            fwd,
            inv,
            kernel_hat,
        }
    }

    pub fn smooth(&self, dft: &DftPanel, a: usize, b: usize) -> Vec<Complex64> {
        assert_eq!(dft.len(), self.t, "smoother planned for a different T");
        grid_smooth_with(
            dft,
            a,
            b,
            &self.kernel_hat,
            self.fwd.as_ref(),
            self.inv.as_ref(),
        )
    }
}

fn grid_smooth_with(
    dft: &DftPanel,
    a: usize,
    b: usize,
    kernel_hat: &[Complex64],
    fwd: &dyn rustfft::Fft<f64>,
    inv: &dyn rustfft::Fft<f64>,
) -> Vec<Complex64> {
    let t = dft.len();
    let mut buf: Vec<Complex64> = (0..t as i64)
        .map(|s| {
            if s == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                dft.cross(s, a, b)
            }
        })
        .collect();
    fwd.process(&mut buf);
    for (x, k) in buf.iter_mut().zip(kernel_hat) {
        *x *= k;
    }
    inv.process(&mut buf);
    // (2π/T) from the smoother and 1/T from the unnormalised inverse FFT
    let scale = TWO_PI / (t as f64 * t as f64);
    buf.iter_mut().for_each(|z| *z *= scale);
    buf
}

/// `(2π/T) Σ_{r=1}^{T-1} f̂_{ω_r}[a, b]`.
pub fn integrated_weighted_periodogram(
    dft: &DftPanel,
    a: HarmonicIndex,
    b: HarmonicIndex,
    spec: &SmoothingSpec,
) -> Result<Complex64> {
    let degrees = dft.degrees();
    let (ca, cb) = (degrees.column(a)?, degrees.column(b)?);
    let t = dft.len();
    let step = TWO_PI / t as f64;
    let half = spec.grid_half_width(t);
    // Σ_r W(ω_r - ω_s) over r = 1..T-1 equals the full circular sum minus r = 0.
    let full: f64 = (-half..=half).map(|k| spec.grid_weight(k, t)).sum();
    let mut acc = Complex64::new(0.0, 0.0);
    for s in 1..t as i64 {
        let w = full - spec.grid_weight(-s, t);
        acc += dft.cross(s, ca, cb) * w;
    }
    Ok(acc * step * step)
}

/// One row of a spectrum export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub omega: f64,
    pub a: HarmonicIndex,
    pub b: HarmonicIndex,
    pub value: Complex64,
}

/// Evaluates `f̂` for all requested pairs over a frequency list.
pub fn spectrum_table(
    dft: &DftPanel,
    pairs: &[(HarmonicIndex, HarmonicIndex)],
    omegas: &[f64],
    spec: &SmoothingSpec,
) -> Result<Vec<SpectrumRow>> {
    let mut rows = Vec::with_capacity(pairs.len() * omegas.len());
    for &(a, b) in pairs {
        for &omega in omegas {
            rows.push(SpectrumRow {
                omega,
                a,
                b,
                value: smoothed_cross_spectrum(dft, a, b, omega, spec)?,
            });
        }
    }
    Ok(rows)
}
