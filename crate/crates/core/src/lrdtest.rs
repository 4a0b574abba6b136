//! The LRD test: statistic operator `S_{B_T}`, its null calibration,
//! standardized projections and random-projection tests.
//!
//! With window `|ω| <= √B_T / 2` the statistic entry for a pair of basis
//! elements is
//!
//! ```text
//! S[a, b] = √(B_T T) · B_T^{-1/2} · (2π/T) Σ_{ω_r in window} f̂_{ω_r}[a, b]
//!         = Σ_{s=1}^{T-1} w_s ã_a(ω_s) conj(ã_b(ω_s))
//! ```
//!
//! where `w_s = √T (2π/T)² Σ_{r in window} W^{(T)}(ω_r - ω_s)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use ndarray::Array2;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::{DegreeRange, HarmonicIndex};
use crate::models::{Hypothesis, SpectralModel};
use crate::quadrature::midpoint;
use crate::rng::{Domain, SeedSpec};
use crate::spectral::{DftPanel, Kernel, SmoothingSpec};
use crate::stats::{normal_quantile, two_sided_p, upper_p};

const TWO_PI: f64 = 2.0 * PI;

/// Bandwidth `B_T`, either `T^{-β}` or fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    Beta(f64),
    Fixed(f64),
}

impl BandwidthRule {
    pub fn bandwidth(&self, t: usize) -> Result<f64> {
        bandwidth(t, *self)
    }

    /// β, or `-ln B / ln T` for a fixed bandwidth.
    pub fn beta(&self, t: usize) -> f64 {
        match *self {
            BandwidthRule::Beta(b) => b,
            BandwidthRule::Fixed(b) => -b.ln() / (t as f64).ln(),
        }
    }
}

/// `B_T` under `rule`, rejecting `B_T >= 1` and `B_T T <= 1`.
pub fn bandwidth(t: usize, rule: BandwidthRule) -> Result<f64> {
    if t < 2 {
        return Err(Error::Config(format!("bandwidth needs T >= 2, got {t}")));
    }
    let b = match rule {
        BandwidthRule::Beta(beta) => {
            if !(beta > 0.0 && beta < 1.0) {
                return Err(Error::Config(format!("β must lie in (0, 1), got {beta}")));
            }
            (t as f64).powf(-beta)
        }
        BandwidthRule::Fixed(b) => b,
    };
    if !(b > 0.0 && b < 1.0) || b * t as f64 <= 1.0 {
        return Err(Error::DegenerateBandwidth { bandwidth: b, t });
    }
    Ok(b)
}

/// Half-width `√B_T / 2` of the integration window.
pub fn window_half_width(b: f64) -> f64 {
    0.5 * b.sqrt()
}

/// Signed Fourier indices `r` with `|2πr/T| <= √B_T/2`.
pub fn window_indices(t: usize, b: f64) -> Result<Vec<i64>> {
    let w = window_half_width(b);
    // ties are included; the slack only absorbs rounding in 2πr/T
    let r_max = (w * t as f64 / TWO_PI * (1.0 + 1e-12)).floor() as i64;
    let r_max = r_max.min((t as i64 - 1) / 2);
    if r_max < 1 {
        return Err(Error::EmptyWindow { half_width: w, t });
    }
    Ok((-r_max..=r_max).collect())
}

/// Nonzero weights `w_s` of the statistic as a quadratic form in the fDFT.
#[derive(Debug, Clone, PartialEq)]
pub struct StatisticWeights {
    t: usize,
    bandwidth: f64,
    weights: Vec<(usize, f64)>,
}

impl StatisticWeights {
    pub fn new(t: usize, smoothing: &SmoothingSpec) -> Result<Self> {
        let b = smoothing.bandwidth;
        if b * t as f64 <= 1.0 {
            return Err(Error::DegenerateBandwidth { bandwidth: b, t });
        }
        let window = window_indices(t, b)?;
        let step = TWO_PI / t as f64;
        let scale = (t as f64).sqrt() * step * step;
        let half = smoothing.grid_half_width(t);
        let r_max = *window.last().expect("window is nonempty");
        let reach = (r_max + half).min(t as i64 - 1);
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for s in -reach..=reach {
            let s_mod = s.rem_euclid(t as i64) as usize;
            if s_mod == 0 {
                continue;
            }
            let w: f64 = window
                .iter()
                .map(|&r| smoothing.grid_weight(r - s, t))
                .sum();
            if w != 0.0 {
                *acc.entry(s_mod).or_insert(0.0) += w;
            }
        }
        // reach may wrap when the window covers most of the circle
        let mut weights: Vec<(usize, f64)> = acc.into_iter().collect();
        if 2 * reach + 1 > t as i64 {
            weights = (1..t)
                .map(|s| {
                    let w: f64 = window
                        .iter()
                        .map(|&r| smoothing.grid_weight(r - s as i64, t))
                        .sum();
                    (s, w)
                })
                .filter(|(_, w)| *w != 0.0)
                .collect();
        }
        for (_, w) in &mut weights {
            *w *= scale;
        }
        Ok(Self {
            t,
            bandwidth: b,
            weights,
        })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn weights(&self) -> &[(usize, f64)] {
        &self.weights
    }

    /// `S[a, b]` from column indices.
    pub fn entry(&self, dft: &DftPanel, a: usize, b: usize) -> Complex64 {
        debug_assert_eq!(dft.len(), self.t);
        let coeffs = dft.coeffs();
        let mut acc = Complex64::new(0.0, 0.0);
        for &(s, w) in &self.weights {
            acc += coeffs[[s, a]] * coeffs[[s, b]].conj() * w;
        }
        acc
    }
}

/// `S_{B_T}[a, b]` with the Epanechnikov weight.
pub fn statistic_coefficient(
    dft: &DftPanel,
    a: HarmonicIndex,
    b: HarmonicIndex,
    bandwidth: f64,
) -> Result<Complex64> {
    let weights = StatisticWeights::new(dft.len(), &SmoothingSpec::epanechnikov(bandwidth)?)?;
    let degrees = dft.degrees();
    Ok(weights.entry(dft, degrees.column(a)?, degrees.column(b)?))
}

/// All entries `S[(n,j),(h,l)]` with `n, h` in `degrees`.
#[derive(Debug, Clone, PartialEq)]
pub struct StatisticCoeffs {
    degrees: DegreeRange,
    t: usize,
    bandwidth: f64,
    matrix: Array2<Complex64>,
}

impl StatisticCoeffs {
    /// Evaluates the full matrix over `degrees` (which must lie inside the
    /// panel's range).
    pub fn compute(
        dft: &DftPanel,
        weights: &StatisticWeights,
        degrees: DegreeRange,
    ) -> Result<Self> {
        let panel_degrees = dft.degrees();
        if degrees.n_min < panel_degrees.n_min || degrees.n_max > panel_degrees.n_max {
            return Err(Error::InvalidDegreeRange(format!(
                "{degrees:?} is not inside the panel range {panel_degrees:?}"
            )));
        }
        let cols: Vec<usize> = degrees
            .indices()
            .map(|i| panel_degrees.column(i))
            .collect::<Result<_>>()?;
        let d = cols.len();
        let coeffs = dft.coeffs();
        // (w_s, ã(ω_s)) restricted to the selected columns
        let rows: Vec<(f64, Vec<Complex64>)> = weights
            .weights
            .iter()
            .map(|&(s, w)| (w, cols.iter().map(|&c| coeffs[[s, c]]).collect()))
            .collect();
        let mut matrix = Array2::<Complex64>::zeros((d, d));
        for (w, x) in &rows {
            for a in 0..d {
                let xa = x[a] * *w;
                for b in a..d {
                    matrix[[a, b]] += xa * x[b].conj();
                }
            }
        }
        for a in 0..d {
            matrix[[a, a]].im = 0.0;
            for b in 0..a {
                matrix[[a, b]] = matrix[[b, a]].conj();
            }
        }
        Ok(Self {
            degrees,
            t: weights.t,
            bandwidth: weights.bandwidth,
            matrix,
        })
    }

    pub fn degrees(&self) -> DegreeRange {
        self.degrees
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.matrix
    }

    pub fn get(&self, a: HarmonicIndex, b: HarmonicIndex) -> Result<Complex64> {
        Ok(self.matrix[[self.degrees.column(a)?, self.degrees.column(b)?]])
    }
}

/// `sqrt Σ |S[(n,j),(h,l)]|²` over all pairs with `n, h <= n_max`.
pub fn projected_hs_norm(coeffs: &StatisticCoeffs, n_max: usize) -> f64 {
    let d = coeffs
        .degrees
        .indices()
        .take_while(|i| i.n <= n_max)
        .count();
    let m = &coeffs.matrix;
    let mut acc = 0.0;
    for a in 0..d {
        for b in 0..d {
            acc += m[[a, b]].norm_sqr();
        }
    }
    acc.sqrt()
}

/// HS norm restricted to the same-degree blocks `n = h`.
pub fn projected_hs_norm_diagonal_blocks(coeffs: &StatisticCoeffs, n_max: usize) -> f64 {
    let degrees = coeffs.degrees;
    let m = &coeffs.matrix;
    let mut acc = 0.0;
    for n in degrees.degrees().filter(|n| *n <= n_max) {
        let off = degrees.offset(n);
        for a in off..off + 2 * n + 1 {
            for b in off..off + 2 * n + 1 {
                acc += m[[a, b]].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

// ---------------------------------------------------------------------------
// Null calibration

/// Mean and variance of one statistic entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullMoments {
    pub mean: f64,
    pub variance: f64,
}

/// Which spectrum the calibration integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMode {
    /// The model must have α ≡ 0.
    #[default]
    Null,
    /// The SPHARMA factor of the model (α set to zero).
    SrdPart,
    /// The full LRD spectrum; used for analytic divergence diagnostics.
    Alternative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    pub nodes: usize,
    pub mode: CalibrationMode,
    #[serde(default)]
    pub mean: MeanMethod,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            nodes: 256,
            mode: CalibrationMode::Null,
            mean: MeanMethod::Exact,
        }
    }
}

/// How the diagonal mean is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MeanMethod {
    /// `Σ_s w_s E|ã(ω_s)|²` at the sample length, from the model
    /// autocovariances. Falls back to quadrature for unbounded spectra.
    #[default]
    Exact,
    /// `√T ∫ f(α) G(α)/B dα` over the continuous window.
    Quadrature,
}

/// Per-degree null moments for one `(T, B_T, W)`; shared read-only across
/// replications.
#[derive(Debug, Clone, PartialEq)]
pub struct NullCalibration {
    degrees: DegreeRange,
    t: usize,
    bandwidth: f64,
    mean: Vec<f64>,
    var_diag: Vec<f64>,
    var_cross: Array2<f64>,
}

impl NullCalibration {
    pub fn new(
        model: &SpectralModel,
        t: usize,
        smoothing: &SmoothingSpec,
        options: CalibrationOptions,
    ) -> Result<Self> {
        let b = smoothing.bandwidth;
        if b * t as f64 <= 1.0 {
            return Err(Error::DegenerateBandwidth { bandwidth: b, t });
        }
        if options.nodes == 0 {
            return Err(Error::Config("calibration needs at least one node".into()));
        }
        let (model, hyp) = match options.mode {
            CalibrationMode::Null => {
                if !model.is_null() {
                    return Err(Error::CalibrationUnderAlternative);
                }
                (model.clone(), Hypothesis::Null)
            }
            CalibrationMode::SrdPart => (model.srd_part(), Hypothesis::Null),
            CalibrationMode::Alternative => (model.clone(), Hypothesis::Alternative),
        };
        let degrees = model.degrees();
        let w = window_half_width(b);
        let (nodes, h) = midpoint(-w - b, w + b, options.nodes);
        // G(α)/B = K((w-α)/B) - K((-w-α)/B)
        let g: Vec<f64> = nodes
            .iter()
            .map(|&a| window_mass(&smoothing.kernel, w, b, a))
            .collect();
        let spectra: Vec<Vec<f64>> = degrees
            .degrees()
            .map(|n| {
                nodes
                    .iter()
                    .map(|&a| model.spectral_eigenvalue(n, a, hyp))
                    .collect()
            })
            .collect();
        let mean = if options.mean == MeanMethod::Exact && hyp == Hypothesis::Null {
            let weights = StatisticWeights::new(t, smoothing)?;
            degrees
                .degrees()
                .map(|n| {
                    let e = expected_periodogram(&model, n, t);
                    weights.weights.iter().map(|&(s, w)| w * e[s]).sum()
                })
                .collect()
        } else {
            let sqrt_t = (t as f64).sqrt();
            spectra
                .iter()
                .map(|f| sqrt_t * h * f.iter().zip(&g).map(|(f, g)| f * g).sum::<f64>())
                .collect()
        };
        let k = degrees.len();
        let mut var_cross = Array2::zeros((k, k));
        for i in 0..k {
            for j in i..k {
                let v: f64 = (0..nodes.len())
                    .map(|m| spectra[i][m] * spectra[j][m] * g[m] * g[m])
                    .sum::<f64>()
                    * h
                    * TWO_PI;
                var_cross[[i, j]] = v;
                var_cross[[j, i]] = v;
            }
        }
        let var_diag = (0..k).map(|i| 2.0 * var_cross[[i, i]]).collect();
        Ok(Self {
            degrees,
            t,
            bandwidth: b,
            mean,
            var_diag,
            var_cross,
        })
    }

    pub fn degrees(&self) -> DegreeRange {
        self.degrees
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Diagonal-entry mean for degree `n`.
    pub fn diagonal_mean(&self, n: usize) -> f64 {
        self.mean[n - self.degrees.n_min]
    }

    pub fn moments(&self, a: HarmonicIndex, b: HarmonicIndex) -> Result<NullMoments> {
        self.degrees.column(a)?;
        self.degrees.column(b)?;
        let (i, k) = (a.n - self.degrees.n_min, b.n - self.degrees.n_min);
        Ok(if a == b {
            NullMoments {
                mean: self.mean[i],
                variance: self.var_diag[i],
            }
        } else {
            NullMoments {
                mean: 0.0,
                variance: self.var_cross[[i, k]],
            }
        })
    }
}

/// `E|ã_{n,j}(ω_s)|²` for `s = 0..T-1` under the SRD spectrum of degree
/// `n`: the Fejér-smoothed spectrum, computed from autocovariances.
pub fn expected_periodogram(model: &SpectralModel, n: usize, t: usize) -> Vec<f64> {
    let grid = (4 * t).next_power_of_two().max(1024);
    let mut planner = FftPlanner::<f64>::new();
    let mut f: Vec<Complex64> = (0..grid)
        .map(|k| {
            let omega = TWO_PI * k as f64 / grid as f64;
            Complex64::new(model.spectral_eigenvalue(n, omega, Hypothesis::Null), 0.0)
        })
        .collect();
    // γ(h) = ∫ f(λ) e^{iλh} dλ by the periodic trapezoid rule
    planner.plan_fft_inverse(grid).process(&mut f);
    let scale = TWO_PI / grid as f64;
    let tf = t as f64;
    let mut v: Vec<Complex64> = (0..t)
        .map(|h| {
            let gamma = f[h].re * scale;
            let c = (tf - h as f64) * gamma;
            Complex64::new(if h == 0 { 0.5 * c } else { c }, 0.0)
        })
        .collect();
    planner.plan_fft_forward(t).process(&mut v);
    v.iter().map(|z| 2.0 * z.re / (TWO_PI * tf)).collect()
}

fn window_mass(kernel: &Kernel, w: f64, b: f64, alpha: f64) -> f64 {
    kernel.cdf((w - alpha) / b) - kernel.cdf((-w - alpha) / b)
}

/// Null moments of one entry with the Epanechnikov weight and default
/// options.
pub fn null_moments(
    model: &SpectralModel,
    a: HarmonicIndex,
    b: HarmonicIndex,
    t: usize,
    bandwidth: f64,
) -> Result<NullMoments> {
    NullCalibration::new(
        model,
        t,
        &SmoothingSpec::epanechnikov(bandwidth)?,
        CalibrationOptions::default(),
    )?
    .moments(a, b)
}

// ---------------------------------------------------------------------------
// Directions

/// λ_{n,h} over a degree range.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceTable {
    degrees: DegreeRange,
    values: Array2<f64>,
}

impl VarianceTable {
    pub fn new(degrees: DegreeRange, values: Array2<f64>) -> Result<Self> {
        let k = degrees.len();
        if values.dim() != (k, k) {
            return Err(Error::LengthMismatch {
                expected: k * k,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config(
                "direction variances must be finite and >= 0".into(),
            ));
        }
        Ok(Self { degrees, values })
    }

    pub fn constant(degrees: DegreeRange, value: f64) -> Result<Self> {
        let k = degrees.len();
        Self::new(degrees, Array2::from_elem((k, k), value))
    }

    pub fn unit(degrees: DegreeRange) -> Self {
        Self::constant(degrees, 1.0).expect("unit table is valid")
    }

    pub fn get(&self, n: usize, h: usize) -> f64 {
        self.values[[n - self.degrees.n_min, h - self.degrees.n_min]]
    }
}

/// One coefficient `Y_{n,j,h,l}` of a direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionTerm {
    pub a: HarmonicIndex,
    pub b: HarmonicIndex,
    pub weight: f64,
}

/// Finite expansion `k = Σ Y_{n,j,h,l} S_{n,j} ⊗ S_{h,l}` (zero terms
/// omitted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub label: String,
    pub terms: Vec<DirectionTerm>,
}

impl Direction {
    pub fn single_pair(label: impl Into<String>, a: HarmonicIndex, b: HarmonicIndex) -> Self {
        Self {
            label: label.into(),
            terms: vec![DirectionTerm { a, b, weight: 1.0 }],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.weight == 0.0)
    }
}

/// Gaussian direction with `Y_{n,j,h,l} ~ N(0, λ_{n,h})` over `truncation`;
/// substream `k` of the direction domain.
pub fn draw_direction(
    variances: &VarianceTable,
    truncation: DegreeRange,
    seed: SeedSpec,
    k: u32,
) -> Result<Direction> {
    if truncation.n_min < variances.degrees.n_min || truncation.n_max > variances.degrees.n_max {
        return Err(Error::InvalidDegreeRange(format!(
            "truncation {truncation:?} exceeds the variance table range {:?}",
            variances.degrees
        )));
    }
    let mut rng = seed.substream(Domain::Direction, k, 0);
    let mut terms = Vec::with_capacity(truncation.dim() * truncation.dim());
    for a in truncation.indices() {
        for b in truncation.indices() {
            let z: f64 = StandardNormal.sample(&mut rng);
            let weight = variances.get(a.n, b.n).sqrt() * z;
            if weight != 0.0 {
                terms.push(DirectionTerm { a, b, weight });
            }
        }
    }
    Ok(Direction {
        label: format!("k{}", k + 1),
        terms,
    })
}

/// The eight default directions: single pairs `((n,j),(n,j))` for
/// `n ∈ {1,2,3}` in lexicographic order.
pub fn default_directions() -> Vec<Direction> {
    (1..=3usize)
        .flat_map(|n| (1..=2 * n + 1).map(move |j| HarmonicIndex { n, j }))
        .take(8)
        .enumerate()
        .map(|(i, idx)| Direction::single_pair(format!("k{}", i + 1), idx, idx))
        .collect()
}

/// Label used for a pair in reports, e.g. `n1j2:n1j2`.
pub fn pair_label(a: HarmonicIndex, b: HarmonicIndex) -> String {
    format!("n{}j{}:n{}j{}", a.n, a.j, b.n, b.j)
}

// ---------------------------------------------------------------------------
// Tests and reports

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestMode {
    Projected,
    RandomProjection,
}

/// One standardized statistic with its decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestEntry {
    pub label: String,
    /// Raw statistic entry or projection `⟨S, k⟩`.
    pub statistic: f64,
    pub mean: f64,
    pub variance: f64,
    pub z: f64,
    pub p_value: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub mode: TestMode,
    pub level: f64,
    pub one_sided: bool,
    pub critical_value: f64,
    pub t: usize,
    pub bandwidth: f64,
    pub entries: Vec<TestEntry>,
}

impl TestReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("pair_or_direction,statistic,z,p,reject\n");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{},{:.10e},{:.10},{:.10},{}",
                e.label, e.statistic, e.z, e.p_value, e.reject
            );
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Test configuration bound to one `(T, B_T)` and null calibration.
#[derive(Debug, Clone)]
pub struct LrdTest {
    weights: StatisticWeights,
    calibration: NullCalibration,
    level: f64,
    one_sided: bool,
    critical: f64,
}

impl LrdTest {
    pub fn new(
        weights: StatisticWeights,
        calibration: NullCalibration,
        level: f64,
        one_sided: bool,
    ) -> Result<Self> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::Config(format!(
                "level must lie in (0, 1), got {level}"
            )));
        }
        if weights.t != calibration.t || weights.bandwidth != calibration.bandwidth {
            return Err(Error::Config(
                "statistic weights and calibration disagree on (T, B_T)".into(),
            ));
        }
        let critical = if one_sided {
            normal_quantile(1.0 - level)
        } else {
            normal_quantile(1.0 - level / 2.0)
        };
        Ok(Self {
            weights,
            calibration,
            level,
            one_sided,
            critical,
        })
    }

    /// Builds weights and calibration from a model and smoothing spec.
    pub fn from_model(
        model: &SpectralModel,
        t: usize,
        smoothing: &SmoothingSpec,
        options: CalibrationOptions,
        level: f64,
        one_sided: bool,
    ) -> Result<Self> {
        let weights = StatisticWeights::new(t, smoothing)?;
        let calibration = NullCalibration::new(model, t, smoothing, options)?;
        Self::new(weights, calibration, level, one_sided)
    }

    pub fn weights(&self) -> &StatisticWeights {
        &self.weights
    }

    pub fn calibration(&self) -> &NullCalibration {
        &self.calibration
    }

    pub fn critical_value(&self) -> f64 {
        self.critical
    }

    fn decide(&self, label: String, statistic: f64, mean: f64, variance: f64) -> TestEntry {
        let z = (statistic - mean) / variance.sqrt();
        let (p_value, reject) = if self.one_sided {
            (upper_p(z), z > self.critical)
        } else {
            (two_sided_p(z), z.abs() > self.critical)
        };
        TestEntry {
            label,
            statistic,
            mean,
            variance,
            z,
            p_value,
            reject,
        }
    }

    fn report(&self, mode: TestMode, entries: Vec<TestEntry>) -> TestReport {
        TestReport {
            mode,
            level: self.level,
            one_sided: self.one_sided,
            critical_value: self.critical,
            t: self.weights.t,
            bandwidth: self.weights.bandwidth,
            entries,
        }
    }

    fn check_panel(&self, dft: &DftPanel) -> Result<()> {
        if dft.len() != self.weights.t {
            return Err(Error::LengthMismatch {
                expected: self.weights.t,
                got: dft.len(),
            });
        }
        Ok(())
    }

    /// Standardized entries `z = (S[a,b] - mean) / √variance`.
    pub fn projected(
        &self,
        dft: &DftPanel,
        pairs: &[(HarmonicIndex, HarmonicIndex)],
    ) -> Result<TestReport> {
        self.check_panel(dft)?;
        let degrees = dft.degrees();
        let entries = pairs
            .iter()
            .map(|&(a, b)| {
                let s = self
                    .weights
                    .entry(dft, degrees.column(a)?, degrees.column(b)?);
                let m = self.calibration.moments(a, b)?;
                Ok(self.decide(pair_label(a, b), s.re, m.mean, m.variance))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.report(TestMode::Projected, entries))
    }

    /// Projection of `S - E[S]` onto each direction, standardized by the
    /// bilinear expansion of the entry variances.
    pub fn random_projection(
        &self,
        dft: &DftPanel,
        directions: &[Direction],
    ) -> Result<TestReport> {
        self.check_panel(dft)?;
        let degrees = dft.degrees();
        let mut entries = Vec::with_capacity(directions.len());
        for dir in directions {
            let mut statistic = 0.0;
            let mut mean = 0.0;
            // symmetric coefficient sums per unordered pair
            let mut pooled: BTreeMap<(usize, usize), (HarmonicIndex, HarmonicIndex, f64)> =
                BTreeMap::new();
            for term in &dir.terms {
                let (ca, cb) = (degrees.column(term.a)?, degrees.column(term.b)?);
                let s = self.weights.entry(dft, ca, cb).re;
                let m = self.calibration.moments(term.a, term.b)?;
                statistic += term.weight * s;
                mean += term.weight * m.mean;
                let key = (ca.min(cb), ca.max(cb));
                pooled.entry(key).or_insert((term.a, term.b, 0.0)).2 += term.weight;
            }
            let mut variance = 0.0;
            for (a, b, y) in pooled.values() {
                variance += y * y * self.calibration.moments(*a, *b)?.variance;
            }
            if !(variance > 0.0) {
                return Err(Error::ZeroVarianceDirection(dir.label.clone()));
            }
            entries.push(self.decide(dir.label.clone(), statistic, mean, variance));
        }
        Ok(self.report(TestMode::RandomProjection, entries))
    }
}

/// Standardized projected test with the Epanechnikov weight and default
/// calibration.
pub fn projected_test(
    dft: &DftPanel,
    model: &SpectralModel,
    pairs: &[(HarmonicIndex, HarmonicIndex)],
    bandwidth: f64,
    level: f64,
) -> Result<TestReport> {
    LrdTest::from_model(
        model,
        dft.len(),
        &SmoothingSpec::epanechnikov(bandwidth)?,
        CalibrationOptions::default(),
        level,
        false,
    )?
    .projected(dft, pairs)
}

/// Random-projection test with the Epanechnikov weight and default
/// calibration.
pub fn random_projection_test(
    dft: &DftPanel,
    model: &SpectralModel,
    directions: &[Direction],
    bandwidth: f64,
    level: f64,
) -> Result<TestReport> {
    LrdTest::from_model(
        model,
        dft.len(),
        &SmoothingSpec::epanechnikov(bandwidth)?,
        CalibrationOptions::default(),
        level,
        false,
    )?
    .random_projection(dft, directions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelConfig;
    use crate::simulate::{simulate_panel, CoefficientPanel, FracFilterSpec};
    use crate::spectral::fdft_panel;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn h0() -> SpectralModel {
        ModelConfig::paper_h0().build().unwrap()
    }

    #[test]
    fn bandwidth_examples() {
        assert_abs_diff_eq!(
            bandwidth(10000, BandwidthRule::Beta(0.25)).unwrap(),
            0.1,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            bandwidth(1000, BandwidthRule::Beta(0.25)).unwrap(),
            0.177827941,
            epsilon = 1e-8
        );
        assert_abs_diff_eq!(
            bandwidth(2, BandwidthRule::Beta(0.999)).unwrap(),
            0.500346,
            epsilon = 1e-6
        );
        assert!(bandwidth(10, BandwidthRule::Fixed(0.05)).is_err());
        assert!(bandwidth(10, BandwidthRule::Fixed(1.0)).is_err());
        assert!(bandwidth(1, BandwidthRule::Beta(0.5)).is_err());
    }

    #[test]
    fn window_contents() {
        // T = 1000, B = 0.1: √B/2 ≈ 0.158, 2π/T ≈ 0.00628 → |r| <= 25
        let w = window_indices(1000, 0.1).unwrap();
        assert_eq!(w.len(), 51);
        assert!(matches!(
            window_indices(8, 0.3),
            Err(Error::EmptyWindow { .. })
        ));
    }

    #[test]
    fn weights_reproduce_direct_riemann_sum() {
        let degrees = DegreeRange::new(1, 2).unwrap();
        let model = ModelConfig {
            degrees,
            ..ModelConfig::paper_h0()
        }
        .build()
        .unwrap();
        let panel =
            simulate_panel(&model, 128, SeedSpec::new(3, 0), FracFilterSpec::default()).unwrap();
        let dft = fdft_panel(&panel).unwrap();
        let spec = SmoothingSpec::epanechnikov(0.3).unwrap();
        let weights = StatisticWeights::new(128, &spec).unwrap();
        let t = 128usize;
        let step = TWO_PI / t as f64;
        let win = window_indices(t, 0.3).unwrap();
        for (a, b) in [(0usize, 0usize), (1, 4), (3, 2)] {
            let mut direct = Complex64::new(0.0, 0.0);
            for &r in &win {
                let f = crate::spectral::smoothed_cross_spectrum(
                    &dft,
                    degrees.index(a),
                    degrees.index(b),
                    step * r as f64,
                    &spec,
                )
                .unwrap();
                direct += f * step;
            }
            direct *= (t as f64).sqrt();
            let fast = weights.entry(&dft, a, b);
            assert_relative_eq!(fast.re, direct.re, max_relative = 1e-10, epsilon = 1e-14);
            assert_relative_eq!(fast.im, direct.im, max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_and_scaled_panels() {
        let degrees = DegreeRange::new(1, 2).unwrap();
        let zero = CoefficientPanel::zeros(degrees, 200);
        let dft = fdft_panel(&zero).unwrap();
        let s = statistic_coefficient(&dft, HarmonicIndex::zonal(1), HarmonicIndex::zonal(1), 0.2)
            .unwrap();
        assert_eq!(s, Complex64::new(0.0, 0.0));

        let model = h0();
        let panel =
            simulate_panel(&model, 200, SeedSpec::new(1, 0), FracFilterSpec::default()).unwrap();
        let a = HarmonicIndex::new(1, 1).unwrap();
        let b = HarmonicIndex::new(2, 3).unwrap();
        let s1 = statistic_coefficient(&fdft_panel(&panel).unwrap(), a, b, 0.2).unwrap();
        let s2 =
            statistic_coefficient(&fdft_panel(&panel.scaled(3.0)).unwrap(), a, b, 0.2).unwrap();
        assert_relative_eq!(s2.re, 9.0 * s1.re, max_relative = 1e-10);
    }

    #[test]
    fn coeff_matrix_is_hermitian_with_real_diagonal() {
        let model = h0();
        let panel =
            simulate_panel(&model, 300, SeedSpec::new(2, 0), FracFilterSpec::default()).unwrap();
        let dft = fdft_panel(&panel).unwrap();
        let weights =
            StatisticWeights::new(300, &SmoothingSpec::epanechnikov(0.2).unwrap()).unwrap();
        let c = StatisticCoeffs::compute(&dft, &weights, DegreeRange::new(1, 3).unwrap()).unwrap();
        let m = c.matrix();
        for a in 0..m.nrows() {
            assert!(m[[a, a]].im.abs() < 1e-10);
            for b in 0..m.ncols() {
                assert!((m[[a, b]] - m[[b, a]].conj()).norm() < 1e-10);
                assert!(m[[a, b]].im.abs() < 1e-10 * m[[a, b]].norm().max(1.0));
                let direct = weights.entry(&dft, a, b);
                assert!((m[[a, b]] - direct).norm() < 1e-10 * direct.norm().max(1e-3));
            }
        }
    }

    #[test]
    fn white_noise_mean_reduces_to_constant_spectrum() {
        let degrees = DegreeRange::new(1, 2).unwrap();
        let sigma2 = 2.5;
        let model = SpectralModel::new(
            degrees,
            vec![vec![]; 2],
            vec![vec![]; 2],
            vec![sigma2; 2],
            crate::models::AlphaProfile::zero(2),
        )
        .unwrap();
        let (t, b) = (1000, 0.2);
        let spec = SmoothingSpec::epanechnikov(b).unwrap();
        let quad = CalibrationOptions {
            mean: MeanMethod::Quadrature,
            ..Default::default()
        };
        let z1 = HarmonicIndex::zonal(1);
        let m = NullCalibration::new(&model, t, &spec, quad)
            .unwrap()
            .moments(z1, z1)
            .unwrap();
        let expected = (b * t as f64).sqrt() * sigma2 / TWO_PI;
        assert_relative_eq!(m.mean, expected, max_relative = 1e-6);
        // the exact mean differs only through the grid and the s = 0 term
        let exact = null_moments(&model, z1, z1, t, b).unwrap();
        let weights = StatisticWeights::new(t, &spec).unwrap();
        let total: f64 = weights.weights().iter().map(|(_, w)| w).sum();
        assert_relative_eq!(exact.mean, total * sigma2 / TWO_PI, max_relative = 1e-10);
        assert_relative_eq!(exact.mean, expected, max_relative = 0.05);
        let off = null_moments(
            &model,
            HarmonicIndex::zonal(1),
            HarmonicIndex::zonal(2),
            t,
            b,
        )
        .unwrap();
        assert_eq!(off.mean, 0.0);
        assert!(off.variance > 0.0 && m.variance > off.variance);
    }

    #[test]
    fn expected_periodogram_matches_fejer_sum() {
        let model = h0();
        let t = 64;
        let e = expected_periodogram(&model, 3, t);
        // direct: (1/2πT) Σ_{|h|<T} (T-|h|) γ(h) e^{-iωh}, γ from the AR(1)/MA(1) closed form
        let (phi, psi, s2) = (model.phi(3)[0], model.psi(3)[0], model.innovation(3));
        let g0 = s2 * (1.0 + 2.0 * phi * psi + psi * psi) / (1.0 - phi * phi);
        let g1 = s2 * (1.0 + phi * psi) * (phi + psi) / (1.0 - phi * phi);
        let gamma = |h: usize| {
            if h == 0 {
                g0
            } else {
                g1 * phi.powi(h as i32 - 1)
            }
        };
        for s in [0usize, 1, 5, 31, 50] {
            let w = TWO_PI * s as f64 / t as f64;
            let mut acc = t as f64 * gamma(0);
            for h in 1..t {
                acc += 2.0 * (t - h) as f64 * gamma(h) * (w * h as f64).cos();
            }
            assert_relative_eq!(e[s], acc / (TWO_PI * t as f64), max_relative = 1e-10);
        }
    }

    #[test]
    fn calibration_refuses_lrd_model_without_override() {
        let model = ModelConfig::example(1).unwrap().build().unwrap();
        let spec = SmoothingSpec::epanechnikov(0.2).unwrap();
        let err = NullCalibration::new(&model, 500, &spec, CalibrationOptions::default());
        assert!(matches!(err, Err(Error::CalibrationUnderAlternative)));
        let srd = CalibrationOptions {
            mode: CalibrationMode::SrdPart,
            ..Default::default()
        };
        let c = NullCalibration::new(&model, 500, &spec, srd).unwrap();
        let c0 = NullCalibration::new(&model.srd_part(), 500, &spec, CalibrationOptions::default())
            .unwrap();
        assert_eq!(c, c0);
    }

    #[test]
    fn doubling_nodes_changes_moments_by_less_than_a_tenth_percent() {
        let model = h0();
        let spec = SmoothingSpec::epanechnikov(1000f64.powf(-0.25)).unwrap();
        let quad = CalibrationOptions {
            mean: MeanMethod::Quadrature,
            ..Default::default()
        };
        let base = NullCalibration::new(&model, 1000, &spec, quad).unwrap();
        let fine = NullCalibration::new(
            &model,
            1000,
            &spec,
            CalibrationOptions { nodes: 512, ..quad },
        )
        .unwrap();
        for n in 1..=8 {
            let a = HarmonicIndex::zonal(n);
            let (x, y) = (base.moments(a, a).unwrap(), fine.moments(a, a).unwrap());
            assert_relative_eq!(x.mean, y.mean, max_relative = 1e-3);
            assert_relative_eq!(x.variance, y.variance, max_relative = 1e-3);
        }
    }

    #[test]
    fn default_directions_enumerate_low_degrees() {
        let dirs = default_directions();
        assert_eq!(dirs.len(), 8);
        let firsts: Vec<(usize, usize)> = dirs
            .iter()
            .map(|d| (d.terms[0].a.n, d.terms[0].a.j))
            .collect();
        assert_eq!(
            firsts,
            vec![
                (1, 1),
                (1, 2),
                (1, 3),
                (2, 1),
                (2, 2),
                (2, 3),
                (2, 4),
                (2, 5)
            ]
        );
        assert!(dirs
            .iter()
            .all(|d| d.terms.len() == 1 && d.terms[0].a == d.terms[0].b));
    }

    #[test]
    fn direction_draws() {
        let degrees = DegreeRange::new(1, 3).unwrap();
        let unit = VarianceTable::unit(degrees);
        let d1 = draw_direction(&unit, degrees, SeedSpec::new(5, 0), 0).unwrap();
        let d2 = draw_direction(&unit, degrees, SeedSpec::new(5, 0), 0).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(d1.terms.len(), 15 * 15);
        let zero = VarianceTable::constant(degrees, 0.0).unwrap();
        assert!(draw_direction(&zero, degrees, SeedSpec::new(5, 0), 0)
            .unwrap()
            .is_zero());
    }

    #[test]
    fn zero_direction_is_rejected() {
        let model = h0();
        let panel =
            simulate_panel(&model, 256, SeedSpec::new(9, 0), FracFilterSpec::default()).unwrap();
        let dft = fdft_panel(&panel).unwrap();
        let dir = Direction {
            label: "k0".into(),
            terms: vec![],
        };
        let r = random_projection_test(&dft, &model, &[dir], 0.25, 0.05);
        assert!(matches!(r, Err(Error::ZeroVarianceDirection(_))));
    }

    #[test]
    fn single_pair_direction_matches_projected_test() {
        let model = h0();
        let panel =
            simulate_panel(&model, 400, SeedSpec::new(4, 1), FracFilterSpec::default()).unwrap();
        let dft = fdft_panel(&panel).unwrap();
        let dirs = default_directions();
        let pairs: Vec<_> = dirs.iter().map(|d| (d.terms[0].a, d.terms[0].b)).collect();
        let p = projected_test(&dft, &model, &pairs, 0.2, 0.05).unwrap();
        let r = random_projection_test(&dft, &model, &dirs, 0.2, 0.05).unwrap();
        for (x, y) in p.entries.iter().zip(&r.entries) {
            assert_eq!(x.reject, y.reject);
            assert_relative_eq!(x.z, y.z, max_relative = 1e-12);
        }
        assert!(p
            .to_csv()
            .starts_with("pair_or_direction,statistic,z,p,reject\n"));
        assert_eq!(r.to_csv().lines().count(), 9);
    }

    #[test]
    fn hs_norm_of_zero_is_zero() {
        let degrees = DegreeRange::new(1, 3).unwrap();
        let dft = fdft_panel(&CoefficientPanel::zeros(degrees, 100)).unwrap();
        let w = StatisticWeights::new(100, &SmoothingSpec::epanechnikov(0.3).unwrap()).unwrap();
        let c = StatisticCoeffs::compute(&dft, &w, degrees).unwrap();
        assert_eq!(projected_hs_norm(&c, 3), 0.0);
        assert_eq!(projected_hs_norm_diagonal_blocks(&c, 3), 0.0);
    }
}
