//! SPHARMA(p, q) spectral models with per-degree LRD exponents.
//!
//! Under the null the degree-`n` spectral eigenvalue is
//!
//! ```text
//! f_n(ω) = λ_n(R₀^η)/(2π) · |Ψ_{q,n}(e^{-iω})|² / |Φ_{p,n}(e^{-iω})|²
//! ```
//!
//! with `Φ_{p,n}(z) = 1 - Σ λ_n(φ_j) z^j` and `Ψ_{q,n}(z) = 1 + Σ λ_n(ψ_l) z^l`.
//! Under the alternative it is multiplied by the multifractional filter gain
//! `|1 - e^{-iω}|^{-α(n)} = (2|sin(ω/2)|)^{-α(n)}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::DegreeRange;

const ROOT_MARGIN: f64 = 1e-9;
const COMMON_ROOT_TOL: f64 = 1e-9;

/// Which spectrum to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    /// SRD: the LRD exponents are ignored (α ≡ 0).
    Null,
    /// LRD: the model's α profile is applied.
    Alternative,
}

/// Per-degree LRD exponents α(n).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaProfile {
    values: Vec<f64>,
    tail_value: f64,
    extended: bool,
}

impl AlphaProfile {
    /// Explicit profile over the model's degrees. `tail` defaults to the
    /// smallest nonzero exponent.
    pub fn explicit(values: Vec<f64>, tail: Option<f64>, extended: bool) -> Result<Self> {
        let tail_value = tail.unwrap_or_else(|| min_nonzero(&values).unwrap_or(0.0));
        let profile = Self {
            values,
            tail_value,
            extended,
        };
        profile.validate()?;
        Ok(profile)
    }

    /// α ≡ `value` on `len` degrees.
    pub fn constant(value: f64, len: usize, extended: bool) -> Result<Self> {
        Self::explicit(vec![value; len], Some(value), extended)
    }

    /// The all-zero (SRD) profile.
    pub fn zero(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
            tail_value: 0.0,
            extended: false,
        }
    }

    /// Linear interpolation from `start` at the first degree to `end` at the
    /// last one.
    pub fn interpolated(
        start: f64,
        end: f64,
        len: usize,
        tail: Option<f64>,
        extended: bool,
    ) -> Result<Self> {
        let values = (0..len)
            .map(|i| {
                if len == 1 {
                    start
                } else {
                    start + (end - start) * i as f64 / (len - 1) as f64
                }
            })
            .collect();
        Self::explicit(values, tail, extended)
    }

    /// Piecewise-linear profile rising from `base` at the first degree to
    /// `peak` at position `peak_pos` (0-based) and falling back to `base` at
    /// the last degree.
    pub fn peaked(
        base: f64,
        peak: f64,
        peak_pos: usize,
        len: usize,
        tail: Option<f64>,
        extended: bool,
    ) -> Result<Self> {
        if peak_pos >= len {
            return Err(Error::Config(format!(
                "peak position {peak_pos} outside profile of length {len}"
            )));
        }
        let values = (0..len)
            .map(|i| {
                if i <= peak_pos {
                    if peak_pos == 0 {
                        peak
                    } else {
                        base + (peak - base) * i as f64 / peak_pos as f64
                    }
                } else {
                    let span = (len - 1 - peak_pos) as f64;
                    peak + (base - peak) * (i - peak_pos) as f64 / span
                }
            })
            .collect();
        Self::explicit(values, tail, extended)
    }

    pub fn validate(&self) -> Result<()> {
        let upper = if self.extended { 1.0 } else { 0.5 };
        for (i, &a) in self.values.iter().chain([&self.tail_value]).enumerate() {
            if !a.is_finite() || a < 0.0 || a >= upper {
                let what = if i == self.values.len() {
                    "tail value".to_string()
                } else {
                    format!("entry {i}")
                };
                return Err(Error::RangeViolation(format!(
                    "{what} = {a} not in [0, {upper}){}",
                    if self.extended {
                        ""
                    } else {
                        " (set extended to allow exponents >= 1/2)"
                    }
                )));
            }
        }
        Ok(())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail_value(&self) -> f64 {
        self.tail_value
    }

    pub fn extended(&self) -> bool {
        self.extended
    }

    /// Smallest nonzero exponent l_α.
    pub fn l_alpha(&self) -> Option<f64> {
        min_nonzero(&self.values)
    }

    /// Largest exponent L_α.
    pub fn upper_alpha(&self) -> Option<f64> {
        self.values
            .iter()
            .copied()
            .filter(|a| *a > 0.0)
            .fold(None, |acc, a| Some(acc.map_or(a, |m: f64| m.max(a))))
    }

    /// True iff every exponent is zero.
    pub fn is_null(&self) -> bool {
        self.values.iter().all(|a| *a == 0.0)
    }
}

fn min_nonzero(values: &[f64]) -> Option<f64> {
    values
        .iter()
        .copied()
        .filter(|a| *a > 0.0)
        .fold(None, |acc, a| Some(acc.map_or(a, |m: f64| m.min(a))))
}

/// Validated SPHARMA(p, q) model with an LRD exponent profile.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralModel {
    degrees: DegreeRange,
    p: usize,
    q: usize,
    phi: Vec<Vec<f64>>,
    psi: Vec<Vec<f64>>,
    innov: Vec<f64>,
    alpha: AlphaProfile,
}

impl SpectralModel {
    /// Builds and validates a model. `phi[i]` / `psi[i]` / `innov[i]` refer
    /// to degree `degrees.n_min + i`.
    pub fn new(
        degrees: DegreeRange,
        phi: Vec<Vec<f64>>,
        psi: Vec<Vec<f64>>,
        innov: Vec<f64>,
        alpha: AlphaProfile,
    ) -> Result<Self> {
        degrees.validate()?;
        let len = degrees.len();
        for (what, got) in [
            ("phi", phi.len()),
            ("psi", psi.len()),
            ("innovation", innov.len()),
            ("alpha", alpha.values().len()),
        ] {
            if got != len {
                return Err(Error::Config(format!(
                    "{what} covers {got} degrees, expected {len}"
                )));
            }
        }
        let p = phi.first().map_or(0, Vec::len);
        let q = psi.first().map_or(0, Vec::len);
        if phi.iter().any(|c| c.len() != p) || psi.iter().any(|c| c.len() != q) {
            return Err(Error::Config(
                "ARMA coefficient lists must have the same length for every degree".into(),
            ));
        }
        alpha.validate()?;
        for (i, n) in degrees.degrees().enumerate() {
            if !(innov[i] > 0.0) || !innov[i].is_finite() {
                return Err(Error::NonpositiveInnovation { n, value: innov[i] });
            }
            if phi[i].iter().chain(&psi[i]).any(|c| !c.is_finite()) {
                return Err(Error::Config(format!("degree {n}: non-finite coefficient")));
            }
            let ar_roots = poly_roots(&ar_polynomial(&phi[i]));
            if let Some(m) = min_modulus(&ar_roots) {
                if m <= 1.0 + ROOT_MARGIN {
                    return Err(Error::NonstationaryDegree { n, modulus: m });
                }
            }
            let ma_roots = poly_roots(&ma_polynomial(&psi[i]));
            if let Some(m) = min_modulus(&ma_roots) {
                if m <= 1.0 + ROOT_MARGIN {
                    return Err(Error::NoninvertibleDegree { n, modulus: m });
                }
            }
            for a in &ar_roots {
                for b in &ma_roots {
                    if (a - b).norm() <= COMMON_ROOT_TOL * a.norm().max(1.0) {
                        return Err(Error::CommonRoot { n });
                    }
                }
            }
        }
        Ok(Self {
            degrees,
            p,
            q,
            phi,
            psi,
            innov,
            alpha,
        })
    }

    pub fn degrees(&self) -> DegreeRange {
        self.degrees
    }

    pub fn ar_order(&self) -> usize {
        self.p
    }

    pub fn ma_order(&self) -> usize {
        self.q
    }

    fn slot(&self, n: usize) -> usize {
        assert!(
            self.degrees.contains(n),
            "degree {n} outside model range {:?}",
            self.degrees
        );
        n - self.degrees.n_min
    }

    /// AR eigenvalues λ_n(φ_1..p).
    pub fn phi(&self, n: usize) -> &[f64] {
        &self.phi[self.slot(n)]
    }

    /// MA eigenvalues λ_n(ψ_1..q).
    pub fn psi(&self, n: usize) -> &[f64] {
        &self.psi[self.slot(n)]
    }

    /// Innovation eigenvalue λ_n(R₀^η).
    pub fn innovation(&self, n: usize) -> f64 {
        self.innov[self.slot(n)]
    }

    /// α(n); degrees above the modelled range take the tail value.
    pub fn alpha(&self, n: usize) -> f64 {
        if n > self.degrees.n_max {
            self.alpha.tail_value()
        } else {
            self.alpha.values()[self.slot(n)]
        }
    }

    pub fn alpha_profile(&self) -> &AlphaProfile {
        &self.alpha
    }

    pub fn is_null(&self) -> bool {
        self.alpha.is_null()
    }

    /// Same SPHARMA factor with α ≡ 0.
    pub fn srd_part(&self) -> Self {
        Self {
            alpha: AlphaProfile::zero(self.degrees.len()),
            ..self.clone()
        }
    }

    /// Same model with innovation eigenvalues multiplied by `factor`.
    pub fn scale_innovations(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.degrees,
            self.phi.clone(),
            self.psi.clone(),
            self.innov.iter().map(|v| v * factor).collect(),
            self.alpha.clone(),
        )
    }

    /// `|Ψ_{q,n}(e^{-iω})|² / |Φ_{p,n}(e^{-iω})|²`.
    pub fn arma_gain(&self, n: usize, omega: f64) -> f64 {
        let z = Complex64::from_polar(1.0, -omega);
        let num = eval_poly(&ma_polynomial(self.psi(n)), z).norm_sqr();
        let den = eval_poly(&ar_polynomial(self.phi(n)), z).norm_sqr();
        num / den
    }

    /// Spectral eigenvalue `f_n(ω)`; `+∞` at ω = 0 under the alternative
    /// when α(n) > 0.
    pub fn spectral_eigenvalue(&self, n: usize, omega: f64, hyp: Hypothesis) -> f64 {
        let base = self.innovation(n) / (2.0 * PI) * self.arma_gain(n, omega);
        match hyp {
            Hypothesis::Null => base,
            Hypothesis::Alternative => {
                let a = self.alpha(n);
                if a == 0.0 {
                    return base;
                }
                let gain = 2.0 * (0.5 * omega).sin().abs();
                if gain == 0.0 {
                    f64::INFINITY
                } else {
                    base * gain.powf(-a)
                }
            }
        }
    }

    /// Moduli of the AR and MA polynomial roots of degree `n`.
    pub fn root_moduli(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        let ar = poly_roots(&ar_polynomial(self.phi(n)))
            .iter()
            .map(|r| r.norm())
            .collect();
        let ma = poly_roots(&ma_polynomial(self.psi(n)))
            .iter()
            .map(|r| r.norm())
            .collect();
        (ar, ma)
    }

    /// Explicit configuration document reproducing this model.
    pub fn to_config(&self) -> ModelConfig {
        ModelConfig {
            degrees: self.degrees,
            arma: ArmaConfig {
                p: self.p,
                q: self.q,
                phi: CoefficientSource::Explicit(self.phi.clone()),
                psi: CoefficientSource::Explicit(self.psi.clone()),
            },
            innovation: InnovationConfig::List(self.innov.clone()),
            alpha: AlphaConfig {
                shape: AlphaShape::Explicit {
                    values: self.alpha.values().to_vec(),
                },
                tail: Some(self.alpha.tail_value()),
                extended: self.alpha.extended(),
            },
        }
    }
}

/// Free-function form of [`SpectralModel::spectral_eigenvalue`].
pub fn spectral_eigenvalue(model: &SpectralModel, n: usize, omega: f64, hyp: Hypothesis) -> f64 {
    model.spectral_eigenvalue(n, omega, hyp)
}

fn ar_polynomial(phi: &[f64]) -> Vec<f64> {
    std::iter::once(1.0).chain(phi.iter().map(|c| -c)).collect()
}

fn ma_polynomial(psi: &[f64]) -> Vec<f64> {
    std::iter::once(1.0).chain(psi.iter().copied()).collect()
}

fn eval_poly(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

fn min_modulus(roots: &[Complex64]) -> Option<f64> {
    roots.iter().map(|r| r.norm()).reduce(f64::min)
}

/// Roots of `Σ c_k z^k` (ascending coefficients) by Durand–Kerner iteration
/// followed by Newton polishing. Trailing zero coefficients are dropped.
pub(crate) fn poly_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let mut deg = coeffs.len().saturating_sub(1);
    while deg > 0 && coeffs[deg] == 0.0 {
        deg -= 1;
    }
    if deg == 0 {
        return Vec::new();
    }
    let lead = coeffs[deg];
    let monic: Vec<Complex64> = coeffs[..=deg]
        .iter()
        .map(|c| Complex64::new(c / lead, 0.0))
        .collect();
    let eval = |z: Complex64| {
        monic
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    };
    let radius = 1.0 + monic[..deg].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let seed = Complex64::from_polar(1.0, 0.4);
    let mut roots: Vec<Complex64> = (0..deg)
        .map(|k| seed.powu(k as u32) * radius * 0.9)
        .collect();
    for _ in 0..500 {
        let mut max_step: f64 = 0.0;
        for i in 0..deg {
            let zi = roots[i];
            let mut denom = Complex64::new(1.0, 0.0);
            for (k, zk) in roots.iter().enumerate() {
                if k != i {
                    denom *= zi - zk;
                }
            }
            let step = eval(zi) / denom;
            roots[i] = zi - step;
            max_step = max_step.max(step.norm());
        }
        if max_step < 1e-15 * radius {
            break;
        }
    }
    let deriv: Vec<Complex64> = (1..=deg).map(|k| monic[k] * k as f64).collect();
    for r in &mut roots {
        for _ in 0..3 {
            let d = deriv
                .iter()
                .rev()
                .fold(Complex64::new(0.0, 0.0), |acc, c| acc * *r + c);
            if d.norm() == 0.0 {
                break;
            }
            *r -= eval(*r) / d;
        }
    }
    roots
}

// ---------------------------------------------------------------------------
// Configuration documents

/// JSON-compatible model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub degrees: DegreeRange,
    pub arma: ArmaConfig,
    #[serde(default)]
    pub innovation: InnovationConfig,
    #[serde(default)]
    pub alpha: AlphaConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaConfig {
    pub p: usize,
    pub q: usize,
    #[serde(default)]
    pub phi: CoefficientSource,
    #[serde(default)]
    pub psi: CoefficientSource,
}

/// Either explicit per-degree coefficient lists (`[[lag1, lag2, ...], ...]`,
/// one inner list per degree) or a closed-form generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefficientSource {
    Explicit(Vec<Vec<f64>>),
    Generator(Generator),
}

impl Default for CoefficientSource {
    fn default() -> Self {
        CoefficientSource::Explicit(Vec::new())
    }
}

/// Closed-form eigenvalue sequences, one entry per lag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum Generator {
    /// `scale_l · ((n+1)/n)^{exponent_l}` for lag `l`.
    RatioPower { scale: Vec<f64>, exponent: Vec<f64> },
    /// The same value at every degree.
    Constant { values: Vec<f64> },
    /// `0.7 · ((n+1)/n)^{-3/2}` (single AR lag).
    PaperAr,
    /// `0.4 · ((n+1)/n)^{-5/1.95}` (single MA lag).
    PaperMa,
}

impl Generator {
    fn expand(&self, degrees: &DegreeRange) -> Result<Vec<Vec<f64>>> {
        let ratio_power = |scale: &[f64], exponent: &[f64]| -> Result<Vec<Vec<f64>>> {
            if scale.len() != exponent.len() {
                return Err(Error::Config(
                    "ratio_power generator needs one exponent per scale".into(),
                ));
            }
            degrees
                .degrees()
                .map(|n| {
                    if n == 0 {
                        return Err(Error::Config(
                            "ratio_power generator is undefined at degree 0".into(),
                        ));
                    }
                    let ratio = (n as f64 + 1.0) / n as f64;
                    Ok(scale
                        .iter()
                        .zip(exponent)
                        .map(|(s, e)| s * ratio.powf(*e))
                        .collect())
                })
                .collect()
        };
        match self {
            Generator::RatioPower { scale, exponent } => ratio_power(scale, exponent),
            Generator::Constant { values } => Ok(vec![values.clone(); degrees.len()]),
            Generator::PaperAr => ratio_power(&[0.7], &[-1.5]),
            Generator::PaperMa => ratio_power(&[0.4], &[-5.0 / 1.95]),
        }
    }
}

/// Innovation eigenvalues λ_n(R₀^η).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InnovationConfig {
    List(Vec<f64>),
    Constant {
        constant: f64,
    },
    /// `scale · max(n, 1)^{-exponent}`.
    PowerDecay {
        scale: f64,
        exponent: f64,
    },
}

impl Default for InnovationConfig {
    fn default() -> Self {
        InnovationConfig::Constant { constant: 1.0 }
    }
}

/// LRD exponent profile description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaConfig {
    #[serde(flatten)]
    pub shape: AlphaShape,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<f64>,
    #[serde(default)]
    pub extended: bool,
}

impl Default for AlphaConfig {
    fn default() -> Self {
        Self {
            shape: AlphaShape::Constant { value: 0.0 },
            tail: None,
            extended: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaShape {
    Constant {
        value: f64,
    },
    Explicit {
        values: Vec<f64>,
    },
    /// Linear from `endpoints[0]` at `n_min` to `endpoints[1]` at `n_max`.
    Interpolated {
        endpoints: [f64; 2],
    },
    /// Linear rise from `base` to `peak` at `peak_degree`, then back to `base`.
    Peaked {
        base: f64,
        peak: f64,
        peak_degree: usize,
    },
}

/// Builds an [`AlphaProfile`] over `degrees` from its description.
pub fn alpha_profile(config: &AlphaConfig, degrees: &DegreeRange) -> Result<AlphaProfile> {
    let len = degrees.len();
    let ext = config.extended;
    match &config.shape {
        AlphaShape::Constant { value } => {
            AlphaProfile::explicit(vec![*value; len], Some(config.tail.unwrap_or(*value)), ext)
        }
        AlphaShape::Explicit { values } => {
            if values.len() != len {
                return Err(Error::Config(format!(
                    "alpha lists {} values for {len} degrees",
                    values.len()
                )));
            }
            AlphaProfile::explicit(values.clone(), config.tail, ext)
        }
        AlphaShape::Interpolated { endpoints } => {
            AlphaProfile::interpolated(endpoints[0], endpoints[1], len, config.tail, ext)
        }
        AlphaShape::Peaked {
            base,
            peak,
            peak_degree,
        } => {
            if !degrees.contains(*peak_degree) {
                return Err(Error::Config(format!(
                    "peak degree {peak_degree} outside {}..={}",
                    degrees.n_min, degrees.n_max
                )));
            }
            AlphaProfile::peaked(
                *base,
                *peak,
                peak_degree - degrees.n_min,
                len,
                config.tail,
                ext,
            )
        }
    }
}

impl ModelConfig {
    /// Expands generators and validates the result.
    pub fn build(&self) -> Result<SpectralModel> {
        build_spharma(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// The null SPHARMA(1,1) model with the closed-form generators on
    /// degrees 1..=8 and unit innovations.
    pub fn paper_h0() -> Self {
        Self {
            degrees: DegreeRange { n_min: 1, n_max: 8 },
            arma: ArmaConfig {
                p: 1,
                q: 1,
                phi: CoefficientSource::Generator(Generator::PaperAr),
                psi: CoefficientSource::Generator(Generator::PaperMa),
            },
            innovation: InnovationConfig::default(),
            alpha: AlphaConfig::default(),
        }
    }

    /// Reference LRD examples 1–4 layered on [`ModelConfig::paper_h0`].
    pub fn example(number: u8) -> Result<Self> {
        let (shape, tail, extended) = match number {
            1 => (
                AlphaShape::Interpolated {
                    endpoints: [0.4733, 0.2678],
                },
                0.2678,
                false,
            ),
            2 => (
                AlphaShape::Interpolated {
                    endpoints: [0.2550, 0.3327],
                },
                0.2550,
                false,
            ),
            3 => (
                AlphaShape::Peaked {
                    base: 0.2753,
                    peak: 0.4,
                    peak_degree: 5,
                },
                0.2753,
                false,
            ),
            4 => (
                AlphaShape::Peaked {
                    base: 0.3041,
                    peak: 0.9982,
                    peak_degree: 8,
                },
                0.3041,
                true,
            ),
            _ => return Err(Error::Config(format!("no reference example {number}"))),
        };
        Ok(Self {
            alpha: AlphaConfig {
                shape,
                tail: Some(tail),
                extended,
            },
            ..Self::paper_h0()
        })
    }
}

/// Builds a validated [`SpectralModel`] from a configuration document.
pub fn build_spharma(config: &ModelConfig) -> Result<SpectralModel> {
    let degrees = config.degrees;
    degrees.validate()?;
    let expand = |src: &CoefficientSource, order: usize, what: &str| -> Result<Vec<Vec<f64>>> {
        let lists = match src {
            CoefficientSource::Explicit(v) if v.is_empty() && order == 0 => {
                vec![Vec::new(); degrees.len()]
            }
            CoefficientSource::Explicit(v) => v.clone(),
            CoefficientSource::Generator(g) => g.expand(&degrees)?,
        };
        if lists.len() != degrees.len() {
            return Err(Error::Config(format!(
                "{what} covers {} degrees, expected {}",
                lists.len(),
                degrees.len()
            )));
        }
        if let Some(bad) = lists.iter().position(|l| l.len() != order) {
            return Err(Error::Config(format!(
                "{what} for degree {} has {} lags, expected {order}",
                degrees.n_min + bad,
                lists[bad].len()
            )));
        }
        Ok(lists)
    };
    let phi = expand(&config.arma.phi, config.arma.p, "phi")?;
    let psi = expand(&config.arma.psi, config.arma.q, "psi")?;
    let innov = match &config.innovation {
        InnovationConfig::List(v) => v.clone(),
        InnovationConfig::Constant { constant } => vec![*constant; degrees.len()],
        InnovationConfig::PowerDecay { scale, exponent } => degrees
            .degrees()
            .map(|n| scale * (n.max(1) as f64).powf(-exponent))
            .collect(),
    };
    let alpha = alpha_profile(&config.alpha, &degrees)?;
    SpectralModel::new(degrees, phi, psi, innov, alpha)
}
