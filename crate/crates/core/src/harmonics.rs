//! Laplace–Beltrami eigenbasis bookkeeping on the sphere S².
//!
//! Coefficients are stored per degree `n` in order index `j = 1..=2n+1`.
//! The real orthonormal basis is used, normalised against the probability
//! measure `dν = sinθ dθ dφ / 4π`, so the constant harmonic equals 1.
//! Order index `j` maps to the signed order `m = j - n - 1`; `m = 0` is the
//! zonal harmonic, `m > 0` carries `cos(mφ)` and `m < 0` carries
//! `sin(|m|φ)`.

use std::f64::consts::{PI, SQRT_2};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimension Γ(n, d) of the degree-`n` eigenspace. Only `d = 2` is supported.
pub fn eigenspace_dim(n: usize, d: usize) -> Result<usize> {
    if d != 2 {
        return Err(Error::UnsupportedDimension(d));
    }
    Ok(2 * n + 1)
}

/// Contiguous range of spherical-harmonic degrees `n_min..=n_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeRange {
    pub n_min: usize,
    pub n_max: usize,
}

impl DegreeRange {
    pub fn new(n_min: usize, n_max: usize) -> Result<Self> {
        if n_min > n_max {
            return Err(Error::InvalidDegreeRange(format!(
                "n_min={n_min} exceeds n_max={n_max}"
            )));
        }
        Ok(Self { n_min, n_max })
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.n_min, self.n_max).map(|_| ())
    }

    /// Number of degrees in the range.
    pub fn len(&self) -> usize {
        self.n_max - self.n_min + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, n: usize) -> bool {
        (self.n_min..=self.n_max).contains(&n)
    }

    pub fn degrees(&self) -> impl Iterator<Item = usize> + Clone {
        self.n_min..=self.n_max
    }

    /// Total number of harmonic coefficients D = Σ (2n+1).
    pub fn dim(&self) -> usize {
        self.degrees().map(|n| 2 * n + 1).sum()
    }

    /// Column offset of the first order of degree `n`.
    pub fn offset(&self, n: usize) -> usize {
        debug_assert!(self.contains(n));
        // Σ_{k=n_min}^{n-1} (2k+1) = n² - n_min²
        n * n - self.n_min * self.n_min
    }

    /// Column of a harmonic index, or an error if it lies outside the range.
    pub fn column(&self, idx: HarmonicIndex) -> Result<usize> {
        if !self.contains(idx.n) || idx.j == 0 || idx.j > 2 * idx.n + 1 {
            return Err(Error::InvalidIndex { n: idx.n, j: idx.j });
        }
        Ok(self.offset(idx.n) + idx.j - 1)
    }

    /// Harmonic index of a column.
    pub fn index(&self, column: usize) -> HarmonicIndex {
        debug_assert!(column < self.dim());
        // n² - n_min² <= column  <=>  n = floor(sqrt(column + n_min²))
        let shifted = column + self.n_min * self.n_min;
        let mut n = (shifted as f64).sqrt() as usize;
        while n * n > shifted {
            n -= 1;
        }
        while (n + 1) * (n + 1) <= shifted {
            n += 1;
        }
        HarmonicIndex {
            n,
            j: shifted - n * n + 1,
        }
    }

    /// All indices in column order (n ascending, j ascending).
    pub fn indices(&self) -> impl Iterator<Item = HarmonicIndex> + '_ {
        self.degrees()
            .flat_map(|n| (1..=2 * n + 1).map(move |j| HarmonicIndex { n, j }))
    }
}

/// Basis element `S_{n,j}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HarmonicIndex {
    pub n: usize,
    pub j: usize,
}

impl HarmonicIndex {
    pub fn new(n: usize, j: usize) -> Result<Self> {
        if j == 0 || j > 2 * n + 1 {
            return Err(Error::InvalidIndex { n, j });
        }
        Ok(Self { n, j })
    }

    /// Signed order `m ∈ [-n, n]`.
    pub fn order(&self) -> i64 {
        self.j as i64 - self.n as i64 - 1
    }

    /// Index of the zonal (m = 0) harmonic of degree `n`.
    pub fn zonal(n: usize) -> Self {
        Self { n, j: n + 1 }
    }
}

impl std::fmt::Display for HarmonicIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.n, self.j)
    }
}

/// Tensor grid of colatitudes θ ∈ [0, π] and longitudes φ ∈ [0, 2π).
#[derive(Debug, Clone, PartialEq)]
pub struct SphereGrid {
    colatitudes: Vec<f64>,
    longitudes: Vec<f64>,
}

impl SphereGrid {
    pub fn new(colatitudes: Vec<f64>, longitudes: Vec<f64>) -> Result<Self> {
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        if colatitudes.is_empty() || longitudes.is_empty() {
            return Err(Error::Config("sphere grid axes must be nonempty".into()));
        }
        if !increasing(&colatitudes) || !increasing(&longitudes) {
            return Err(Error::Config(
                "sphere grid nodes must be strictly increasing".into(),
            ));
        }
        if colatitudes[0] < 0.0 || *colatitudes.last().unwrap() > PI {
            return Err(Error::Config("colatitudes must lie in [0, π]".into()));
        }
        if longitudes[0] < 0.0 || *longitudes.last().unwrap() >= 2.0 * PI {
            return Err(Error::Config("longitudes must lie in [0, 2π)".into()));
        }
        Ok(Self {
            colatitudes,
            longitudes,
        })
    }

    /// Equispaced grid: `n_theta` cell-centred colatitudes and `n_phi`
    /// longitudes starting at 0.
    pub fn regular(n_theta: usize, n_phi: usize) -> Result<Self> {
        let theta = (0..n_theta)
            .map(|i| PI * (i as f64 + 0.5) / n_theta as f64)
            .collect();
        let phi = (0..n_phi)
            .map(|k| 2.0 * PI * k as f64 / n_phi as f64)
            .collect();
        Self::new(theta, phi)
    }

    pub fn colatitudes(&self) -> &[f64] {
        &self.colatitudes
    }

    pub fn longitudes(&self) -> &[f64] {
        &self.longitudes
    }
}

/// Normalised associated Legendre values `Q_n^m(cos θ)` for all
/// `m <= n <= n_max`, with `Q_n^m = sqrt((2n+1)(n-m)!/(n+m)!) P_n^m` and no
/// Condon–Shortley phase. Returned as a lower-triangular table indexed
/// `[n][m]`.
pub fn normalized_legendre_table(n_max: usize, colatitude: f64) -> Vec<Vec<f64>> {
    let x = colatitude.cos();
    let s = colatitude.sin().abs();
    let mut table: Vec<Vec<f64>> = (0..=n_max).map(|n| vec![0.0; n + 1]).collect();
    table[0][0] = 1.0;
    // sectoral diagonal
    for m in 1..=n_max {
        let mf = m as f64;
        table[m][m] = ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s * table[m - 1][m - 1];
    }
    for m in 0..=n_max {
        if m < n_max {
            table[m + 1][m] = (2.0 * m as f64 + 3.0).sqrt() * x * table[m][m];
        }
        for n in (m + 2)..=n_max {
            let nf = n as f64;
            let mf = m as f64;
            let a = ((4.0 * nf * nf - 1.0) / (nf * nf - mf * mf)).sqrt();
            let b = (((nf - 1.0) * (nf - 1.0) - mf * mf) / (4.0 * (nf - 1.0) * (nf - 1.0) - 1.0))
                .sqrt();
            table[n][m] = a * (x * table[n - 1][m] - b * table[n - 2][m]);
        }
    }
    table
}

/// Real orthonormal spherical harmonic `S_{n,j}(θ, φ)` under `dν`.
pub fn real_harmonic_eval(idx: HarmonicIndex, colatitude: f64, longitude: f64) -> f64 {
    let table = normalized_legendre_table(idx.n, colatitude);
    harmonic_from_table(&table, idx, longitude)
}

fn harmonic_from_table(table: &[Vec<f64>], idx: HarmonicIndex, longitude: f64) -> f64 {
    let m = idx.order();
    let q = table[idx.n][m.unsigned_abs() as usize];
    match m.signum() {
        0 => q,
        1 => SQRT_2 * q * (m as f64 * longitude).cos(),
        _ => SQRT_2 * q * ((-m) as f64 * longitude).sin(),
    }
}

/// Evaluates every basis function of `degrees` at one point, in column order.
pub fn eval_all(degrees: &DegreeRange, colatitude: f64, longitude: f64) -> Vec<f64> {
    let table = normalized_legendre_table(degrees.n_max, colatitude);
    degrees
        .indices()
        .map(|idx| harmonic_from_table(&table, idx, longitude))
        .collect()
}

/// Field values `Σ c_{n,j} S_{n,j}(θ, φ)` on a grid, shape `(n_theta, n_phi)`.
pub fn synthesize_field(
    degrees: &DegreeRange,
    coeffs: &[f64],
    grid: &SphereGrid,
) -> Result<Array2<f64>> {
    let dim = degrees.dim();
    if coeffs.len() != dim {
        return Err(Error::LengthMismatch {
            expected: dim,
            got: coeffs.len(),
        });
    }
    let thetas = grid.colatitudes();
    let phis = grid.longitudes();
    let mut field = Array2::zeros((thetas.len(), phis.len()));
    for (it, &theta) in thetas.iter().enumerate() {
        let table = normalized_legendre_table(degrees.n_max, theta);
        for (ip, &phi) in phis.iter().enumerate() {
            field[[it, ip]] = degrees
                .indices()
                .zip(coeffs)
                .map(|(idx, c)| c * harmonic_from_table(&table, idx, phi))
                .sum();
        }
    }
    Ok(field)
}
