use std::f64::consts::PI;

use proptest::prelude::*;
use spharma_lrd::quadrature::midpoint;
use spharma_lrd::simulate::simulate_panel;
use spharma_lrd::spectral::{
    fdft_panel, fdft_panel_direct, fejer_kernel, smoothed_cross_spectrum, GridSmoother,
};
use spharma_lrd::{
    AlphaProfile, CoefficientPanel, DegreeRange, FracFilterSpec, HarmonicIndex, SeedSpec,
    SmoothingSpec, SpectralModel,
};

fn white_noise(degrees: DegreeRange, sigma2: f64) -> SpectralModel {
    let k = degrees.len();
    SpectralModel::new(
        degrees,
        vec![vec![0.0]; k],
        vec![vec![0.0]; k],
        vec![sigma2; k],
        AlphaProfile::zero(k),
    )
    .unwrap()
}

fn panel_from(values: &[f64], t: usize) -> CoefficientPanel {
    let degrees = DegreeRange::new(0, 1).unwrap();
    let cols = (0..degrees.dim())
        .map(|c| (0..t).map(|i| values[(c * t + i) % values.len()]).collect())
        .collect();
    CoefficientPanel::from_columns(degrees, cols).unwrap()
}

#[test]
fn fejer_kernel_has_unit_mass() {
    for t in [1, 2, 7, 64, 500] {
        let (nodes, h) = midpoint(-PI, PI, 4096);
        let mass = nodes.iter().map(|w| fejer_kernel(*w, t)).sum::<f64>() * h / (2.0 * PI);
        assert!((mass - 1.0).abs() < 1e-6, "T={t}: {mass}");
    }
}

#[test]
fn flat_spectrum_smoothed_mean() {
    let sigma2 = 2.0;
    let model = white_noise(DegreeRange::new(1, 1).unwrap(), sigma2);
    let spec = SmoothingSpec::epanechnikov(0.2).unwrap();
    let t = 1024;
    let reps = 200;
    let mut acc = 0.0;
    for r in 0..reps {
        let panel =
            simulate_panel(&model, t, SeedSpec::new(201, r), FracFilterSpec::default()).unwrap();
        let dft = fdft_panel(&panel).unwrap();
        for j in 1..=3 {
            let b = HarmonicIndex::new(1, j).unwrap();
            acc += smoothed_cross_spectrum(&dft, b, b, 1.0, &spec).unwrap().re;
        }
    }
    let got = acc / (3 * reps) as f64;
    let expected = sigma2 / (2.0 * PI);
    assert!((got / expected - 1.0).abs() < 0.05, "{got} vs {expected}");
}

#[test]
fn cross_degree_mean_vanishes() {
    let model = white_noise(DegreeRange::new(1, 2).unwrap(), 1.0);
    let spec = SmoothingSpec::epanechnikov(0.2).unwrap();
    let (a, b) = (
        HarmonicIndex::new(1, 2).unwrap(),
        HarmonicIndex::new(2, 4).unwrap(),
    );
    let reps = 300;
    let mut values = Vec::with_capacity(reps);
    for r in 0..reps {
        let panel = simulate_panel(
            &model,
            512,
            SeedSpec::new(202, r as u64),
            FracFilterSpec::default(),
        )
        .unwrap();
        let dft = fdft_panel(&panel).unwrap();
        values.push(smoothed_cross_spectrum(&dft, a, b, 0.8, &spec).unwrap());
    }
    let m = values.iter().sum::<num_complex::Complex64>() / reps as f64;
    let sd = (values.iter().map(|v| (v - m).norm_sqr()).sum::<f64>() / (reps - 1) as f64).sqrt();
    assert!(
        m.norm() < 4.0 * sd / (reps as f64).sqrt(),
        "mean {m} sd {sd}"
    );
}

#[test]
fn grid_smoother_agrees_with_pointwise() {
    let model = white_noise(DegreeRange::new(1, 2).unwrap(), 1.0);
    let panel = simulate_panel(
        &model,
        200,
        SeedSpec::new(203, 0),
        FracFilterSpec::default(),
    )
    .unwrap();
    let dft = fdft_panel(&panel).unwrap();
    let spec = SmoothingSpec::epanechnikov(0.15).unwrap();
    let smoother = GridSmoother::new(200, &spec);
    let degrees = panel.degrees();
    let (a, b) = (degrees.index(1), degrees.index(5));
    let grid = smoother.smooth(&dft, 1, 5);
    for k in [0usize, 3, 50, 117, 199] {
        let omega = 2.0 * PI * k as f64 / 200.0;
        let direct = smoothed_cross_spectrum(&dft, a, b, omega, &spec).unwrap();
        assert!(
            (grid[k] - direct).norm() < 1e-12,
            "k={k}: {} vs {direct}",
            grid[k]
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn parseval(values in prop::collection::vec(-10.0f64..10.0, 16..64), t in 2usize..40) {
        let panel = panel_from(&values, t);
        let dft = fdft_panel(&panel).unwrap();
        for c in 0..panel.degrees().dim() {
            let time: f64 = panel.column(c).iter().map(|v| v * v).sum();
            let freq: f64 = (0..t as i64).map(|s| dft.at(s, c).norm_sqr()).sum::<f64>() * 2.0 * PI;
            prop_assert!((time - freq).abs() <= 1e-10 * time.max(1e-300));
        }
    }

    #[test]
    fn fft_matches_direct_dft(values in prop::collection::vec(-5.0f64..5.0, 8..32), t in 2usize..30) {
        let panel = panel_from(&values, t);
        let fast = fdft_panel(&panel).unwrap();
        let slow = fdft_panel_direct(&panel).unwrap();
        for (x, y) in fast.coeffs().iter().zip(slow.coeffs()) {
            prop_assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn smoothed_spectrum_is_hermitian(seed in 0u64..500, omega in -PI..PI, b in 0.05f64..0.6) {
        let model = white_noise(DegreeRange::new(1, 2).unwrap(), 1.0);
        let panel = simulate_panel(&model, 64, SeedSpec::new(seed, 0), FracFilterSpec::default()).unwrap();
        let dft = fdft_panel(&panel).unwrap();
        let spec = SmoothingSpec::epanechnikov(b).unwrap();
        let (x, y) = (HarmonicIndex::new(1, 3).unwrap(), HarmonicIndex::new(2, 1).unwrap());
        let xy = smoothed_cross_spectrum(&dft, x, y, omega, &spec).unwrap();
        let yx = smoothed_cross_spectrum(&dft, y, x, omega, &spec).unwrap();
        prop_assert!((xy - yx.conj()).norm() < 1e-12);
        let xx = smoothed_cross_spectrum(&dft, x, x, omega, &spec).unwrap();
        prop_assert!(xx.im.abs() < 1e-12 && xx.re >= 0.0);
    }
}
