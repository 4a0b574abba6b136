use proptest::prelude::*;
use spharma_lrd::lrdtest::{
    bandwidth, default_directions, draw_direction, projected_hs_norm, window_indices,
    BandwidthRule, CalibrationMode, CalibrationOptions, LrdTest, MeanMethod, NullCalibration,
    StatisticCoeffs, StatisticWeights, VarianceTable,
};
use spharma_lrd::simulate::simulate_panel;
use spharma_lrd::spectral::fdft_panel;
use spharma_lrd::stats::{ks_critical, ks_uniform, mean, ols_slope, variance};
use spharma_lrd::{
    DegreeRange, FracFilterSpec, HarmonicIndex, ModelConfig, SeedSpec, SmoothingSpec, SpectralModel,
};

fn h0(n_max: usize) -> SpectralModel {
    ModelConfig {
        degrees: DegreeRange::new(1, n_max).unwrap(),
        ..ModelConfig::paper_h0()
    }
    .build()
    .unwrap()
}

fn idx(n: usize, j: usize) -> HarmonicIndex {
    HarmonicIndex::new(n, j).unwrap()
}

#[test]
fn null_moments_match_monte_carlo() {
    let model = h0(2);
    let t = 2000;
    let smoothing =
        SmoothingSpec::epanechnikov(BandwidthRule::Beta(0.25).bandwidth(t).unwrap()).unwrap();
    let weights = StatisticWeights::new(t, &smoothing).unwrap();
    let calib = NullCalibration::new(&model, t, &smoothing, CalibrationOptions::default()).unwrap();
    let reps = 1000;
    let pairs = [
        (idx(1, 1), idx(1, 1)),
        (idx(2, 3), idx(2, 3)),
        (idx(1, 2), idx(2, 4)),
    ];
    let mut samples = vec![Vec::with_capacity(reps); pairs.len()];
    for r in 0..reps {
        let panel = simulate_panel(
            &model,
            t,
            SeedSpec::new(301, r as u64),
            FracFilterSpec::default(),
        )
        .unwrap();
        let dft = fdft_panel(&panel).unwrap();
        let degrees = panel.degrees();
        for (k, (a, b)) in pairs.iter().enumerate() {
            let s = weights.entry(
                &dft,
                degrees.column(*a).unwrap(),
                degrees.column(*b).unwrap(),
            );
            samples[k].push(s.re);
        }
    }
    for ((a, b), xs) in pairs.iter().zip(&samples) {
        let m = calib.moments(*a, *b).unwrap();
        let se = (variance(xs) / reps as f64).sqrt();
        assert!(
            (mean(xs) - m.mean).abs() < 3.0 * se,
            "{a}x{b}: mean {} vs {} (se {se})",
            mean(xs),
            m.mean
        );
        let rel = variance(xs) / m.variance - 1.0;
        assert!(rel.abs() < 0.15, "{a}x{b}: variance ratio off by {rel}");
    }
}

#[test]
fn null_p_values_are_uniform() {
    let model = h0(3);
    let t = 500;
    let smoothing =
        SmoothingSpec::epanechnikov(BandwidthRule::Beta(0.25).bandwidth(t).unwrap()).unwrap();
    let test = LrdTest::from_model(
        &model,
        t,
        &smoothing,
        CalibrationOptions::default(),
        0.05,
        false,
    )
    .unwrap();
    let degrees = model.degrees();
    let random = draw_direction(
        &VarianceTable::unit(degrees),
        degrees,
        SeedSpec::new(302, 0),
        0,
    )
    .unwrap();
    let mut directions = default_directions();
    directions.truncate(1);
    directions.push(random);
    let reps = 2000;
    let mut p = vec![Vec::with_capacity(reps); directions.len()];
    for r in 0..reps {
        let panel = simulate_panel(
            &model,
            t,
            SeedSpec::new(303, r as u64),
            FracFilterSpec::default(),
        )
        .unwrap();
        let report = test
            .random_projection(&fdft_panel(&panel).unwrap(), &directions)
            .unwrap();
        for (k, e) in report.entries.iter().enumerate() {
            p[k].push(e.p_value);
        }
    }
    let crit = ks_critical(reps, 0.01);
    for (d, ps) in directions.iter().zip(&p) {
        let ks = ks_uniform(ps);
        assert!(ks < crit, "{}: ks {ks} >= {crit}", d.label);
    }
}

#[test]
fn standardized_statistic_is_scale_invariant() {
    let model = h0(3);
    let t = 400;
    let panel =
        simulate_panel(&model, t, SeedSpec::new(304, 0), FracFilterSpec::default()).unwrap();
    let smoothing = SmoothingSpec::epanechnikov(0.2).unwrap();
    let run = |m: &SpectralModel, c: f64| {
        LrdTest::from_model(m, t, &smoothing, CalibrationOptions::default(), 0.05, false)
            .unwrap()
            .random_projection(
                &fdft_panel(&panel.scaled(c)).unwrap(),
                &default_directions(),
            )
            .unwrap()
    };
    let base = run(&model, 1.0);
    for c in [0.01, 3.0, 250.0] {
        let scaled = run(&model.scale_innovations(c * c).unwrap(), c);
        for (x, y) in base.entries.iter().zip(&scaled.entries) {
            assert!((x.z - y.z).abs() < 1e-8, "c={c}: {} vs {}", x.z, y.z);
        }
    }
}

#[test]
fn alternative_mean_grows_with_sample_size() {
    // along B_T = T^{-1/4}, the analytic mean must grow at least like B_T^{-l_α - 1/2}
    let model = ModelConfig::example(1).unwrap().build().unwrap();
    let l_alpha = model.alpha_profile().l_alpha().unwrap();
    let options = CalibrationOptions {
        nodes: 4096,
        mode: CalibrationMode::Alternative,
        mean: MeanMethod::Quadrature,
    };
    let ts = [1_000usize, 10_000, 100_000];
    let mut log_inv_b = Vec::new();
    let mut log_mean = vec![Vec::new(); 8];
    for t in ts {
        let b = BandwidthRule::Beta(0.25).bandwidth(t).unwrap();
        let calib =
            NullCalibration::new(&model, t, &SmoothingSpec::epanechnikov(b).unwrap(), options)
                .unwrap();
        log_inv_b.push(-b.ln());
        for (k, n) in (1..=8).enumerate() {
            log_mean[k].push(calib.diagonal_mean(n).ln());
        }
    }
    for (k, ys) in log_mean.iter().enumerate() {
        let slope = ols_slope(&log_inv_b, ys);
        assert!(
            slope >= l_alpha + 0.5,
            "n={}: slope {slope} < {}",
            k + 1,
            l_alpha + 0.5
        );
    }
}

#[test]
fn calibration_refuses_lrd_models() {
    let model = ModelConfig::example(2).unwrap().build().unwrap();
    let smoothing = SmoothingSpec::epanechnikov(0.2).unwrap();
    assert!(NullCalibration::new(&model, 500, &smoothing, CalibrationOptions::default()).is_err());
    let srd = CalibrationOptions {
        mode: CalibrationMode::SrdPart,
        ..CalibrationOptions::default()
    };
    assert!(NullCalibration::new(&model, 500, &smoothing, srd).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn statistic_is_hermitian_and_quadratic(seed in 0u64..1000, c in 0.1f64..20.0, t in 64usize..300) {
        let model = h0(2);
        let panel = simulate_panel(&model, t, SeedSpec::new(seed, 1), FracFilterSpec::default()).unwrap();
        let b = bandwidth(t, BandwidthRule::Beta(0.25)).unwrap();
        let weights = StatisticWeights::new(t, &SmoothingSpec::epanechnikov(b).unwrap()).unwrap();
        let degrees = panel.degrees();
        let s = StatisticCoeffs::compute(&fdft_panel(&panel).unwrap(), &weights, degrees).unwrap();
        let sc = StatisticCoeffs::compute(&fdft_panel(&panel.scaled(c)).unwrap(), &weights, degrees).unwrap();
        let m = s.matrix();
        for a in 0..degrees.dim() {
            prop_assert!(m[[a, a]].im.abs() < 1e-12 * (1.0 + m[[a, a]].re.abs()));
            prop_assert!(m[[a, a]].re >= 0.0);
            for b in 0..degrees.dim() {
                prop_assert!((m[[a, b]] - m[[b, a]].conj()).norm() <= 1e-12 * (1.0 + m[[a, b]].norm()));
                prop_assert!((sc.matrix()[[a, b]] - m[[a, b]] * c * c).norm() <= 1e-9 * (1.0 + (m[[a, b]] * c * c).norm()));
            }
        }
        let norm = projected_hs_norm(&s, 2);
        prop_assert!((projected_hs_norm(&sc, 2) - c * c * norm).abs() <= 1e-9 * (1.0 + c * c * norm));
    }

    #[test]
    fn bandwidth_rule_properties(t in 2usize..100_000, beta in 0.01f64..0.99) {
        let b = bandwidth(t, BandwidthRule::Beta(beta)).unwrap();
        prop_assert!(b > 0.0 && b <= 1.0);
        prop_assert!((b - (t as f64).powf(-beta)).abs() < 1e-12);
        let window = window_indices(t, b).unwrap();
        prop_assert!(window.iter().all(|r| r.unsigned_abs() as f64 * 2.0 * std::f64::consts::PI / t as f64 <= b.sqrt() / 2.0 + 1e-12));
    }

    #[test]
    fn direction_draws_are_reproducible(seed in 0u64..10_000, k in 0u32..16) {
        let degrees = DegreeRange::new(1, 3).unwrap();
        let table = VarianceTable::unit(degrees);
        let a = draw_direction(&table, degrees, SeedSpec::new(seed, 0), k).unwrap();
        let b = draw_direction(&table, degrees, SeedSpec::new(seed, 0), k).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.terms.len(), degrees.dim() * degrees.dim());
    }
}
