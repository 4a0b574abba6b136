use spharma_lrd::io::{load_panel, save_panel, write_spectrum, PanelLayout};
use spharma_lrd::simulate::simulate_panel;
use spharma_lrd::spectral::{fdft_panel, spectrum_table};
use spharma_lrd::{FracFilterSpec, HarmonicIndex, ModelConfig, SeedSpec, SmoothingSpec};

#[test]
fn simulated_panel_survives_csv() {
    let model = ModelConfig::example(2).unwrap().build().unwrap();
    let frac = FracFilterSpec {
        truncation: 200,
        burn_in: 100,
    };
    let panel = simulate_panel(&model, 40, SeedSpec::new(501, 0), frac).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for layout in [PanelLayout::Long, PanelLayout::Wide] {
        let path = dir.path().join(format!("{layout:?}.csv"));
        save_panel(&panel, layout, &path).unwrap();
        let back = load_panel(&path, layout).unwrap();
        for (x, y) in panel.data().iter().zip(back.data()) {
            assert!((x - y).abs() <= 1e-15 * x.abs().max(1e-300), "{x} vs {y}");
        }
    }
}

#[test]
fn spectrum_csv_rows() {
    let model = ModelConfig::paper_h0().build().unwrap();
    let panel =
        simulate_panel(&model, 64, SeedSpec::new(502, 0), FracFilterSpec::default()).unwrap();
    let dft = fdft_panel(&panel).unwrap();
    let a = HarmonicIndex::new(1, 1).unwrap();
    let b = HarmonicIndex::new(2, 3).unwrap();
    let omegas = [0.1, 0.5, 2.0];
    let spec = SmoothingSpec::epanechnikov(0.3).unwrap();
    let rows = spectrum_table(&dft, &[(a, a), (a, b)], &omegas, &spec).unwrap();
    assert_eq!(rows.len(), 6);
    let mut buf = Vec::new();
    write_spectrum(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("omega,a_n,a_j,b_n,b_j,re,im\n"));
    assert_eq!(text.lines().count(), rows.len() + 1);
}
