use std::fs;

use spharma_lrd::harness::{self, ExperimentConfig, ExperimentKind, Manifest, McTable};
use spharma_lrd::ModelConfig;

fn rates(table: &McTable, t: usize) -> Vec<f64> {
    (1..=8)
        .map(|k| table.value(t, &format!("rate_k{k}")).unwrap())
        .collect()
}

fn norms(model: ModelConfig, ts: Vec<usize>, seed: u64) -> Vec<f64> {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Divergence, model, ts, 1);
    cfg.seed = seed;
    harness::run_divergence(&cfg)
        .unwrap()
        .select("hs_norm")
        .map(|r| r.value)
        .collect()
}

#[test]
fn power_dominates_size() {
    let t = 300;
    let mut size =
        ExperimentConfig::new(ExperimentKind::Size, ModelConfig::paper_h0(), vec![t], 200);
    size.seed = 401;
    let mut power = ExperimentConfig::new(
        ExperimentKind::Power,
        ModelConfig::example(1).unwrap(),
        vec![t],
        200,
    );
    power.seed = 401;
    let s = rates(&harness::run_size(&size).unwrap(), t);
    let p = rates(&harness::run_power(&power).unwrap(), t);
    for (k, (a, b)) in s.iter().zip(&p).enumerate() {
        assert!(b >= a, "k{}: power {b} < size {a}", k + 1);
    }
}

#[test]
fn null_norm_stays_bounded() {
    let v = norms(ModelConfig::paper_h0(), vec![1000, 5000, 10000], 402);
    assert!(v[2] / v[0] < 20.0, "H0 norm ratio {}", v[2] / v[0]);
}

#[test]
fn stronger_memory_gives_larger_norm() {
    let ex1 = norms(ModelConfig::example(1).unwrap(), vec![1000], 403);
    let ex4 = norms(ModelConfig::example(4).unwrap(), vec![1000], 403);
    assert!(
        ex4[0] > ex1[0],
        "Example 4 {} <= Example 1 {}",
        ex4[0],
        ex1[0]
    );
}

#[test]
fn lrd_shifts_the_dominant_eigenspace() {
    let mut cfg = ExperimentConfig::new(
        ExperimentKind::Distribution,
        ModelConfig::example(1).unwrap(),
        vec![1000],
        200,
    );
    cfg.seed = 404;
    let table = harness::run_distribution(&cfg).unwrap();
    let ks = table.value(1000, "ks_n1").unwrap();
    let m = table.value(1000, "mean_n1").unwrap();
    assert!(ks > 0.1 && m > 0.0, "ks {ks} mean {m}");
}

#[test]
fn config_file_with_model_path() {
    let dir = tempfile::tempdir().unwrap();
    let model = serde_json::to_string(&ModelConfig::paper_h0()).unwrap();
    fs::write(dir.path().join("h0.json"), model).unwrap();
    let cfg_text =
        r#"{"experiment": "size", "model": "h0.json", "T": [128], "replications": 16, "seed": 5}"#;
    let path = dir.path().join("size.json");
    fs::write(&path, cfg_text).unwrap();
    let cfg = ExperimentConfig::load(&path).unwrap();
    let table = harness::run(&cfg).unwrap();
    assert_eq!(table.select("rate_k1").count(), 1);
    let manifest = Manifest::new(&cfg, &table).unwrap();
    assert_eq!(manifest.config_sha256, cfg.hash().unwrap());
    assert_eq!(manifest.rows, 8);
    assert_eq!(manifest.seed, 5);
    let again = harness::run(&ExperimentConfig::load(&path).unwrap()).unwrap();
    assert_eq!(table.to_csv(), again.to_csv());
}
