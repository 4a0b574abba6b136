//! Monte Carlo experiment drivers.
//!
//! Every runner is a pure function of its [`ExperimentConfig`]: replication
//! `r` at the `i`-th sample length draws from stream `(i << 32) | r` of the
//! base seed, and replications are reduced in a fixed block order, so the
//! output does not depend on the number of worker threads.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::harmonics::{DegreeRange, HarmonicIndex};
use crate::lrdtest::{
    default_directions, draw_direction, projected_hs_norm, projected_hs_norm_diagonal_blocks,
    BandwidthRule, CalibrationMode, CalibrationOptions, Direction, LrdTest, MeanMethod,
    StatisticCoeffs, StatisticWeights, VarianceTable,
};
use crate::models::{ModelConfig, SpectralModel};
use crate::rng::SeedSpec;
use crate::simulate::{simulate_panel, CoefficientPanel, FracFilterSpec};
use crate::spectral::{fdft_panel, integrated_weighted_periodogram, GridSmoother, SmoothingSpec};
use crate::stats::{binomial_se, ks_normal, mean, median, ols_slope, variance};

/// Replications reduced together; fixed so results do not depend on the
/// thread count.
const BLOCK: usize = 8;

/// Model given inline or as a path to a model JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelRef {
    Inline(Box<ModelConfig>),
    Path(PathBuf),
}

impl ModelRef {
    /// Loads the referenced model; relative paths are resolved against
    /// `base`.
    pub fn resolve(&self, base: Option<&Path>) -> Result<ModelConfig> {
        match self {
            ModelRef::Inline(m) => Ok((**m).clone()),
            ModelRef::Path(p) => {
                let path = match base {
                    Some(b) if p.is_relative() => b.join(p),
                    _ => p.clone(),
                };
                let text = fs::read_to_string(&path).map_err(|e| {
                    Error::Config(format!("cannot read model {}: {e}", path.display()))
                })?;
                ModelConfig::from_json(&text)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Size,
    Power,
    Distribution,
    Divergence,
    BandwidthSweep,
    Consistency,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Size => "size",
            ExperimentKind::Power => "power",
            ExperimentKind::Distribution => "distribution",
            ExperimentKind::Divergence => "divergence",
            ExperimentKind::BandwidthSweep => "bandwidth_sweep",
            ExperimentKind::Consistency => "consistency",
        }
    }
}

/// Direction family used by size and power experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DirectionSpec {
    /// The eight single-pair directions on degrees 1..=3.
    #[default]
    Default,
    /// Explicit single pairs `[[n, j, h, l], ...]`.
    Pairs { pairs: Vec<[usize; 4]> },
    /// Gaussian directions with unit variances up to degree `truncation`.
    Random { count: u32, truncation: usize },
}

/// Single seeded realization or median over replications.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    #[default]
    Single,
    Averaged,
}

fn default_level() -> f64 {
    0.05
}
fn default_replications() -> usize {
    1
}
fn default_nodes() -> usize {
    256
}
fn default_bins() -> usize {
    32
}
fn default_bandwidth() -> BandwidthRule {
    BandwidthRule::Beta(0.25)
}

/// Which entries enter projected norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NormProjection {
    /// Every pair `((n,j),(h,l))`.
    #[default]
    AllPairs,
    /// Only the blocks `n = h`.
    SameDegree,
}

/// JSON experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub name: Option<String>,
    pub model: ModelRef,
    /// Overrides the calibration model (defaults to the model itself, or its
    /// SRD part for power experiments).
    #[serde(default)]
    pub calibration_model: Option<ModelRef>,
    #[serde(rename = "T")]
    pub t: Vec<usize>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_bandwidth")]
    pub bandwidth: BandwidthRule,
    /// β grid of the bandwidth sweep.
    #[serde(default)]
    pub betas: Vec<f64>,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub one_sided: bool,
    #[serde(default)]
    pub directions: DirectionSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub frac: FracFilterSpec,
    #[serde(default)]
    pub mode: NormMode,
    /// Degree truncation of projected norms (defaults to the model's n_max).
    #[serde(default)]
    pub norm_degree: Option<usize>,
    #[serde(default)]
    pub norm: NormProjection,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default)]
    pub mean: MeanMethod,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
}

impl ExperimentConfig {
    pub fn new(
        experiment: ExperimentKind,
        model: ModelConfig,
        t: Vec<usize>,
        replications: usize,
    ) -> Self {
        Self {
            experiment,
            name: None,
            model: ModelRef::Inline(Box::new(model)),
            calibration_model: None,
            t,
            replications,
            bandwidth: default_bandwidth(),
            betas: Vec::new(),
            level: default_level(),
            one_sided: false,
            directions: DirectionSpec::Default,
            seed: 0,
            frac: FracFilterSpec::default(),
            mode: NormMode::Single,
            norm_degree: None,
            norm: NormProjection::AllPairs,
            nodes: default_nodes(),
            mean: MeanMethod::Exact,
            histogram_bins: default_bins(),
        }
    }

    /// Reads a config file and inlines any model paths.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text, path.parent())
    }

    pub fn from_json(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg: Self = serde_json::from_str(text)?;
        cfg.model = ModelRef::Inline(Box::new(cfg.model.resolve(base)?));
        if let Some(c) = &cfg.calibration_model {
            cfg.calibration_model = Some(ModelRef::Inline(Box::new(c.resolve(base)?)));
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be >= 1".into()));
        }
        if self.t.is_empty() {
            return Err(Error::Config(
                "at least one sample length T is required".into(),
            ));
        }
        for &t in &self.t {
            if t < 2 {
                return Err(Error::Config(format!("T={t} is too short")));
            }
            if t < 64 {
                log::warn!("T={t} is below 64; asymptotic calibration may be poor");
            }
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!(
                "level must lie in (0, 1), got {}",
                self.level
            )));
        }
        if self.nodes == 0 || self.histogram_bins == 0 {
            return Err(Error::Config(
                "nodes and histogram_bins must be positive".into(),
            ));
        }
        self.frac.validate()
    }

    pub fn model(&self) -> Result<SpectralModel> {
        self.model.resolve(None)?.build()
    }

    fn calibration(&self) -> Result<Option<SpectralModel>> {
        self.calibration_model
            .as_ref()
            .map(|m| m.resolve(None)?.build())
            .transpose()
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> Result<String> {
        let canonical = serde_json::to_string(self)?;
        let digest = Sha256::digest(canonical.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    fn label(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.experiment.name().to_string())
    }

    fn stream(&self, t_index: usize, rep: usize) -> SeedSpec {
        SeedSpec::new(self.seed, ((t_index as u64) << 32) | rep as u64)
    }
}

/// One output row. Aggregate rows (fitted slopes) use `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub experiment: String,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "R")]
    pub r: usize,
    pub beta: f64,
    pub key: String,
    pub value: f64,
    pub se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct McTable {
    pub rows: Vec<McRow>,
}

impl McTable {
    pub fn push(
        &mut self,
        experiment: &str,
        t: usize,
        r: usize,
        beta: f64,
        key: impl Into<String>,
        value: f64,
        se: Option<f64>,
    ) {
        self.rows.push(McRow {
            experiment: experiment.to_string(),
            t,
            r,
            beta,
            key: key.into(),
            value,
            se,
        });
    }

    /// Value of the first row with this `(T, key)`.
    pub fn value(&self, t: usize, key: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.t == t && r.key == key)
            .map(|r| r.value)
    }

    /// Rows matching `key`, in table order.
    pub fn select<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a McRow> + 'a {
        self.rows.iter().filter(move |r| r.key == key)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("experiment,T,R,beta,key,value,se\n");
        for r in &self.rows {
            let se = r.se.map(|s| format!("{s:.10e}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{:.10e},{}\n",
                r.experiment, r.t, r.r, r.beta, r.key, r.value, se
            ));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Provenance written next to each table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub config_sha256: String,
    pub seed: u64,
    pub library_version: String,
    pub rows: usize,
}

impl Manifest {
    pub fn new(cfg: &ExperimentConfig, table: &McTable) -> Result<Self> {
        Ok(Self {
            experiment: cfg.label(),
            config_sha256: cfg.hash()?,
            seed: cfg.seed,
            library_version: crate::VERSION.to_string(),
            rows: table.rows.len(),
        })
    }
}

/// Dispatches on `config.experiment`.
pub fn run(config: &ExperimentConfig) -> Result<McTable> {
    match config.experiment {
        ExperimentKind::Size => run_size(config),
        ExperimentKind::Power => run_power(config),
        ExperimentKind::Distribution => run_distribution(config),
        ExperimentKind::Divergence => run_divergence(config),
        ExperimentKind::BandwidthSweep => run_bandwidth_sweep(config),
        ExperimentKind::Consistency => run_consistency(config),
    }
}

/// Maps replications in fixed blocks and folds them in order.
fn fold_replications<A, I, F, G>(r: usize, init: A, map: F, mut fold: G) -> Result<A>
where
    I: Send,
    F: Fn(usize) -> Result<I> + Sync + Send,
    G: FnMut(&mut A, I),
{
    let reps: Vec<usize> = (0..r).collect();
    let blocks: Vec<Vec<I>> = reps
        .par_chunks(BLOCK)
        .map(|chunk| chunk.iter().map(|&i| map(i)).collect::<Result<Vec<I>>>())
        .collect::<Result<_>>()?;
    let mut acc = init;
    for item in blocks.into_iter().flatten() {
        fold(&mut acc, item);
    }
    Ok(acc)
}

fn directions_for(cfg: &ExperimentConfig, degrees: DegreeRange) -> Result<Vec<Direction>> {
    match &cfg.directions {
        DirectionSpec::Default => Ok(default_directions()),
        DirectionSpec::Pairs { pairs } => pairs
            .iter()
            .enumerate()
            .map(|(i, p)| {
                Ok(Direction::single_pair(
                    format!("k{}", i + 1),
                    HarmonicIndex::new(p[0], p[1])?,
                    HarmonicIndex::new(p[2], p[3])?,
                ))
            })
            .collect(),
        DirectionSpec::Random { count, truncation } => {
            let trunc = DegreeRange::new(degrees.n_min, (*truncation).min(degrees.n_max))?;
            let table = VarianceTable::unit(degrees);
            (0..*count)
                .map(|k| draw_direction(&table, trunc, SeedSpec::new(cfg.seed, 0), k))
                .collect()
        }
    }
}

fn rejection_experiment(cfg: &ExperimentConfig, power: bool) -> Result<McTable> {
    cfg.validate()?;
    let model = cfg.model()?;
    let (calib_model, mode) = match cfg.calibration()? {
        Some(m) => (m, CalibrationMode::SrdPart),
        None if power => (model.clone(), CalibrationMode::SrdPart),
        None => {
            if !model.is_null() {
                return Err(Error::Config(
                    "size experiments need a null (α ≡ 0) model".into(),
                ));
            }
            (model.clone(), CalibrationMode::Null)
        }
    };
    let directions = directions_for(cfg, model.degrees())?;
    let label = cfg.label();
    let mut table = McTable::default();
    for (ti, &t) in cfg.t.iter().enumerate() {
        let b = cfg.bandwidth.bandwidth(t)?;
        let smoothing = SmoothingSpec::epanechnikov(b)?;
        let options = CalibrationOptions {
            nodes: cfg.nodes,
            mode,
            mean: cfg.mean,
        };
        let test = LrdTest::from_model(
            &calib_model,
            t,
            &smoothing,
            options,
            cfg.level,
            cfg.one_sided,
        )?;
        let counts = fold_replications(
            cfg.replications,
            vec![0usize; directions.len()],
            |rep| {
                let panel = simulate_panel(&model, t, cfg.stream(ti, rep), cfg.frac)?;
                let report = test.random_projection(&fdft_panel(&panel)?, &directions)?;
                Ok(report
                    .entries
                    .iter()
                    .map(|e| usize::from(e.reject))
                    .collect())
            },
            |acc, x: Vec<usize>| acc.iter_mut().zip(x).for_each(|(a, b)| *a += b),
        )?;
        let beta = cfg.bandwidth.beta(t);
        for (dir, c) in directions.iter().zip(counts) {
            let rate = c as f64 / cfg.replications as f64;
            table.push(
                &label,
                t,
                cfg.replications,
                beta,
                format!("rate_{}", dir.label),
                rate,
                Some(binomial_se(rate, cfg.replications)),
            );
        }
    }
    Ok(table)
}

/// Empirical size per direction under a null model.
pub fn run_size(config: &ExperimentConfig) -> Result<McTable> {
    rejection_experiment(config, false)
}

/// Empirical power per direction, calibrated on the SRD part of the model
/// (or on `calibration_model`).
pub fn run_power(config: &ExperimentConfig) -> Result<McTable> {
    rejection_experiment(config, true)
}

/// Standardized diagonal statistics pooled per eigenspace: KS distance to
/// N(0, 1), mean, variance and a density histogram on [-4, 4].
pub fn run_distribution(config: &ExperimentConfig) -> Result<McTable> {
    let cfg = config;
    cfg.validate()?;
    let model = cfg.model()?;
    let (calib_model, mode) = match cfg.calibration()? {
        Some(m) => (m, CalibrationMode::SrdPart),
        None if model.is_null() => (model.clone(), CalibrationMode::Null),
        None => (model.clone(), CalibrationMode::SrdPart),
    };
    let degrees = model.degrees();
    let pairs: Vec<(HarmonicIndex, HarmonicIndex)> = degrees.indices().map(|i| (i, i)).collect();
    let label = cfg.label();
    let mut table = McTable::default();
    for (ti, &t) in cfg.t.iter().enumerate() {
        let b = cfg.bandwidth.bandwidth(t)?;
        let smoothing = SmoothingSpec::epanechnikov(b)?;
        let options = CalibrationOptions {
            nodes: cfg.nodes,
            mode,
            mean: cfg.mean,
        };
        let test = LrdTest::from_model(
            &calib_model,
            t,
            &smoothing,
            options,
            cfg.level,
            cfg.one_sided,
        )?;
        let zs = fold_replications(
            cfg.replications,
            Vec::new(),
            |rep| {
                let panel = simulate_panel(&model, t, cfg.stream(ti, rep), cfg.frac)?;
                let report = test.projected(&fdft_panel(&panel)?, &pairs)?;
                Ok(report.entries.iter().map(|e| e.z).collect::<Vec<f64>>())
            },
            |acc: &mut Vec<Vec<f64>>, x| acc.push(x),
        )?;
        let beta = cfg.bandwidth.beta(t);
        let r = cfg.replications;
        for n in degrees.degrees() {
            let cols: Vec<usize> = (0..2 * n + 1).map(|j| degrees.offset(n) + j).collect();
            let sample: Vec<f64> = zs
                .iter()
                .flat_map(|z| cols.iter().map(move |&c| z[c]))
                .collect();
            let m = mean(&sample);
            let v = variance(&sample);
            let count = sample.len() as f64;
            table.push(
                &label,
                t,
                r,
                beta,
                format!("ks_n{n}"),
                ks_normal(&sample),
                None,
            );
            table.push(
                &label,
                t,
                r,
                beta,
                format!("mean_n{n}"),
                m,
                Some((v / count).sqrt()),
            );
            table.push(&label, t, r, beta, format!("var_n{n}"), v, None);
            let bins = cfg.histogram_bins;
            let width = 8.0 / bins as f64;
            let mut hist = vec![0usize; bins];
            for z in &sample {
                let k = ((z + 4.0) / width).floor();
                if k >= 0.0 && (k as usize) < bins {
                    hist[k as usize] += 1;
                }
            }
            for (k, c) in hist.iter().enumerate() {
                let lo = -4.0 + k as f64 * width;
                table.push(
                    &label,
                    t,
                    r,
                    beta,
                    format!("hist_n{n}_lo{lo:.3}"),
                    *c as f64 / (count * width),
                    None,
                );
            }
        }
    }
    Ok(table)
}

fn norm_degree(cfg: &ExperimentConfig, degrees: DegreeRange) -> Result<DegreeRange> {
    let n_max = cfg.norm_degree.unwrap_or(degrees.n_max);
    if n_max > degrees.n_max || n_max < degrees.n_min {
        return Err(Error::Config(format!(
            "norm_degree {n_max} outside the model range {}..={}",
            degrees.n_min, degrees.n_max
        )));
    }
    DegreeRange::new(degrees.n_min, n_max)
}

fn hs_norm(
    panel: &CoefficientPanel,
    b: f64,
    range: DegreeRange,
    norm: NormProjection,
) -> Result<f64> {
    let t = panel.len();
    let weights = StatisticWeights::new(t, &SmoothingSpec::epanechnikov(b)?)?;
    let coeffs = StatisticCoeffs::compute(&fdft_panel(panel)?, &weights, range)?;
    Ok(match norm {
        NormProjection::AllPairs => projected_hs_norm(&coeffs, range.n_max),
        NormProjection::SameDegree => projected_hs_norm_diagonal_blocks(&coeffs, range.n_max),
    })
}

fn norm_replications(cfg: &ExperimentConfig) -> usize {
    match cfg.mode {
        NormMode::Single => 1,
        NormMode::Averaged => cfg.replications.max(1),
    }
}

/// Projected HS norm of `S_{B_T}` per T (single realization or median).
pub fn run_divergence(config: &ExperimentConfig) -> Result<McTable> {
    let cfg = config;
    cfg.validate()?;
    let model = cfg.model()?;
    let range = norm_degree(cfg, model.degrees())?;
    let reps = norm_replications(cfg);
    let label = cfg.label();
    let mut table = McTable::default();
    for (ti, &t) in cfg.t.iter().enumerate() {
        let b = cfg.bandwidth.bandwidth(t)?;
        let norms = fold_replications(
            reps,
            Vec::new(),
            |rep| {
                let panel = simulate_panel(&model, t, cfg.stream(ti, rep), cfg.frac)?;
                hs_norm(&panel, b, range, cfg.norm)
            },
            |acc: &mut Vec<f64>, x| acc.push(x),
        )?;
        table.push(
            &label,
            t,
            reps,
            cfg.bandwidth.beta(t),
            "hs_norm",
            median(&norms),
            None,
        );
    }
    Ok(table)
}

/// `‖S_{B_T}‖ / (T B_T)^{1/2}` over the β grid; each T uses one panel (or
/// one panel per replication) shared by every β.
pub fn run_bandwidth_sweep(config: &ExperimentConfig) -> Result<McTable> {
    let cfg = config;
    cfg.validate()?;
    if cfg.betas.is_empty() {
        return Err(Error::Config(
            "bandwidth sweep needs a non-empty betas list".into(),
        ));
    }
    let model = cfg.model()?;
    let range = norm_degree(cfg, model.degrees())?;
    let reps = norm_replications(cfg);
    let label = cfg.label();
    let mut table = McTable::default();
    for (ti, &t) in cfg.t.iter().enumerate() {
        let bands: Vec<f64> = cfg
            .betas
            .iter()
            .map(|&beta| BandwidthRule::Beta(beta).bandwidth(t))
            .collect::<Result<_>>()?;
        let per_rep = fold_replications(
            reps,
            Vec::new(),
            |rep| {
                let panel = simulate_panel(&model, t, cfg.stream(ti, rep), cfg.frac)?;
                bands
                    .iter()
                    .map(|&b| Ok(hs_norm(&panel, b, range, cfg.norm)? / (t as f64 * b).sqrt()))
                    .collect::<Result<Vec<f64>>>()
            },
            |acc: &mut Vec<Vec<f64>>, x| acc.push(x),
        )?;
        for (k, &beta) in cfg.betas.iter().enumerate() {
            let vals: Vec<f64> = per_rep.iter().map(|v| v[k]).collect();
            table.push(&label, t, reps, beta, "rescaled_norm", median(&vals), None);
        }
    }
    Ok(table)
}

struct Moments {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl Moments {
    fn new(len: usize) -> Self {
        Self {
            sum: vec![0.0; len],
            sum_sq: vec![0.0; len],
        }
    }

    fn add(&mut self, x: &[f64]) {
        for (i, v) in x.iter().enumerate() {
            self.sum[i] += v;
            self.sum_sq[i] += v * v;
        }
    }

    fn merge(&mut self, other: Moments) {
        for i in 0..self.sum.len() {
            self.sum[i] += other.sum[i];
            self.sum_sq[i] += other.sum_sq[i];
        }
    }

    fn variances(&self, r: usize) -> Vec<f64> {
        let rf = r as f64;
        self.sum
            .iter()
            .zip(&self.sum_sq)
            .map(|(s, q)| ((q - s * s / rf) / (rf - 1.0)).max(0.0))
            .collect()
    }
}

/// Decay of the estimator variance: per T, the integrated Monte Carlo
/// variance `h(T) = (2π/T) Σ_r mean_a Var f̂_{ω_r}[a, a]` and the Monte Carlo
/// variance of the integrated weighted periodogram (averaged over the
/// diagonal), with log-log slopes against `B_T T` in rows with `T = 0`.
pub fn run_consistency(config: &ExperimentConfig) -> Result<McTable> {
    let cfg = config;
    cfg.validate()?;
    if cfg.replications < 2 {
        return Err(Error::InsufficientReplications {
            needed: 2,
            got: cfg.replications,
        });
    }
    let model = cfg.model()?;
    let degrees = model.degrees();
    let d = degrees.dim();
    let label = cfg.label();
    let r = cfg.replications;
    let mut table = McTable::default();
    let mut log_bt = Vec::new();
    let mut log_h = Vec::new();
    let mut log_iwp = Vec::new();
    for (ti, &t) in cfg.t.iter().enumerate() {
        let b = cfg.bandwidth.bandwidth(t)?;
        let smoothing = SmoothingSpec::epanechnikov(b)?;
        let smoother = GridSmoother::new(t, &smoothing);
        let block = |rep: usize| -> Result<Moments> {
            let panel = simulate_panel(&model, t, cfg.stream(ti, rep), cfg.frac)?;
            let dft = fdft_panel(&panel)?;
            let mut m = Moments::new(d * t + d);
            let mut row = Vec::with_capacity(d * t + d);
            for c in 0..d {
                row.extend(smoother.smooth(&dft, c, c).iter().map(|z| z.re));
            }
            for idx in degrees.indices() {
                row.push(integrated_weighted_periodogram(&dft, idx, idx, &smoothing)?.re);
            }
            m.add(&row);
            Ok(m)
        };
        let moments = fold_replications(r, Moments::new(d * t + d), block, |acc, x| acc.merge(x))?;
        let vars = moments.variances(r);
        let step = 2.0 * PI / t as f64;
        let h = step * vars[..d * t].iter().sum::<f64>() / d as f64;
        let iwp = vars[d * t..].iter().sum::<f64>() / d as f64;
        let bt = b * t as f64;
        let beta = cfg.bandwidth.beta(t);
        table.push(&label, t, r, beta, "h", h, None);
        table.push(&label, t, r, beta, "iwp_var", iwp, None);
        table.push(&label, t, r, beta, "bt", bt, None);
        log_bt.push(bt.ln());
        log_h.push(h.ln());
        log_iwp.push(iwp.ln());
    }
    if cfg.t.len() >= 2 {
        let beta = cfg.bandwidth.beta(cfg.t[0]);
        table.push(
            &label,
            0,
            r,
            beta,
            "slope_h",
            ols_slope(&log_bt, &log_h),
            None,
        );
        table.push(
            &label,
            0,
            r,
            beta,
            "slope_iwp_var",
            ols_slope(&log_bt, &log_iwp),
            None,
        );
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ExperimentKind, model: ModelConfig) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(kind, model, vec![128], 4);
        c.seed = 11;
        c
    }

    #[test]
    fn config_json_roundtrip_and_hash() {
        let c = small(ExperimentKind::Size, ModelConfig::paper_h0());
        let text = serde_json::to_string(&c).unwrap();
        let back = ExperimentConfig::from_json(&text, None).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash().unwrap(), c.hash().unwrap());
        assert_eq!(c.hash().unwrap().len(), 64);
    }

    #[test]
    fn validation_errors() {
        let mut c = small(ExperimentKind::Size, ModelConfig::paper_h0());
        c.replications = 0;
        assert!(run(&c).is_err());
        let mut c = small(ExperimentKind::Size, ModelConfig::paper_h0());
        c.level = 1.0;
        assert!(run(&c).is_err());
        let c = small(ExperimentKind::Size, ModelConfig::example(1).unwrap());
        assert!(run_size(&c).is_err());
        let mut c = small(ExperimentKind::Consistency, ModelConfig::paper_h0());
        c.replications = 1;
        assert!(matches!(
            run(&c),
            Err(Error::InsufficientReplications { .. })
        ));
    }

    #[test]
    fn single_replication_rates_are_binary() {
        let mut c = small(ExperimentKind::Size, ModelConfig::paper_h0());
        c.replications = 1;
        let t = run_size(&c).unwrap();
        assert_eq!(t.rows.len(), 8);
        assert!(t.rows.iter().all(|r| r.value == 0.0 || r.value == 1.0));
    }

    #[test]
    fn near_one_level_always_rejects() {
        let mut c = small(ExperimentKind::Size, ModelConfig::paper_h0());
        c.level = 1.0 - 1e-9;
        let t = run_size(&c).unwrap();
        assert!(t.rows.iter().all(|r| r.value == 1.0));
    }

    #[test]
    fn zero_exponent_power_equals_size() {
        let size = run_size(&small(ExperimentKind::Size, ModelConfig::paper_h0())).unwrap();
        let power = run_power(&small(ExperimentKind::Power, ModelConfig::paper_h0())).unwrap();
        let v = |t: &McTable| t.rows.iter().map(|r| r.value).collect::<Vec<_>>();
        assert_eq!(v(&size), v(&power));
    }

    #[test]
    fn reruns_are_identical() {
        let mut c = small(
            ExperimentKind::BandwidthSweep,
            ModelConfig::example(2).unwrap(),
        );
        c.betas = vec![0.2, 0.5];
        c.t = vec![200];
        assert_eq!(run(&c).unwrap().to_csv(), run(&c).unwrap().to_csv());
    }

    #[test]
    fn csv_header_and_manifest() {
        let c = small(ExperimentKind::Divergence, ModelConfig::paper_h0());
        let t = run(&c).unwrap();
        let csv = t.to_csv();
        assert!(csv.starts_with("experiment,T,R,beta,key,value,se\n"));
        assert_eq!(csv.lines().count(), 2);
        let m = Manifest::new(&c, &t).unwrap();
        assert_eq!(m.seed, 11);
        assert_eq!(m.library_version, crate::VERSION);
    }
}
