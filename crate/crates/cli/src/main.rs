use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use spharma_lrd::harness::{self, ExperimentConfig, ExperimentKind, Manifest};
use spharma_lrd::io::{load_panel, write_panel, write_spectrum, PanelLayout};
use spharma_lrd::lrdtest::{
    default_directions, BandwidthRule, CalibrationMode, CalibrationOptions, LrdTest,
};
use spharma_lrd::simulate::simulate_panel;
use spharma_lrd::spectral::{fdft_panel, spectrum_table};
use spharma_lrd::{
    CoefficientPanel, Error, FracFilterSpec, ModelConfig, SeedSpec, SmoothingSpec, SpectralModel,
};

#[derive(Debug, Parser)]
#[command(
    name = "spharma-lrd",
    version,
    about = "Spectral LRD testing for spherical functional time series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// Model or experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Base seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory. Without it, the main table goes to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads.
    #[arg(long, global = true, env = "SPHARMA_LRD_THREADS")]
    threads: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Sample length(s); comma separated for mc-* commands.
    #[arg(long = "T", global = true, value_delimiter = ',')]
    t: Vec<usize>,

    /// Panel CSV layout.
    #[arg(long, global = true, default_value = "long")]
    layout: PanelLayout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a coefficient panel from a model config.
    Simulate,
    /// Smoothed cross-spectra of a panel (read with --panel or simulated).
    Spectrum(SpectrumArgs),
    /// Random-projection test on one panel.
    Test(TestArgs),
    /// Empirical size.
    McSize,
    /// Empirical power.
    McPower,
    /// Null distribution of standardized statistics.
    McDist,
    /// Growth of the projected HS norm.
    McDivergence,
    /// Bandwidth sweep of the rescaled norm.
    McSweep,
    /// Estimation-error rate of the smoothed periodogram.
    McConsistency,
    /// Check a model config and print per-degree diagnostics.
    ValidateModel,
}

#[derive(Debug, Args)]
struct SpectrumArgs {
    /// Panel CSV; simulated from --config when absent.
    #[arg(long)]
    panel: Option<PathBuf>,

    /// Bandwidth exponent β in B_T = T^{-β}.
    #[arg(long, default_value_t = 0.25)]
    beta: f64,

    /// Highest degree included in the pairs.
    #[arg(long)]
    n_max: Option<usize>,

    /// Include cross pairs, not only (a, a).
    #[arg(long)]
    cross: bool,
}

#[derive(Debug, Args)]
struct TestArgs {
    /// Panel CSV; simulated from --config when absent.
    #[arg(long)]
    panel: Option<PathBuf>,

    /// Calibration model; defaults to --config.
    #[arg(long)]
    calibration: Option<PathBuf>,

    #[arg(long, default_value_t = 0.25)]
    beta: f64,

    #[arg(long, default_value_t = 0.05)]
    level: f64,

    #[arg(long)]
    one_sided: bool,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Lib(e) if e.is_validation() => 1,
            CliError::Lib(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.common.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
    pool.install(|| dispatch(&cli.command, &cli.common))
}

fn dispatch(cmd: &Command, common: &Common) -> CliResult<()> {
    match cmd {
        Command::Simulate => simulate(common),
        Command::Spectrum(args) => spectrum(common, args),
        Command::Test(args) => test(common, args),
        Command::McSize => monte_carlo(common, ExperimentKind::Size),
        Command::McPower => monte_carlo(common, ExperimentKind::Power),
        Command::McDist => monte_carlo(common, ExperimentKind::Distribution),
        Command::McDivergence => monte_carlo(common, ExperimentKind::Divergence),
        Command::McSweep => monte_carlo(common, ExperimentKind::BandwidthSweep),
        Command::McConsistency => monte_carlo(common, ExperimentKind::Consistency),
        Command::ValidateModel => validate_model(common),
    }
}

fn config_path(common: &Common) -> CliResult<&Path> {
    common
        .config
        .as_deref()
        .ok_or_else(|| CliError::Usage("--config is required".into()))
}

fn read_model(path: &Path) -> CliResult<ModelConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(ModelConfig::from_json(&text)?)
}

fn single_t(common: &Common) -> CliResult<usize> {
    match common.t.as_slice() {
        [t] => Ok(*t),
        [] => Err(CliError::Usage("--T is required".into())),
        _ => Err(CliError::Usage("this command takes a single --T".into())),
    }
}

/// Writes `name` under `--out`, or the contents to stdout without it.
fn emit(common: &Common, name: &str, contents: &str) -> CliResult<()> {
    match &common.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(Error::from)?;
            fs::write(dir.join(name), contents).map_err(Error::from)?;
            Ok(())
        }
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn simulated_panel(common: &Common, model: &SpectralModel) -> CliResult<CoefficientPanel> {
    let t = single_t(common)?;
    let seed = SeedSpec::new(common.seed.unwrap_or(0), 0);
    Ok(simulate_panel(model, t, seed, FracFilterSpec::default())?)
}

fn panel_json(panel: &CoefficientPanel) -> String {
    let degrees = panel.degrees();
    let columns: serde_json::Map<String, serde_json::Value> = degrees
        .indices()
        .enumerate()
        .map(|(c, idx)| {
            (
                format!("n{}j{}", idx.n, idx.j),
                json!(panel.column(c).to_vec()),
            )
        })
        .collect();
    let doc = json!({
        "T": panel.len(),
        "n_min": degrees.n_min,
        "n_max": degrees.n_max,
        "columns": columns,
    });
    serde_json::to_string_pretty(&doc).expect("panel serializes") + "\n"
}

fn simulate(common: &Common) -> CliResult<()> {
    let model = read_model(config_path(common)?)?.build()?;
    let panel = simulated_panel(common, &model)?;
    let text = match common.format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_panel(&panel, common.layout, &mut buf)?;
            String::from_utf8(buf).expect("csv is utf-8")
        }
        Format::Json => panel_json(&panel),
    };
    emit(common, &format!("panel.{}", common.format.ext()), &text)
}

fn input_panel(common: &Common, panel: &Option<PathBuf>) -> CliResult<CoefficientPanel> {
    match panel {
        Some(p) => {
            if !p.exists() {
                return Err(CliError::Usage(format!(
                    "panel {} does not exist",
                    p.display()
                )));
            }
            Ok(load_panel(p, common.layout)?)
        }
        None => {
            let model = read_model(config_path(common)?)?.build()?;
            simulated_panel(common, &model)
        }
    }
}

fn spectrum(common: &Common, args: &SpectrumArgs) -> CliResult<()> {
    let panel = input_panel(common, &args.panel)?;
    let t = panel.len();
    let b = BandwidthRule::Beta(args.beta).bandwidth(t)?;
    let spec = SmoothingSpec::epanechnikov(b)?;
    let degrees = panel.degrees();
    let n_max = args.n_max.unwrap_or(degrees.n_max).min(degrees.n_max);
    let idx: Vec<_> = degrees.indices().filter(|i| i.n <= n_max).collect();
    let pairs: Vec<_> = if args.cross {
        idx.iter()
            .flat_map(|a| idx.iter().map(move |b| (*a, *b)))
            .collect()
    } else {
        idx.iter().map(|a| (*a, *a)).collect()
    };
    let omegas: Vec<f64> = (1..=t / 2)
        .map(|s| 2.0 * std::f64::consts::PI * s as f64 / t as f64)
        .collect();
    let rows = spectrum_table(&fdft_panel(&panel)?, &pairs, &omegas, &spec)?;
    let text = match common.format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_spectrum(&rows, &mut buf)?;
            String::from_utf8(buf).expect("csv is utf-8")
        }
        Format::Json => serde_json::to_string_pretty(&rows).map_err(Error::from)? + "\n",
    };
    emit(common, &format!("spectrum.{}", common.format.ext()), &text)
}

fn test(common: &Common, args: &TestArgs) -> CliResult<()> {
    let panel = input_panel(common, &args.panel)?;
    let calib_path = match (&args.calibration, &common.config) {
        (Some(p), _) => p.as_path(),
        (None, Some(p)) => p.as_path(),
        (None, None) => {
            return Err(CliError::Usage(
                "--config or --calibration is required".into(),
            ))
        }
    };
    let calib = read_model(calib_path)?.build()?;
    if calib.degrees() != panel.degrees() {
        return Err(CliError::Usage(
            "calibration model and panel cover different degrees".into(),
        ));
    }
    let t = panel.len();
    let b = BandwidthRule::Beta(args.beta).bandwidth(t)?;
    let options = CalibrationOptions {
        mode: CalibrationMode::SrdPart,
        ..CalibrationOptions::default()
    };
    let test = LrdTest::from_model(
        &calib,
        t,
        &SmoothingSpec::epanechnikov(b)?,
        options,
        args.level,
        args.one_sided,
    )?;
    let report = test.random_projection(&fdft_panel(&panel)?, &default_directions())?;
    let text = match common.format {
        Format::Csv => report.to_csv(),
        Format::Json => report.to_json()? + "\n",
    };
    emit(common, &format!("test.{}", common.format.ext()), &text)
}

fn monte_carlo(common: &Common, kind: ExperimentKind) -> CliResult<()> {
    let path = config_path(common)?;
    if !path.exists() {
        return Err(CliError::Usage(format!(
            "config {} does not exist",
            path.display()
        )));
    }
    let mut cfg = ExperimentConfig::load(path)?;
    if cfg.experiment != kind {
        log::info!(
            "config declares '{}', running '{}'",
            cfg.experiment.name(),
            kind.name()
        );
        cfg.experiment = kind;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if !common.t.is_empty() {
        cfg.t = common.t.clone();
    }
    cfg.validate()?;
    let table = harness::run(&cfg)?;
    let stem = cfg.name.clone().unwrap_or_else(|| kind.name().to_string());
    let text = match common.format {
        Format::Csv => table.to_csv(),
        Format::Json => table.to_json()? + "\n",
    };
    emit(common, &format!("{stem}.{}", common.format.ext()), &text)?;
    if common.out.is_some() {
        let manifest = Manifest::new(&cfg, &table)?;
        let body = serde_json::to_string_pretty(&manifest).map_err(Error::from)? + "\n";
        emit(common, &format!("{stem}.manifest.json"), &body)?;
    }
    Ok(())
}

fn fmt_moduli(v: &[f64]) -> String {
    v.iter()
        .map(|m| format!("{m:.6}"))
        .collect::<Vec<_>>()
        .join(";")
}

fn validate_model(common: &Common) -> CliResult<()> {
    let model = read_model(config_path(common)?)?.build()?;
    let profile = model.alpha_profile();
    let rows: Vec<(usize, f64, Vec<f64>, Vec<f64>)> = model
        .degrees()
        .degrees()
        .map(|n| {
            let (ar, ma) = model.root_moduli(n);
            (n, model.alpha(n), ar, ma)
        })
        .collect();
    let text = match common.format {
        Format::Csv => {
            let mut out = String::new();
            out.push_str(&format!(
                "# regime={} l_alpha={} L_alpha={} extended={}\n",
                if model.is_null() { "srd" } else { "lrd" },
                profile.l_alpha().map_or("-".into(), |v| format!("{v:.4}")),
                profile
                    .upper_alpha()
                    .map_or("-".into(), |v| format!("{v:.4}")),
                profile.extended()
            ));
            out.push_str("n,alpha,ar_root_moduli,ma_root_moduli\n");
            for (n, a, ar, ma) in &rows {
                out.push_str(&format!(
                    "{n},{a:.6},{},{}\n",
                    fmt_moduli(ar),
                    fmt_moduli(ma)
                ));
            }
            out
        }
        Format::Json => {
            let degrees: Vec<_> = rows
                .iter()
                .map(|(n, a, ar, ma)| json!({"n": n, "alpha": a, "ar_root_moduli": ar, "ma_root_moduli": ma}))
                .collect();
            let doc = json!({
                "regime": if model.is_null() { "srd" } else { "lrd" },
                "l_alpha": profile.l_alpha(),
                "L_alpha": profile.upper_alpha(),
                "extended": profile.extended(),
                "degrees": degrees,
            });
            serde_json::to_string_pretty(&doc).map_err(Error::from)? + "\n"
        }
    };
    emit(common, &format!("model.{}", common.format.ext()), &text)
}
