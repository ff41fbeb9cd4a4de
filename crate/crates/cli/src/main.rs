//! `rbim`: run persistence experiments, re-fit saved series, list presets and
//! run the exact-chain oracle.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 runtime failure,
//! 4 oracle check failed.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use rbim_core::experiment::{self, ExperimentConfig, RunOptions, PRESETS};
use rbim_core::fitting::{self, DecaySeries, Window};
use rbim_core::oracle::{self, OracleSettings};
use rbim_core::output::{self, RunManifest, MANIFEST_FILE};
use rbim_core::{parse_config, Error, ModelParams, Schedule};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const EXIT_ORACLE: u8 = 4;

#[derive(Parser)]
#[command(name = "rbim", version, about = "Persistence in a random-bond Ising market model")]
struct Cli {
    /// More log output on stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a disorder-averaged experiment and write CSV series plus a manifest.
    Run(RunArgs),
    /// Re-fit a saved series CSV.
    Fit(FitArgs),
    /// List the shipped presets.
    PresetList,
    /// Check the dynamics against the exact three-site chain.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Preset name (see `preset-list`).
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (0 = one per core). Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Also write a gnuplot script.
    #[arg(long)]
    gnuplot: bool,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    t_max: Option<u64>,
    /// Comma-separated bond concentrations.
    #[arg(long = "p", value_delimiter = ',')]
    p_values: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    schedule: Option<Schedule>,
    /// Drop the paper-grade sample requirement (for quick checks).
    #[arg(long)]
    smoke: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitModel {
    Exponential,
    PowerLaw,
    Stretched,
    Compare,
}

#[derive(Args)]
struct FitArgs {
    /// Series CSV written by `run`.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "compare")]
    model: FitModel,
    #[arg(long)]
    t_min: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
}

#[derive(Args)]
struct OracleArgs {
    /// Monte Carlo samples per bond pattern.
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    #[arg(long)]
    seed: Option<u64>,
    /// Test hook: run the engine with alpha shifted by one.
    #[arg(long, hide = true)]
    corrupt_dynamics: bool,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config { .. }
            | Error::UnknownPreset { .. }
            | Error::InvalidParameter(_)
            | Error::InvalidGeometry(_) => EXIT_CONFIG,
            _ => EXIT_RUNTIME,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    let outcome = match cli.command {
        Command::Run(a) => run(a),
        Command::Fit(a) => fit(a),
        Command::PresetList => {
            preset_list();
            Ok(())
        }
        Command::Oracle(a) => run_oracle(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(a: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut config = match (&a.preset, &a.config) {
        (Some(name), _) => experiment::preset(name)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| fail(EXIT_CONFIG, format!("cannot read {}: {e}", path.display())))?;
            parse_config(&text)?
        }
        (None, None) => return Err(fail(EXIT_CONFIG, "one of --preset or --config is required")),
    };
    if let Some(s) = a.samples {
        config.samples = s;
    }
    if let Some(t) = a.t_max {
        config.t_max = t;
    }
    if let Some(p) = &a.p_values {
        config.p_values = p.clone();
    }
    if let Some(s) = a.seed {
        config.master_seed = s;
    }
    if let Some(s) = a.schedule {
        config.schedule = s;
    }
    if a.smoke {
        config.paper_grade = false;
    }
    config.validate()?;
    Ok(config)
}

fn run(a: RunArgs) -> CliResult {
    let config = load_config(&a)?;
    let sites = config.geometry()?.sites();
    info!(
        "d={} L={} N={sites} T={} alpha={} samples={} t_max={} schedule={}",
        config.dimension,
        config.length,
        config.temperature,
        config.alpha,
        config.samples,
        config.t_max,
        config.schedule.as_str()
    );
    let started = chrono::Utc::now().to_rfc3339();
    let result = experiment::run_experiment_with(&config, RunOptions { workers: a.workers })
        .map_err(|e| fail(EXIT_RUNTIME, e.to_string()))?;
    let finished = chrono::Utc::now().to_rfc3339();
    let manifest = output::write_run(&a.out, &result, started, finished, a.gnuplot)
        .map_err(|e| fail(EXIT_RUNTIME, e.to_string()))?;

    for r in &result.results {
        for e in &r.fits.errors {
            warn!("p={}: {e}", r.p);
        }
        let gamma = r.fits.exponential.as_ref().map(|f| f.decay());
        let theta = r.fits.power_law.as_ref().map(|f| f.decay());
        let best = r
            .fits
            .comparison
            .as_ref()
            .and_then(|c| c.adequate)
            .map_or("none", |m| m.name());
        println!(
            "p={:<5} P(t_max)={:.4e} gamma={} theta={} adequate={best}",
            r.p,
            r.rows.last().map_or(f64::NAN, |row| row.p_mean),
            fmt_opt(gamma),
            fmt_opt(theta)
        );
    }
    println!("wrote {} files to {}", manifest.outputs.len(), a.out.display());
    Ok(())
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

/// Noise floor from a manifest next to the CSV, if one exists.
fn sibling_floor(csv: &Path) -> Option<f64> {
    let dir = csv.parent()?;
    let text = std::fs::read_to_string(dir.join(MANIFEST_FILE)).ok()?;
    let m: RunManifest = serde_json::from_str(&text).ok()?;
    let sites = m.config.geometry().ok()?.sites();
    Some(fitting::noise_floor(m.config.samples, sites))
}

fn fit_window(series: &DecaySeries, a: &FitArgs, floor: f64) -> Result<Window, Failure> {
    let default = match a.model {
        FitModel::PowerLaw => fitting::default_powerlaw_window(series, floor),
        _ => fitting::default_exponential_window(series, floor),
    };
    let t_min = a.t_min.or(default.map(|w| w.t_min));
    let t_max = a.t_max.or(default.map(|w| w.t_max));
    match (t_min, t_max) {
        (Some(lo), Some(hi)) if lo < hi => Ok(Window::new(lo, hi)),
        (Some(lo), Some(hi)) => Err(fail(EXIT_CONFIG, format!("empty window [{lo}, {hi}]"))),
        _ => Err(fail(EXIT_RUNTIME, "series never rises above the noise floor; give --t-min/--t-max")),
    }
}

fn fit(a: FitArgs) -> CliResult {
    let file = std::fs::File::open(&a.input)
        .map_err(|e| fail(EXIT_RUNTIME, format!("cannot open {}: {e}", a.input.display())))?;
    let series = output::read_series_csv(std::io::BufReader::new(file))?;
    let floor = sibling_floor(&a.input).unwrap_or(0.0);
    let window = fit_window(&series, &a, floor)?;
    info!("window [{}, {}], floor {floor:.3e}", window.t_min, window.t_max);
    let json = match a.model {
        FitModel::Exponential => to_json(&fitting::fit_exponential(&series, window)?),
        FitModel::PowerLaw => to_json(&fitting::fit_powerlaw(&series, window)?),
        FitModel::Stretched => to_json(&fitting::fit_stretched_exponential(&series, window)?),
        FitModel::Compare => to_json(&fitting::compare_models(&series, window)?),
    };
    println!("{json}");
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("fit reports serialize")
}

fn preset_list() {
    println!("{:<9} {:>2} {:>8} {:>5} {:>8} {:>6}  description", "name", "d", "L", "T", "samples", "t_max");
    for p in PRESETS {
        println!(
            "{:<9} {:>2} {:>8} {:>5} {:>8} {:>6}  {}",
            p.name, p.dimension, p.length, p.temperature, p.samples, p.t_max, p.description
        );
    }
}

fn run_oracle(a: OracleArgs) -> CliResult {
    let defaults = OracleSettings::default();
    let settings = OracleSettings {
        samples: a.samples,
        seed: a.seed.unwrap_or(defaults.seed),
        ..defaults
    };
    if settings.samples < 2 {
        return Err(fail(EXIT_CONFIG, "--samples must be at least 2"));
    }
    let mut engine = oracle::matching_params(&settings);
    if a.corrupt_dynamics {
        engine = ModelParams {
            alpha: engine.alpha + 1.0,
            ..engine
        };
    }
    let report = oracle::run_oracle(settings, engine);
    for p in &report.patterns {
        let worst = (1..=settings.steps)
            .map(|t| (p.mean[t] - p.exact[t]).abs() / p.stderr[t])
            .fold(0.0f64, f64::max);
        println!(
            "{} bonds {:?}: worst |diff|/SE = {worst:.2}",
            if p.pass { "ok  " } else { "FAIL" },
            p.bonds
        );
    }
    if report.pass {
        println!("oracle: pass ({} samples per pattern)", settings.samples);
        Ok(())
    } else {
        Err(fail(EXIT_ORACLE, "oracle: Monte Carlo disagrees with the exact chain"))
    }
}
