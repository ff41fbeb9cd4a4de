//! Disorder-averaged runs: presets, per-sample seeding, fan-out and aggregation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::BondTable;
use crate::dynamics::{ModelParams, Schedule, SpinState};
use crate::error::{Error, Result};
use crate::fitting::{
    self, compare_models, fit_exponential, fit_powerlaw, DecayFit, DecaySeries, ModelComparison,
    Window,
};
use crate::lattice::LatticeGeometry;
use crate::observables::{
    self, blocking_diagnostic, market_return, BlockingReport, BlockingThresholds,
    MomentAccumulator, PersistenceTracker, TimeSeriesRecord,
};
use crate::rng::{SampleSeeds, ThermalNoise, RNG_ALGORITHM};

/// Minimum sample count for a paper-grade run.
pub const PAPER_GRADE_SAMPLES: u64 = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dimension: usize,
    pub length: usize,
    pub alpha: f64,
    pub temperature: f64,
    pub p_values: Vec<f64>,
    pub samples: u64,
    pub t_max: u64,
    pub schedule: Schedule,
    pub master_seed: u64,
    /// Reuse one bond realization per `p` across all samples.
    pub fixed_bonds: bool,
    /// Permit `p > 0.5` (the model is symmetric about 0.5).
    pub allow_p_above_half: bool,
    /// Enforce at least [`PAPER_GRADE_SAMPLES`] samples.
    pub paper_grade: bool,
    /// Points used for the `P(inf)` estimate; default is the last 10% of steps.
    pub tail_window: Option<usize>,
    pub exp_window: Option<Window>,
    pub power_window: Option<Window>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        LatticeGeometry::new(self.dimension, self.length).map_err(|e| {
            let key = if self.dimension == 0 { "dimension" } else { "length" };
            Error::config(key, e.to_string())
        })?;
        ModelParams::new(self.alpha, self.temperature, self.schedule)
            .map_err(|e| Error::config("alpha/temperature", e.to_string()))?;
        if self.p_values.is_empty() {
            return Err(Error::config("p_values", "at least one p is required"));
        }
        let upper = if self.allow_p_above_half { 1.0 } else { 0.5 };
        for (k, &p) in self.p_values.iter().enumerate() {
            if !(0.0..=upper).contains(&p) {
                return Err(Error::config(
                    format!("p_values[{k}]"),
                    format!("p = {p} outside [0, {upper}]"),
                ));
            }
        }
        if self.samples < 1 {
            return Err(Error::config("samples", "samples must be at least 1"));
        }
        if self.paper_grade && self.samples < PAPER_GRADE_SAMPLES {
            return Err(Error::config(
                "samples",
                format!("paper-grade runs need at least {PAPER_GRADE_SAMPLES} samples"),
            ));
        }
        if self.master_seed > i64::MAX as u64 {
            return Err(Error::config("master_seed", "seed must fit in a signed 64-bit integer"));
        }
        if self.t_max < 1 {
            return Err(Error::config("t_max", "t_max must be at least 1"));
        }
        if let Some(w) = self.tail_window {
            if w == 0 || w as u64 > self.t_max + 1 {
                return Err(Error::config(
                    "tail_window",
                    format!("tail window {w} must lie in 1..={}", self.t_max + 1),
                ));
            }
        }
        for (key, w) in [("exp_window", self.exp_window), ("power_window", self.power_window)] {
            if let Some(w) = w {
                if !(w.t_min <= w.t_max) || w.t_min < 0.0 {
                    return Err(Error::config(key, "window needs 0 <= t_min <= t_max"));
                }
            }
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<LatticeGeometry> {
        LatticeGeometry::new(self.dimension, self.length)
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.alpha, self.temperature, self.schedule)
    }

    pub fn tail_window_len(&self) -> usize {
        self.tail_window
            .unwrap_or_else(|| observables::default_tail_window(self.t_max as usize + 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub dimension: usize,
    pub length: usize,
    pub temperature: f64,
    pub samples: u64,
    pub t_max: u64,
    pub paper_grade: bool,
}

const ALL_P: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];

/// Published lattice sizes and intermittency temperatures (alpha = 4 throughout),
/// followed by reduced desk-scale variants.
pub const PRESETS: &[Preset] = &[
    Preset { name: "d1", description: "d=1 full size", dimension: 1, length: 4_000_001, temperature: 3.5, samples: 100, t_max: 50, paper_grade: true },
    Preset { name: "d2", description: "d=2 full size", dimension: 2, length: 2001, temperature: 3.0, samples: 100, t_max: 50, paper_grade: true },
    Preset { name: "d3", description: "d=3 full size", dimension: 3, length: 151, temperature: 2.5, samples: 100, t_max: 50, paper_grade: true },
    Preset { name: "d4", description: "d=4 full size", dimension: 4, length: 45, temperature: 1.9, samples: 100, t_max: 50, paper_grade: true },
    Preset { name: "d5", description: "d=5 full size", dimension: 5, length: 21, temperature: 1.4, samples: 100, t_max: 200, paper_grade: true },
    Preset { name: "d1-desk", description: "d=1 reduced L (desk scale)", dimension: 1, length: 100_001, temperature: 3.5, samples: 100, t_max: 30, paper_grade: true },
    Preset { name: "d2-desk", description: "d=2 reduced L (desk scale)", dimension: 2, length: 201, temperature: 3.0, samples: 100, t_max: 50, paper_grade: true },
    Preset { name: "d3-desk", description: "d=3 reduced L (desk scale)", dimension: 3, length: 51, temperature: 2.5, samples: 100, t_max: 50, paper_grade: true },
    Preset { name: "d4-desk", description: "d=4 reduced L (desk scale)", dimension: 4, length: 17, temperature: 1.9, samples: 100, t_max: 50, paper_grade: true },
    Preset { name: "d5-desk", description: "d=5 reduced L (desk scale)", dimension: 5, length: 11, temperature: 1.4, samples: 200, t_max: 200, paper_grade: true },
];

pub const ALPHA: f64 = 4.0;
pub const DEFAULT_SEED: u64 = 20_070_907;

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.name).collect()
}

/// Configuration for a named preset.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let p = PRESETS
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::UnknownPreset {
            name: name.to_string(),
            valid: preset_names().join(", "),
        })?;
    Ok(ExperimentConfig {
        dimension: p.dimension,
        length: p.length,
        alpha: ALPHA,
        temperature: p.temperature,
        p_values: ALL_P.to_vec(),
        samples: p.samples,
        t_max: p.t_max,
        schedule: Schedule::Synchronous,
        master_seed: DEFAULT_SEED,
        fixed_bonds: false,
        allow_p_above_half: false,
        paper_grade: p.paper_grade,
        tail_window: None,
        exp_window: None,
        power_window: None,
    })
}

/// Runs one sample and returns its records for `t = 0..=t_max`.
pub fn run_sample(config: &ExperimentConfig, p: f64, index: u64) -> Result<Vec<TimeSeriesRecord>> {
    Ok(simulate(config, p, index)?.records)
}

struct SampleRun {
    records: Vec<TimeSeriesRecord>,
    running_kurtosis: Vec<Option<f64>>,
    kurtosis: Option<f64>,
    seeds: SampleSeeds,
}

fn simulate(config: &ExperimentConfig, p: f64, index: u64) -> Result<SampleRun> {
    let wrap = |e: Error| Error::Sample {
        p,
        sample: index,
        dim: config.dimension,
        len: config.length,
        source: Box::new(e),
    };
    let geometry = config.geometry().map_err(wrap)?;
    let params = config.params().map_err(wrap)?;
    let seeds = SampleSeeds::derive(config.master_seed, p, index, config.fixed_bonds);

    let bonds = BondTable::generate(&geometry, p, seeds.disorder).map_err(wrap)?;
    let mut state = SpinState::random(&geometry, seeds.initial);
    let noise = ThermalNoise::new(seeds.thermal);
    let mut tracker = PersistenceTracker::new(&state);

    let steps = config.t_max as usize;
    let mut records = Vec::with_capacity(steps + 1);
    let mut running_kurtosis = Vec::with_capacity(steps + 1);
    let mut moments = MomentAccumulator::default();
    let mut m_prev = state.magnetization();
    records.push(TimeSeriesRecord {
        t: 0,
        persistence: tracker.probability(),
        magnetization: m_prev,
        ret: None,
    });
    running_kurtosis.push(None);

    for _ in 0..steps {
        state.step_observed(&bonds, &params, &noise, false, |i| tracker.mark_flipped(i));
        let m = state.magnetization();
        let ret = market_return(m, m_prev);
        moments.push(ret);
        records.push(TimeSeriesRecord {
            t: state.t(),
            persistence: tracker.probability(),
            magnetization: m,
            ret: Some(ret),
        });
        running_kurtosis.push(moments.excess_kurtosis().ok());
        m_prev = m;
    }
    debug_assert_eq!(tracker.count(), tracker.popcount());

    Ok(SampleRun {
        records,
        kurtosis: moments.excess_kurtosis().ok(),
        running_kurtosis,
        seeds,
    })
}

/// One row of an averaged curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub t: u64,
    pub p_mean: f64,
    /// NaN with a single sample.
    pub p_stderr: f64,
    pub abs_m_mean: f64,
    /// Mean over samples of each sample's excess kurtosis of returns `1..=t`;
    /// NaN where no sample has a defined value.
    pub ret_kurtosis_running: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KurtosisSummary {
    pub mean: f64,
    pub stderr: f64,
    /// Samples whose return series had a defined kurtosis.
    pub defined: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FitReport {
    pub noise_floor: f64,
    pub exponential: Option<DecayFit>,
    pub power_law: Option<DecayFit>,
    pub comparison: Option<ModelComparison>,
    pub blocking: Option<BlockingReport>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PResult {
    pub p: f64,
    pub rows: Vec<AggregateRow>,
    pub kurtosis: KurtosisSummary,
    pub fits: FitReport,
    pub seeds: Vec<SampleSeeds>,
}

impl PResult {
    /// Mean persistence curve with standard errors.
    pub fn series(&self) -> DecaySeries {
        DecaySeries {
            t: self.rows.iter().map(|r| r.t as f64).collect(),
            p: self.rows.iter().map(|r| r.p_mean).collect(),
            stderr: Some(self.rows.iter().map(|r| r.p_stderr).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub config: ExperimentConfig,
    pub rng_algorithm: String,
    pub version: String,
    pub results: Vec<PResult>,
}

/// Execution knobs that never change results.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; 0 uses the global rayon pool.
    pub workers: usize,
}

impl AggregateResult {
    /// JSON serialization; NaN fields become `null`, so two results are
    /// identical exactly when their payloads are equal.
    pub fn payload(&self) -> String {
        serde_json::to_string(self).expect("aggregate results serialize")
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<AggregateResult> {
    run_experiment_with(config, RunOptions::default())
}

/// Runs every `(p, sample)` pair and reduces them in index order, so the
/// result does not depend on the worker count.
pub fn run_experiment_with(config: &ExperimentConfig, options: RunOptions) -> Result<AggregateResult> {
    config.validate()?;
    let work = || -> Result<Vec<PResult>> {
        config
            .p_values
            .iter()
            .map(|&p| {
                let runs = (0..config.samples)
                    .into_par_iter()
                    .map(|i| simulate(config, p, i))
                    .collect::<Result<Vec<_>>>()?;
                Ok(aggregate(config, p, runs))
            })
            .collect()
    };
    let results = if options.workers == 0 {
        work()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(options.workers)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(work)?
    };
    Ok(AggregateResult {
        config: config.clone(),
        rng_algorithm: RNG_ALGORITHM.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        results,
    })
}

fn mean_and_stderr(values: impl Iterator<Item = f64>) -> (f64, f64, u64) {
    let mut n = 0u64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let values: Vec<f64> = values.collect();
    for &v in &values {
        n += 1;
        sum += v;
    }
    if n == 0 {
        return (f64::NAN, f64::NAN, 0);
    }
    let mean = sum / n as f64;
    for &v in &values {
        sum_sq += (v - mean) * (v - mean);
    }
    let stderr = if n >= 2 {
        (sum_sq / (n - 1) as f64 / n as f64).sqrt()
    } else {
        f64::NAN
    };
    (mean, stderr, n)
}

fn aggregate(config: &ExperimentConfig, p: f64, runs: Vec<SampleRun>) -> PResult {
    let steps = config.t_max as usize + 1;
    let rows = (0..steps)
        .map(|k| {
            let (p_mean, p_stderr, _) = mean_and_stderr(runs.iter().map(|r| r.records[k].persistence));
            let (abs_m_mean, _, _) =
                mean_and_stderr(runs.iter().map(|r| r.records[k].magnetization.abs()));
            let (kurt, _, _) = mean_and_stderr(runs.iter().filter_map(|r| r.running_kurtosis[k]));
            AggregateRow {
                t: k as u64,
                p_mean,
                p_stderr,
                abs_m_mean,
                ret_kurtosis_running: kurt,
            }
        })
        .collect::<Vec<_>>();
    let (mean, stderr, defined) = mean_and_stderr(runs.iter().filter_map(|r| r.kurtosis));
    let seeds = runs.iter().map(|r| r.seeds).collect();
    let mut result = PResult {
        p,
        rows,
        kurtosis: KurtosisSummary {
            mean,
            stderr,
            defined,
        },
        fits: FitReport::default(),
        seeds,
    };
    let sites = config.geometry().map(|g| g.sites()).unwrap_or(1);
    result.fits = fit_report(config, &result.series(), sites);
    result
}

/// Default-window fits and the blocking diagnostic for one averaged curve.
pub fn fit_report(config: &ExperimentConfig, series: &DecaySeries, sites: usize) -> FitReport {
    let floor = fitting::noise_floor(config.samples, sites);
    let mut report = FitReport {
        noise_floor: floor,
        ..Default::default()
    };
    let exp_window = config
        .exp_window
        .or_else(|| fitting::default_exponential_window(series, floor));
    let power_window = config
        .power_window
        .or_else(|| fitting::default_powerlaw_window(series, floor));

    match exp_window {
        Some(w) => {
            match fit_exponential(series, w) {
                Ok(f) => report.exponential = Some(f),
                Err(e) => report.errors.push(format!("exponential: {e}")),
            }
            match compare_models(series, w) {
                Ok(c) => report.comparison = Some(c),
                Err(e) => report.errors.push(format!("comparison: {e}")),
            }
        }
        None => report
            .errors
            .push("no exponential window above the noise floor".into()),
    }
    match power_window {
        Some(w) => match fit_powerlaw(series, w) {
            Ok(f) => report.power_law = Some(f),
            Err(e) => report.errors.push(format!("power law: {e}")),
        },
        None => report.errors.push("no power-law window above the noise floor".into()),
    }
    match blocking_diagnostic(&series.p, config.tail_window_len(), BlockingThresholds::default()) {
        Ok(b) => report.blocking = Some(b),
        Err(e) => report.errors.push(format!("blocking: {e}")),
    }
    report
}
