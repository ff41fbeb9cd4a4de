//! TOML run configuration.
//!
//! ```toml
//! preset = "d3-desk"      # optional; other keys override it
//! dimension = 3
//! length = 51
//! alpha = 4.0
//! temperature = 2.5
//! p_values = [0.1, 0.5]
//! samples = 100
//! t_max = 50
//! schedule = "synchronous" # or "random-sequential"
//! master_seed = 7
//! fixed_bonds = false
//! allow_p_above_half = false
//! paper_grade = false
//! tail_window = 5
//! exp_window = { t_min = 1, t_max = 12 }
//! power_window = { t_min = 100, t_max = 200 }
//! ```
//!
//! Without a preset, `dimension`, `length` and `temperature` are required.
//! Omitted keys take the defaults `alpha = 4`, `p_values = [0.1 .. 0.5]`,
//! `samples = 100`, `t_max = 50`, synchronous schedule and a fixed seed.

use serde::{Deserialize, Serialize};

use crate::dynamics::Schedule;
use crate::error::{Error, Result};
use crate::experiment::{self, ExperimentConfig, ALPHA, DEFAULT_SEED};
use crate::fitting::Window;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: Option<String>,
    dimension: Option<usize>,
    length: Option<usize>,
    alpha: Option<f64>,
    temperature: Option<f64>,
    p_values: Option<Vec<f64>>,
    samples: Option<u64>,
    t_max: Option<u64>,
    schedule: Option<Schedule>,
    master_seed: Option<u64>,
    fixed_bonds: Option<bool>,
    allow_p_above_half: Option<bool>,
    paper_grade: Option<bool>,
    tail_window: Option<usize>,
    exp_window: Option<Window>,
    power_window: Option<Window>,
}

/// Parses and validates a TOML configuration document.
pub fn parse_config(source: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(source).map_err(|e| {
        Error::config(
            "<document>",
            e.message().to_string() + &span_hint(source, e.span()),
        )
    })?;

    let base = match &raw.preset {
        Some(name) => Some(experiment::preset(name)?),
        None => None,
    };
    let required = |v: Option<usize>, from: Option<usize>, key: &str| {
        v.or(from)
            .ok_or_else(|| Error::config(key, "required when no preset is given"))
    };
    let config = ExperimentConfig {
        dimension: required(raw.dimension, base.as_ref().map(|b| b.dimension), "dimension")?,
        length: required(raw.length, base.as_ref().map(|b| b.length), "length")?,
        temperature: raw
            .temperature
            .or(base.as_ref().map(|b| b.temperature))
            .ok_or_else(|| Error::config("temperature", "required when no preset is given"))?,
        alpha: raw.alpha.or(base.as_ref().map(|b| b.alpha)).unwrap_or(ALPHA),
        p_values: raw
            .p_values
            .or(base.as_ref().map(|b| b.p_values.clone()))
            .unwrap_or_else(|| vec![0.1, 0.2, 0.3, 0.4, 0.5]),
        samples: raw.samples.or(base.as_ref().map(|b| b.samples)).unwrap_or(100),
        t_max: raw.t_max.or(base.as_ref().map(|b| b.t_max)).unwrap_or(50),
        schedule: raw.schedule.unwrap_or_default(),
        master_seed: raw
            .master_seed
            .or(base.as_ref().map(|b| b.master_seed))
            .unwrap_or(DEFAULT_SEED),
        fixed_bonds: raw.fixed_bonds.unwrap_or(false),
        allow_p_above_half: raw.allow_p_above_half.unwrap_or(false),
        paper_grade: raw
            .paper_grade
            .or(base.as_ref().map(|b| b.paper_grade))
            .unwrap_or(false),
        tail_window: raw.tail_window,
        exp_window: raw.exp_window,
        power_window: raw.power_window,
    };
    if config.length.is_multiple_of(2) {
        return Err(Error::config("length", format!("L must be odd, got {}", config.length)));
    }
    config.validate()?;
    Ok(config)
}

fn span_hint(source: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(r) => {
            let line = source[..r.start.min(source.len())].matches('\n').count() + 1;
            format!(" (line {line})")
        }
        None => String::new(),
    }
}

/// Serializes a configuration with every key explicit.
pub fn to_toml(config: &ExperimentConfig) -> String {
    let raw = RawConfig {
        preset: None,
        dimension: Some(config.dimension),
        length: Some(config.length),
        alpha: Some(config.alpha),
        temperature: Some(config.temperature),
        p_values: Some(config.p_values.clone()),
        samples: Some(config.samples),
        t_max: Some(config.t_max),
        schedule: Some(config.schedule),
        master_seed: Some(config.master_seed),
        fixed_bonds: Some(config.fixed_bonds),
        allow_p_above_half: Some(config.allow_p_above_half),
        paper_grade: Some(config.paper_grade),
        tail_window: config.tail_window,
        exp_window: config.exp_window,
        power_window: config.power_window,
    };
    toml::to_string(&raw).expect("config is always representable as TOML")
}
