//! CSV series files, the run manifest, and an optional gnuplot script.
//!
//! Series CSV layout (one file per `p`, one row per step):
//!
//! ```text
//! t,P_mean,P_stderr,absM_mean,ret_kurtosis_running
//! 0,1.00000000000e0,0.00000000000e0,3.16227766017e-3,nan
//! ```
//!
//! Reals carry 12 significant digits; undefined values are written `nan`.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{AggregateResult, ExperimentConfig, FitReport, KurtosisSummary, PResult};
use crate::fitting::DecaySeries;
use crate::rng::SampleSeeds;

pub const CSV_HEADER: [&str; 5] = ["t", "P_mean", "P_stderr", "absM_mean", "ret_kurtosis_running"];

fn real(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.11e}")
    }
}

/// File name for the series at concentration `p`, e.g. `p0.1.csv`.
pub fn series_file_name(p: f64) -> String {
    format!("p{p}.csv")
}

pub fn write_series_csv<W: Write>(result: &PResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let to_io = |e: csv::Error| Error::Io(e.into());
    w.write_record(CSV_HEADER).map_err(to_io)?;
    for row in &result.rows {
        w.write_record([
            row.t.to_string(),
            real(row.p_mean),
            real(row.p_stderr),
            real(row.abs_m_mean),
            real(row.ret_kurtosis_running),
        ])
        .map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `t`, `P_mean` and `P_stderr` back from a series CSV.
pub fn read_series_csv<R: Read>(input: R) -> Result<DecaySeries> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("missing column `{name}`")))
    };
    let (ct, cp, cs) = (column("t")?, column("P_mean")?, column("P_stderr")?);
    let mut t = Vec::new();
    let mut p = Vec::new();
    let mut se = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let get = |c: usize| -> Result<f64> {
            let field = rec.get(c).unwrap_or("");
            field
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("row {}: bad number `{field}`", line + 2)))
        };
        t.push(get(ct)?);
        p.push(get(cp)?);
        se.push(get(cs)?);
    }
    DecaySeries::new(t, p)?.with_stderr(se)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PManifest {
    pub p: f64,
    pub file: String,
    pub kurtosis: KurtosisSummary,
    pub fits: FitReport,
    pub seeds: Vec<SampleSeeds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software: String,
    pub version: String,
    pub rng_algorithm: String,
    pub schedule: String,
    pub started: String,
    pub finished: String,
    pub config: ExperimentConfig,
    /// Same configuration as a TOML document accepted by `parse_config`.
    pub config_toml: String,
    pub outputs: Vec<String>,
    pub results: Vec<PManifest>,
}

impl RunManifest {
    pub fn new(result: &AggregateResult, started: String, finished: String) -> Self {
        let results: Vec<PManifest> = result
            .results
            .iter()
            .map(|r| PManifest {
                p: r.p,
                file: series_file_name(r.p),
                kurtosis: r.kurtosis,
                fits: r.fits.clone(),
                seeds: r.seeds.clone(),
            })
            .collect();
        let mut outputs: Vec<String> = results.iter().map(|r| r.file.clone()).collect();
        outputs.push(MANIFEST_FILE.to_string());
        Self {
            software: "rbim".to_string(),
            version: result.version.clone(),
            rng_algorithm: result.rng_algorithm.clone(),
            schedule: result.config.schedule.as_str().to_string(),
            started,
            finished,
            config: result.config.clone(),
            config_toml: crate::config::to_toml(&result.config),
            outputs,
            results,
        }
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const GNUPLOT_FILE: &str = "plot.gp";

/// Writes one CSV per `p` plus `manifest.json` into `dir`.
pub fn write_run(
    dir: &Path,
    result: &AggregateResult,
    started: String,
    finished: String,
    gnuplot: bool,
) -> Result<RunManifest> {
    std::fs::create_dir_all(dir)?;
    for r in &result.results {
        let file = std::fs::File::create(dir.join(series_file_name(r.p)))?;
        write_series_csv(r, std::io::BufWriter::new(file))?;
    }
    let mut manifest = RunManifest::new(result, started, finished);
    if gnuplot {
        let files: Vec<String> = result.results.iter().map(|r| series_file_name(r.p)).collect();
        let log_log = result.config.dimension >= 5;
        std::fs::write(dir.join(GNUPLOT_FILE), gnuplot_script(&files, log_log))?;
        manifest.outputs.push(GNUPLOT_FILE.to_string());
    }
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(dir.join(MANIFEST_FILE), json + "\n")?;
    Ok(manifest)
}

/// A gnuplot script plotting `P_mean` against `t` on semi-log (or log-log) axes.
pub fn gnuplot_script(files: &[String], log_log: bool) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set key autotitle columnhead\n");
    s.push_str("set xlabel 't'\nset ylabel 'P(t)'\n");
    s.push_str(if log_log { "set logscale xy\n" } else { "set logscale y\n" });
    let plots: Vec<String> = files
        .iter()
        .map(|f| format!("'{f}' using 1:2:3 with yerrorlines title '{f}'"))
        .collect();
    s.push_str("plot ");
    s.push_str(&plots.join(", \\\n     "));
    s.push('\n');
    s
}
