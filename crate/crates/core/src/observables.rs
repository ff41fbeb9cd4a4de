//! Persistence, magnetization and return observables.

use serde::{Deserialize, Serialize};

use crate::dynamics::SpinState;
use crate::error::{Error, Result};
use crate::fitting::linear_regression;

/// Per-site "never flipped" flags stored as a bitset with a running count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PersistenceTracker {
    flags: Vec<u64>,
    count: usize,
    sites: usize,
    initial: Vec<i8>,
}

impl PersistenceTracker {
    /// Starts tracking from `state`, which is taken as the `t = 0` configuration.
    pub fn new(state: &SpinState) -> Self {
        let sites = state.spins().len();
        let words = sites.div_ceil(64);
        let mut flags = vec![u64::MAX; words];
        if !sites.is_multiple_of(64) {
            flags[words - 1] = (1u64 << (sites % 64)) - 1;
        }
        Self {
            flags,
            count: sites,
            sites,
            initial: state.spins().to_vec(),
        }
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    /// `n(t)`, the number of sites that never left their initial value.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn initial_spins(&self) -> &[i8] {
        &self.initial
    }

    #[inline]
    pub fn is_persistent(&self, site: usize) -> bool {
        self.flags[site / 64] >> (site % 64) & 1 == 1
    }

    /// Clears the flag of `site`. Flags never come back.
    #[inline]
    pub fn mark_flipped(&mut self, site: usize) {
        let word = &mut self.flags[site / 64];
        let mask = 1u64 << (site % 64);
        if *word & mask != 0 {
            *word &= !mask;
            self.count -= 1;
        }
    }

    /// Clears every flag whose site currently differs from its initial value.
    pub fn update(&mut self, state: &SpinState) -> Result<()> {
        let spins = state.spins();
        if spins.len() != self.sites {
            return Err(Error::SizeMismatch {
                expected: self.sites,
                got: spins.len(),
            });
        }
        for (w, (now, init)) in spins.chunks(64).zip(self.initial.chunks(64)).enumerate() {
            let word = self.flags[w];
            if word == 0 {
                continue;
            }
            let mut changed = 0u64;
            for (b, (a, c)) in now.iter().zip(init).enumerate() {
                changed |= ((a != c) as u64) << b;
            }
            let cleared = word & changed;
            self.flags[w] = word & !cleared;
            self.count -= cleared.count_ones() as usize;
        }
        Ok(())
    }

    /// `P(t) = n(t) / N`.
    pub fn probability(&self) -> f64 {
        self.count as f64 / self.sites as f64
    }

    pub fn popcount(&self) -> usize {
        self.flags.iter().map(|w| w.count_ones() as usize).sum()
    }
}

/// One measurement of a single sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesRecord {
    pub t: u64,
    pub persistence: f64,
    pub magnetization: f64,
    /// `ln|M(t)| - ln|M(t-1)|`, absent at `t = 0`.
    pub ret: Option<f64>,
}

/// Log-return of the absolute magnetization.
///
/// Both magnetizations are nonzero on any odd-`N` lattice.
pub fn market_return(m_now: f64, m_prev: f64) -> f64 {
    assert!(
        m_now != 0.0 && m_prev != 0.0,
        "zero magnetization; lattice site count must be odd"
    );
    m_now.abs().ln() - m_prev.abs().ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualPersistence {
    pub p_inf: f64,
    pub residuals: Vec<f64>,
}

/// Estimates `P(inf)` as the mean of the last `tail_window` points and returns
/// `r(t) = P(t) - P(inf)` for the whole series.
pub fn residual_persistence(series: &[f64], tail_window: usize) -> Result<ResidualPersistence> {
    if series.is_empty() {
        return Err(Error::InsufficientData("empty persistence series".into()));
    }
    if tail_window == 0 || tail_window > series.len() {
        return Err(Error::InsufficientData(format!(
            "tail window {tail_window} does not fit series of length {}",
            series.len()
        )));
    }
    let tail = &series[series.len() - tail_window..];
    let p_inf = tail.iter().sum::<f64>() / tail_window as f64;
    Ok(ResidualPersistence {
        p_inf,
        residuals: series.iter().map(|p| p - p_inf).collect(),
    })
}

/// Default tail window: the last 10% of the series, at least one point.
pub fn default_tail_window(len: usize) -> usize {
    (len / 10).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockingThresholds {
    pub p_inf: f64,
    /// A tail slope within this many standard errors of zero counts as flat.
    pub slope_sigmas: f64,
}

impl Default for BlockingThresholds {
    fn default() -> Self {
        Self {
            p_inf: 1e-3,
            slope_sigmas: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockingReport {
    pub p_inf: f64,
    pub tail_slope: f64,
    pub tail_slope_stderr: f64,
    pub blocked: bool,
}

/// Flags blocking when the tail plateau is above threshold and the tail
/// slope of `P(t)` is statistically indistinguishable from zero.
pub fn blocking_diagnostic(
    series: &[f64],
    tail_window: usize,
    thresholds: BlockingThresholds,
) -> Result<BlockingReport> {
    let residual = residual_persistence(series, tail_window)?;
    let start = series.len() - tail_window;
    let (tail_slope, tail_slope_stderr) = if tail_window >= 3 {
        let xs: Vec<f64> = (start..series.len()).map(|t| t as f64).collect();
        let fit = linear_regression(&xs, &series[start..])?;
        (fit.slope, fit.slope_stderr)
    } else {
        (0.0, 0.0)
    };
    let flat = tail_slope.abs() <= thresholds.slope_sigmas * tail_slope_stderr;
    Ok(BlockingReport {
        p_inf: residual.p_inf,
        tail_slope,
        tail_slope_stderr,
        blocked: residual.p_inf > thresholds.p_inf && flat,
    })
}

/// Sample excess kurtosis `m4 / m2^2 - 3` with population central moments.
pub fn excess_kurtosis(values: &[f64]) -> Result<f64> {
    let mut acc = MomentAccumulator::default();
    for &v in values {
        acc.push(v);
    }
    acc.excess_kurtosis()
}

/// Streaming central moments up to fourth order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MomentAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl MomentAccumulator {
    pub fn push(&mut self, x: f64) {
        let n1 = self.n as f64;
        self.n += 1;
        let n = self.n as f64;
        let delta = x - self.mean;
        let delta_n = delta / n;
        let delta_n2 = delta_n * delta_n;
        let term1 = delta * delta_n * n1;
        self.mean += delta_n;
        self.m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * self.m2
            - 4.0 * delta_n * self.m3;
        self.m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;
    }

    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn excess_kurtosis(&self) -> Result<f64> {
        if self.n < 4 {
            return Err(Error::InsufficientData(format!(
                "kurtosis needs at least 4 values, got {}",
                self.n
            )));
        }
        let n = self.n as f64;
        let var = self.m2 / n;
        if !(var > f64::EPSILON * self.mean * self.mean) {
            return Err(Error::DegenerateVariance);
        }
        Ok(self.m4 / n / (var * var) - 3.0)
    }
}
