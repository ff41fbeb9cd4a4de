//! Exact-chain check of the synchronous dynamics on a three-site ring.
//!
//! For `d = 1`, `L = 3` the chain over `(configuration, persistence mask)`
//! has 64 states, so `E[P(t)]` can be evolved exactly and compared with
//! Monte Carlo runs of the production engine. The exact side uses its own
//! ring arithmetic and heat-bath formula and shares no code with
//! [`crate::dynamics`].

use serde::{Deserialize, Serialize};

use crate::disorder::BondTable;
use crate::dynamics::{ModelParams, Schedule, SpinState};
use crate::lattice::LatticeGeometry;
use crate::observables::PersistenceTracker;
use crate::rng::{derive_seed, ThermalNoise};

const SITES: usize = 3;
const CONFIGS: usize = 1 << SITES;

/// Bit `i` set means spin `i` is +1. Bond `i` couples sites `i` and `i+1 mod 3`.
fn spin(config: usize, i: usize) -> f64 {
    if config >> i & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// One-step transition matrix `m[from][to]` of the synchronous chain.
pub fn transition_matrix(bonds: [i8; 3], alpha: f64, temperature: f64) -> [[f64; CONFIGS]; CONFIGS] {
    let mut m = [[0.0; CONFIGS]; CONFIGS];
    for (from, row) in m.iter_mut().enumerate() {
        let mag: f64 = (0..SITES).map(|i| spin(from, i)).sum::<f64>() / SITES as f64;
        let up: Vec<f64> = (0..SITES)
            .map(|i| {
                let right = (i + 1) % SITES;
                let left = (i + SITES - 1) % SITES;
                let h = bonds[i] as f64 * spin(from, right) + bonds[left] as f64 * spin(from, left)
                    - alpha * mag.abs();
                1.0 / (1.0 + (-2.0 * h / temperature).exp())
            })
            .collect();
        for (to, cell) in row.iter_mut().enumerate() {
            *cell = (0..SITES)
                .map(|i| if to >> i & 1 == 1 { up[i] } else { 1.0 - up[i] })
                .product();
        }
    }
    m
}

/// Exact `E[P(t)]` for `t = 0..=steps` from a uniform random start.
pub fn exact_persistence(bonds: [i8; 3], alpha: f64, temperature: f64, steps: usize) -> Vec<f64> {
    let m = transition_matrix(bonds, alpha, temperature);
    let full = CONFIGS - 1;
    // dist[config][mask]
    let mut dist = [[0.0f64; CONFIGS]; CONFIGS];
    for row in dist.iter_mut() {
        row[full] = 1.0 / CONFIGS as f64;
    }
    let expect = |dist: &[[f64; CONFIGS]; CONFIGS]| {
        let mut e = 0.0;
        for row in dist {
            for (mask, &w) in row.iter().enumerate() {
                e += w * mask.count_ones() as f64 / SITES as f64;
            }
        }
        e
    };
    let mut out = vec![expect(&dist)];
    for _ in 0..steps {
        let mut next = [[0.0f64; CONFIGS]; CONFIGS];
        for (c, row) in dist.iter().enumerate() {
            for (mask, &w) in row.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for (c2, &pt) in m[c].iter().enumerate() {
                    // masked sites still hold their initial value, so a
                    // change relative to `c` is a change relative to t = 0
                    let mask2 = mask & !(c ^ c2);
                    next[c2][mask2] += w * pt;
                }
            }
        }
        dist = next;
        out.push(expect(&dist));
    }
    out
}

/// Monte Carlo estimate of `E[P(t)]` and its standard error using the
/// production engine with the given fixed bonds.
pub fn monte_carlo_persistence(
    bonds: [i8; 3],
    params: &ModelParams,
    steps: usize,
    samples: u64,
    seed: u64,
) -> (Vec<f64>, Vec<f64>) {
    let geometry = LatticeGeometry::new(1, 3).expect("valid ring");
    let table = BondTable::from_couplings(&geometry, bonds.to_vec()).expect("±1 bonds");
    let mut sum = vec![0.0; steps + 1];
    let mut sum_sq = vec![0.0; steps + 1];
    for k in 0..samples {
        let mut state = SpinState::random(&geometry, derive_seed(seed, &[k, 1]));
        let noise = ThermalNoise::new(derive_seed(seed, &[k, 2]));
        let mut tracker = PersistenceTracker::new(&state);
        for t in 0..=steps {
            if t > 0 {
                state.step_observed(&table, params, &noise, false, |i| tracker.mark_flipped(i));
            }
            let p = tracker.probability();
            sum[t] += p;
            sum_sq[t] += p * p;
        }
    }
    let n = samples as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let stderr = mean
        .iter()
        .zip(&sum_sq)
        .map(|(m, s2)| ((s2 / n - m * m).max(0.0) * n / (n - 1.0) / n).sqrt())
        .collect();
    (mean, stderr)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleSettings {
    pub alpha: f64,
    pub temperature: f64,
    pub steps: usize,
    pub samples: u64,
    pub seed: u64,
    pub sigmas: f64,
    pub abs_tolerance: f64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            alpha: 4.0,
            temperature: 3.5,
            steps: 5,
            samples: 1_000_000,
            seed: 0x0A11CE,
            sigmas: 3.0,
            abs_tolerance: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternCheck {
    pub bonds: [i8; 3],
    pub exact: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub settings: OracleSettings,
    pub patterns: Vec<PatternCheck>,
    pub pass: bool,
}

/// Runs the check over all 8 bond patterns.
///
/// `engine_params` drives the Monte Carlo side; pass the settings' own
/// `alpha`/`temperature` for a real check, anything else to confirm that a
/// broken engine is caught.
pub fn run_oracle(settings: OracleSettings, engine_params: ModelParams) -> OracleReport {
    let mut patterns = Vec::with_capacity(8);
    for code in 0..8u64 {
        let bonds = [0, 1, 2].map(|b| if code >> b & 1 == 1 { 1i8 } else { -1 });
        let exact = exact_persistence(bonds, settings.alpha, settings.temperature, settings.steps);
        let (mean, stderr) = monte_carlo_persistence(
            bonds,
            &engine_params,
            settings.steps,
            settings.samples,
            derive_seed(settings.seed, &[code]),
        );
        let pass = (1..=settings.steps).all(|t| {
            let diff = (mean[t] - exact[t]).abs();
            diff <= settings.sigmas * stderr[t] && diff <= settings.abs_tolerance
        });
        patterns.push(PatternCheck {
            bonds,
            exact,
            mean,
            stderr,
            pass,
        });
    }
    let pass = patterns.iter().all(|p| p.pass);
    OracleReport {
        settings,
        patterns,
        pass,
    }
}

/// Engine parameters matching the oracle settings (synchronous schedule).
pub fn matching_params(settings: &OracleSettings) -> ModelParams {
    ModelParams {
        alpha: settings.alpha,
        temperature: settings.temperature,
        schedule: Schedule::Synchronous,
    }
}
