//! Heat-bath dynamics with a global `-alpha*|M|` field.
//!
//! The local field on site `i` is
//!
//! ```text
//! h_i = sum_{j in nn(i)} J_ij S_j  -  alpha * |M|,     M = (sum_j S_j) / N
//! ```
//!
//! and the next spin is +1 with probability `q = 1 / (1 + exp(-2 h_i / T))`
//! regardless of its current value.

use std::io::Write;

use rand_core::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::BondTable;
use crate::error::{Error, Result};
use crate::lattice::LatticeGeometry;
use crate::rng::{self, ThermalNoise};

/// Sites per independently seeked noise block in the synchronous update.
pub const SYNC_CHUNK: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// All sites updated from the old configuration and the old `M`.
    #[default]
    Synchronous,
    /// `N` single-site updates at uniformly random sites (with replacement),
    /// each seeing the current configuration and current `M`.
    RandomSequential,
}

impl Schedule {
    pub fn as_str(&self) -> &'static str {
        match self {
            Schedule::Synchronous => "synchronous",
            Schedule::RandomSequential => "random-sequential",
        }
    }
}

impl std::str::FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synchronous" | "sync" => Ok(Schedule::Synchronous),
            "random-sequential" | "random_sequential" | "sequential" => {
                Ok(Schedule::RandomSequential)
            }
            other => Err(Error::InvalidParameter(format!(
                "unknown schedule `{other}` (expected synchronous or random-sequential)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub temperature: f64,
    pub schedule: Schedule,
}

impl ModelParams {
    pub fn new(alpha: f64, temperature: f64, schedule: Schedule) -> Result<Self> {
        let params = Self {
            alpha,
            temperature,
            schedule,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be finite and non-negative, got {}",
                self.alpha
            )));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "temperature must be finite and positive, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Probability that the updated spin is +1 in field `h` at temperature `t`.
///
/// Evaluated as a branch-split logistic so neither branch can overflow; for
/// `|2h/T|` beyond ~745 the result saturates to exactly 0 or 1.
#[inline]
pub fn heatbath_prob(h: f64, temperature: f64) -> f64 {
    let x = 2.0 * h / temperature;
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Spin configuration with a cached total.
#[derive(Debug, Clone)]
pub struct SpinState {
    geometry: LatticeGeometry,
    spins: Vec<i8>,
    spin_sum: i64,
    t: u64,
    scratch: Vec<i8>,
}

impl PartialEq for SpinState {
    fn eq(&self, other: &Self) -> bool {
        self.geometry == other.geometry
            && self.spins == other.spins
            && self.spin_sum == other.spin_sum
            && self.t == other.t
    }
}

impl SpinState {
    /// Independent uniform ±1 spins, 64 sites per `u64` draw.
    pub fn random(geometry: &LatticeGeometry, seed: u64) -> Self {
        let n = geometry.sites();
        let mut rng = rng::sequential(seed);
        let mut spins = Vec::with_capacity(n);
        while spins.len() < n {
            let mut bits = rng.next_u64();
            let take = (n - spins.len()).min(64);
            for _ in 0..take {
                spins.push(if bits & 1 == 1 { 1 } else { -1 });
                bits >>= 1;
            }
        }
        Self::from_spins(geometry, spins).expect("generated spins are valid")
    }

    pub fn from_spins(geometry: &LatticeGeometry, spins: Vec<i8>) -> Result<Self> {
        if spins.len() != geometry.sites() {
            return Err(Error::SizeMismatch {
                expected: geometry.sites(),
                got: spins.len(),
            });
        }
        if let Some(bad) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::InvalidParameter(format!("spin {bad} is not ±1")));
        }
        let spin_sum = recount(&spins);
        Ok(Self {
            geometry: geometry.clone(),
            scratch: Vec::new(),
            spins,
            spin_sum,
            t: 0,
        })
    }

    pub fn geometry(&self) -> &LatticeGeometry {
        &self.geometry
    }

    #[inline]
    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    #[inline]
    pub fn spin_sum(&self) -> i64 {
        self.spin_sum
    }

    #[inline]
    pub fn t(&self) -> u64 {
        self.t
    }

    /// `M = sum / N`; never zero because `N` is odd.
    #[inline]
    pub fn magnetization(&self) -> f64 {
        self.spin_sum as f64 / self.geometry.sites() as f64
    }

    pub fn recount(&self) -> i64 {
        recount(&self.spins)
    }

    /// Nearest-neighbor part of the field, `sum_j J_ij S_j`.
    pub fn coupling_sum(&self, bonds: &BondTable, site: usize) -> Result<i32> {
        let g = &self.geometry;
        if site >= g.sites() {
            return Err(Error::SiteOutOfRange {
                site,
                sites: g.sites(),
            });
        }
        let mut sum = 0i32;
        for axis in 0..g.dim() {
            let fwd = g.step_unchecked(site, axis, true);
            let bwd = g.step_unchecked(site, axis, false);
            sum += (bonds.forward_coupling(site, axis) * self.spins[fwd]) as i32;
            sum += (bonds.forward_coupling(bwd, axis) * self.spins[bwd]) as i32;
        }
        Ok(sum)
    }

    /// Full local field `h_i` at the current instant.
    pub fn local_field(&self, bonds: &BondTable, params: &ModelParams, site: usize) -> Result<f64> {
        Ok(self.coupling_sum(bonds, site)? as f64 - params.alpha * self.magnetization().abs())
    }

    /// Advances one time unit, serially.
    pub fn step(&mut self, bonds: &BondTable, params: &ModelParams, noise: &ThermalNoise) {
        self.step_observed(bonds, params, noise, false, |_| {});
    }

    /// Advances one time unit.
    ///
    /// `on_flip` is called with every site whose value changes during the
    /// step, in update order (a site may be reported more than once under the
    /// random-sequential schedule). `parallel` splits the synchronous update
    /// across the rayon pool; results are bitwise identical either way.
    pub fn step_observed<F: FnMut(usize)>(
        &mut self,
        bonds: &BondTable,
        params: &ModelParams,
        noise: &ThermalNoise,
        parallel: bool,
        on_flip: F,
    ) {
        debug_assert_eq!(bonds.geometry(), &self.geometry);
        match params.schedule {
            Schedule::Synchronous => self.step_synchronous(bonds, params, noise, parallel, on_flip),
            Schedule::RandomSequential => self.step_random_sequential(bonds, params, noise, on_flip),
        }
        self.t += 1;
        debug_assert_eq!(self.spin_sum, recount(&self.spins));
    }

    fn step_synchronous<F: FnMut(usize)>(
        &mut self,
        bonds: &BondTable,
        params: &ModelParams,
        noise: &ThermalNoise,
        parallel: bool,
        mut on_flip: F,
    ) {
        let table = QTable::new(self.geometry.dim(), params, self.magnetization());
        let t = self.t;
        let mut next = std::mem::take(&mut self.scratch);
        next.resize(self.spins.len(), 0);
        let old = &self.spins;
        let geometry = &self.geometry;

        let update_chunk = |(ci, out): (usize, &mut [i8])| {
            let start = ci * SYNC_CHUNK;
            let mut rng = noise.at(t, start);
            for_each_coupling_sum(geometry, bonds, old, start, start + out.len(), |i, sum| {
                let u = rng::unit_f64(rng.next_u64());
                out[i - start] = if u < table.q(sum) { 1 } else { -1 };
            });
        };
        if parallel {
            next.par_chunks_mut(SYNC_CHUNK).enumerate().for_each(update_chunk);
        } else {
            next.chunks_mut(SYNC_CHUNK).enumerate().for_each(update_chunk);
        }

        for (i, (a, b)) in old.iter().zip(&next).enumerate() {
            if a != b {
                on_flip(i);
            }
        }
        self.scratch = std::mem::replace(&mut self.spins, next);
        self.spin_sum = recount(&self.spins);
    }

    fn step_random_sequential<F: FnMut(usize)>(
        &mut self,
        bonds: &BondTable,
        params: &ModelParams,
        noise: &ThermalNoise,
        mut on_flip: F,
    ) {
        let n = self.geometry.sites();
        let inv_n = 1.0 / n as f64;
        let mut rng = noise.at(self.t, 0);
        for _ in 0..n {
            let site = rng::below(rng.next_u64(), n);
            let u = rng::unit_f64(rng.next_u64());
            let sum = self
                .coupling_sum(bonds, site)
                .expect("site drawn inside lattice");
            let h = sum as f64 - params.alpha * (self.spin_sum as f64 * inv_n).abs();
            let new = if u < heatbath_prob(h, params.temperature) { 1 } else { -1 };
            if new != self.spins[site] {
                self.spins[site] = new;
                self.spin_sum += 2 * new as i64;
                on_flip(site);
            }
        }
    }

    /// Snapshot dump: one `+1`/`-1` per line in site order.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# rbim-spins d={} L={} t={}",
            self.geometry.dim(),
            self.geometry.len(),
            self.t
        )?;
        for &s in &self.spins {
            writeln!(out, "{}", if s > 0 { "+1" } else { "-1" })?;
        }
        Ok(())
    }
}

fn recount(spins: &[i8]) -> i64 {
    spins.iter().map(|&s| s as i64).sum()
}

/// Heat-bath probabilities for every attainable neighbor sum at fixed `M`.
struct QTable {
    offset: i32,
    q: Vec<f64>,
}

impl QTable {
    fn new(dim: usize, params: &ModelParams, magnetization: f64) -> Self {
        let z = 2 * dim as i32;
        let global = params.alpha * magnetization.abs();
        let q = (0..=z)
            .map(|k| heatbath_prob((2 * k - z) as f64 - global, params.temperature))
            .collect();
        Self { offset: z, q }
    }

    /// `sum` has the parity of `2d` and lies in `[-2d, 2d]`.
    #[inline]
    fn q(&self, sum: i32) -> f64 {
        self.q[((sum + self.offset) >> 1) as usize]
    }
}

/// Calls `f(i, sum_j J_ij S_j)` for each site in `start..end`, walking
/// coordinates incrementally instead of dividing per site.
#[inline]
fn for_each_coupling_sum<F: FnMut(usize, i32)>(
    g: &LatticeGeometry,
    bonds: &BondTable,
    spins: &[i8],
    start: usize,
    end: usize,
    mut f: F,
) {
    let dim = g.dim();
    let len = g.len();
    let strides = g.strides();
    let j = bonds.forward();
    let wrap: Vec<usize> = strides.iter().map(|&s| (len - 1) * s).collect();

    if dim == 1 {
        for i in start..end {
            let fwd = if i + 1 == len { 0 } else { i + 1 };
            let bwd = if i == 0 { len - 1 } else { i - 1 };
            let sum = j[i] * spins[fwd] + j[bwd] * spins[bwd];
            f(i, sum as i32);
        }
        return;
    }

    let mut coords: Vec<usize> = strides.iter().map(|&s| (start / s) % len).collect();
    for i in start..end {
        let mut sum = 0i32;
        for axis in 0..dim {
            let s = strides[axis];
            let c = coords[axis];
            let fwd = if c + 1 == len { i - wrap[axis] } else { i + s };
            let bwd = if c == 0 { i + wrap[axis] } else { i - s };
            sum += (j[i * dim + axis] * spins[fwd]) as i32;
            sum += (j[bwd * dim + axis] * spins[bwd]) as i32;
        }
        f(i, sum);

        let mut axis = dim - 1;
        loop {
            coords[axis] += 1;
            if coords[axis] < len || axis == 0 {
                break;
            }
            coords[axis] = 0;
            axis -= 1;
        }
    }
}
