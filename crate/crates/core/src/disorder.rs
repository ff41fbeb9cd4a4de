//! Quenched ±1 couplings.
//!
//! Each site stores its `d` forward couplings (toward the +1 neighbor on each
//! axis), so `J_ij` and `J_ji` are the same stored value.

use std::io::{BufRead, Write};

use rand_core::RngCore;

use crate::error::{Error, Result};
use crate::lattice::LatticeGeometry;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct BondTable {
    geometry: LatticeGeometry,
    couplings: Vec<i8>,
    p: f64,
    seed: u64,
}

impl BondTable {
    /// Draws every bond independently: +1 with probability `p`, -1 otherwise.
    ///
    /// Bonds are drawn in site-major, axis-minor order, one `u64` per bond.
    pub fn generate(geometry: &LatticeGeometry, p: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "bond concentration p must lie in [0, 1], got {p}"
            )));
        }
        let n = geometry.sites() * geometry.dim();
        let mut rng = rng::sequential(seed);
        let couplings = (0..n)
            .map(|_| if rng::unit_f64(rng.next_u64()) < p { 1 } else { -1 })
            .collect();
        Ok(Self {
            geometry: geometry.clone(),
            couplings,
            p,
            seed,
        })
    }

    /// Wraps an explicit coupling list in site-major, axis-minor order.
    pub fn from_couplings(geometry: &LatticeGeometry, couplings: Vec<i8>) -> Result<Self> {
        let expected = geometry.sites() * geometry.dim();
        if couplings.len() != expected {
            return Err(Error::SizeMismatch {
                expected,
                got: couplings.len(),
            });
        }
        if let Some(bad) = couplings.iter().find(|&&j| j != 1 && j != -1) {
            return Err(Error::InvalidParameter(format!("coupling {bad} is not ±1")));
        }
        let plus = couplings.iter().filter(|&&j| j == 1).count();
        Ok(Self {
            geometry: geometry.clone(),
            p: plus as f64 / expected as f64,
            couplings,
            seed: 0,
        })
    }

    pub fn geometry(&self) -> &LatticeGeometry {
        &self.geometry
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Raw forward couplings, `d` per site.
    #[inline]
    pub fn forward(&self) -> &[i8] {
        &self.couplings
    }

    /// Coupling from `site` to its forward neighbor on `axis`.
    #[inline]
    pub fn forward_coupling(&self, site: usize, axis: usize) -> i8 {
        self.couplings[site * self.geometry.dim() + axis]
    }

    /// `J_ij` for a nearest-neighbor pair, in either order.
    pub fn coupling(&self, i: usize, j: usize) -> Result<i8> {
        let g = &self.geometry;
        for axis in 0..g.dim() {
            if g.axis_neighbor(i, axis, 1)? == j {
                return Ok(self.forward_coupling(i, axis));
            }
            if g.axis_neighbor(i, axis, -1)? == j {
                return Ok(self.forward_coupling(j, axis));
            }
        }
        Err(Error::NotNeighbors(i, j))
    }

    pub fn plus_fraction(&self) -> f64 {
        let plus = self.couplings.iter().filter(|&&j| j == 1).count();
        plus as f64 / self.couplings.len() as f64
    }

    /// Text dump: a `#` header line then one `+1`/`-1` per line in storage order.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# rbim-bonds d={} L={} p={} seed={}",
            self.geometry.dim(),
            self.geometry.len(),
            self.p,
            self.seed
        )?;
        for &j in &self.couplings {
            writeln!(out, "{}", if j > 0 { "+1" } else { "-1" })?;
        }
        Ok(())
    }

    /// Reads a table written by [`BondTable::write_text`].
    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty bond file".into()))??;
        let mut dim = None;
        let mut len = None;
        let mut p = None;
        let mut seed = None;
        for field in header.trim_start_matches('#').split_whitespace().skip(1) {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad header field `{field}`")))?;
            let bad = |_| Error::Parse(format!("bad header value `{field}`"));
            match k {
                "d" => dim = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "L" => len = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "p" => p = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "seed" => seed = Some(v.parse::<u64>().map_err(|e| bad(e.to_string()))?),
                _ => return Err(Error::Parse(format!("unknown header key `{k}`"))),
            }
        }
        let (Some(dim), Some(len)) = (dim, len) else {
            return Err(Error::Parse("header must give d and L".into()));
        };
        let geometry = LatticeGeometry::new(dim, len)?;
        let mut couplings = Vec::with_capacity(geometry.sites() * dim);
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            couplings.push(match line {
                "+1" | "1" => 1,
                "-1" => -1,
                other => return Err(Error::Parse(format!("bad coupling `{other}`"))),
            });
        }
        let mut table = Self::from_couplings(&geometry, couplings)?;
        if let Some(p) = p {
            table.p = p;
        }
        table.seed = seed.unwrap_or(0);
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_concentrations() {
        let g = LatticeGeometry::new(2, 7).unwrap();
        for seed in 0..5 {
            let all_plus = BondTable::generate(&g, 1.0, seed).unwrap();
            assert!(all_plus.forward().iter().all(|&j| j == 1));
            let all_minus = BondTable::generate(&g, 0.0, seed).unwrap();
            assert!(all_minus.forward().iter().all(|&j| j == -1));
        }
    }

    #[test]
    fn half_concentration_binomial_bound() {
        let g = LatticeGeometry::new(2, 201).unwrap();
        let b = BondTable::generate(&g, 0.5, 77).unwrap();
        let n = (2 * 201 * 201) as f64;
        let bound = 4.0 * 0.5 / n.sqrt();
        assert!((b.plus_fraction() - 0.5).abs() <= bound);
    }

    #[test]
    fn per_bond_mean_over_seeds() {
        let g = LatticeGeometry::new(1, 11).unwrap();
        let p = 0.3;
        let seeds = 20_000;
        let mut total = 0i64;
        for seed in 0..seeds {
            let b = BondTable::generate(&g, p, seed).unwrap();
            total += b.forward()[0] as i64;
        }
        let mean = total as f64 / seeds as f64;
        let se = (1.0 - (2.0 * p - 1.0f64).powi(2)).sqrt() / (seeds as f64).sqrt();
        assert!((mean - (2.0 * p - 1.0)).abs() < 4.0 * se, "mean {mean}");
    }

    #[test]
    fn rejects_bad_p() {
        let g = LatticeGeometry::new(1, 3).unwrap();
        assert!(BondTable::generate(&g, -0.1, 0).is_err());
        assert!(BondTable::generate(&g, 1.5, 0).is_err());
        assert!(BondTable::generate(&g, f64::NAN, 0).is_err());
    }

    #[test]
    fn symmetric_lookup_and_determinism() {
        let g = LatticeGeometry::new(3, 3).unwrap();
        let b = BondTable::generate(&g, 0.5, 3).unwrap();
        assert_eq!(b, BondTable::generate(&g, 0.5, 3).unwrap());
        for i in 0..g.sites() {
            for j in g.neighbors(i).unwrap() {
                assert_eq!(b.coupling(i, j).unwrap(), b.coupling(j, i).unwrap());
            }
        }
        assert!(matches!(b.coupling(0, 13), Err(Error::NotNeighbors(0, 13))));
    }

    #[test]
    fn text_dump_round_trip() {
        let g = LatticeGeometry::new(2, 5).unwrap();
        let b = BondTable::generate(&g, 0.25, 11).unwrap();
        let mut buf = Vec::new();
        b.write_text(&mut buf).unwrap();
        let back = BondTable::read_text(buf.as_slice()).unwrap();
        assert_eq!(back, b);
    }
}
