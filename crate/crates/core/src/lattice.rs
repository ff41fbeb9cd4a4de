//! Hypercubic lattice geometry with periodic boundaries.
//!
//! Sites are indexed row-major: the last axis varies fastest, so the stride of
//! axis `a` is `L^(d-1-a)`. This ordering is part of the on-disk contract for
//! bond tables and spin snapshots.

use crate::error::{Error, Result};

/// Immutable description of a `d`-dimensional periodic lattice of odd side `L`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeGeometry {
    dim: usize,
    len: usize,
    sites: usize,
    strides: Vec<usize>,
}

impl LatticeGeometry {
    /// Builds a geometry with `N = L^d` sites.
    ///
    /// `L` must be odd so that the sum of all `N` spins is odd and the
    /// magnetization never vanishes (log-returns stay defined). `L` must also
    /// be at least 3 so that every site has `2d` distinct neighbors.
    pub fn new(dim: usize, len: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidGeometry("dimension must be at least 1".into()));
        }
        if len < 3 {
            return Err(Error::InvalidGeometry(format!(
                "L must be at least 3, got {len}"
            )));
        }
        if len.is_multiple_of(2) {
            return Err(Error::InvalidGeometry(format!(
                "L must be odd (got {len}): an odd site count keeps the magnetization nonzero"
            )));
        }
        let mut sites: usize = 1;
        for _ in 0..dim {
            sites = sites.checked_mul(len).ok_or_else(|| {
                Error::InvalidGeometry(format!("L^d overflows for d={dim}, L={len}"))
            })?;
        }
        // Spin sums are kept in i64 and neighbor indices in usize.
        if sites > i64::MAX as usize {
            return Err(Error::InvalidGeometry(format!(
                "L^d too large for d={dim}, L={len}"
            )));
        }
        let mut strides = vec![1usize; dim];
        for a in (0..dim.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * len;
        }
        Ok(Self {
            dim,
            len,
            sites,
            strides,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    /// Number of sites `N = L^d`.
    #[inline]
    pub fn sites(&self) -> usize {
        self.sites
    }

    /// Neighbors per site, `2d`.
    #[inline]
    pub fn degree(&self) -> usize {
        2 * self.dim
    }

    #[inline]
    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.sites {
            return Err(Error::SiteOutOfRange {
                site,
                sites: self.sites,
            });
        }
        Ok(())
    }

    /// Coordinates of `site`, axis 0 first.
    pub fn coords(&self, site: usize) -> Result<Vec<usize>> {
        self.check_site(site)?;
        Ok(self
            .strides
            .iter()
            .map(|&s| (site / s) % self.len)
            .collect())
    }

    /// Flat index of a coordinate tuple.
    pub fn index(&self, coords: &[usize]) -> Result<usize> {
        if coords.len() != self.dim {
            return Err(Error::InvalidGeometry(format!(
                "expected {} coordinates, got {}",
                self.dim,
                coords.len()
            )));
        }
        let mut site = 0;
        for (a, (&c, &s)) in coords.iter().zip(&self.strides).enumerate() {
            if c >= self.len {
                return Err(Error::InvalidGeometry(format!(
                    "coordinate {c} on axis {a} is outside 0..{}",
                    self.len
                )));
            }
            site += c * s;
        }
        Ok(site)
    }

    /// Neighbor of `site` one step along `axis`, forward if `forward` is set.
    ///
    /// No bounds checks; callers in hot loops guarantee `site < N` and
    /// `axis < d`.
    #[inline]
    pub fn step_unchecked(&self, site: usize, axis: usize, forward: bool) -> usize {
        let stride = self.strides[axis];
        let c = (site / stride) % self.len;
        if forward {
            if c + 1 == self.len {
                site - (self.len - 1) * stride
            } else {
                site + stride
            }
        } else if c == 0 {
            site + (self.len - 1) * stride
        } else {
            site - stride
        }
    }

    /// Neighbor displaced by `direction` (+1 or -1) along `axis`.
    pub fn axis_neighbor(&self, site: usize, axis: usize, direction: i32) -> Result<usize> {
        self.check_site(site)?;
        if axis >= self.dim {
            return Err(Error::InvalidAxis {
                axis,
                dim: self.dim,
            });
        }
        match direction {
            1 => Ok(self.step_unchecked(site, axis, true)),
            -1 => Ok(self.step_unchecked(site, axis, false)),
            other => Err(Error::InvalidGeometry(format!(
                "direction must be +1 or -1, got {other}"
            ))),
        }
    }

    /// The `2d` neighbors of `site`, ordered `(axis 0: -1, +1), (axis 1: -1, +1), ...`.
    pub fn neighbors(&self, site: usize) -> Result<Vec<usize>> {
        self.check_site(site)?;
        let mut out = Vec::with_capacity(self.degree());
        for axis in 0..self.dim {
            out.push(self.step_unchecked(site, axis, false));
            out.push(self.step_unchecked(site, axis, true));
        }
        Ok(out)
    }
}
