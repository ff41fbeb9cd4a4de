//! Benchmark fixtures shared by the criterion targets.

use rbim_core::{BondTable, LatticeGeometry, SpinState};

/// Bonds and a random start for a `d`-dimensional lattice of side `len`.
pub fn fixture(dim: usize, len: usize, p: f64) -> (BondTable, SpinState) {
    let g = LatticeGeometry::new(dim, len).expect("odd side");
    let bonds = BondTable::generate(&g, p, 1).expect("p in range");
    let state = SpinState::random(&g, 2);
    (bonds, state)
}
