use proptest::prelude::*;

use rbim_core::disorder::BondTable;
use rbim_core::dynamics::{heatbath_prob, ModelParams, Schedule, SpinState};
use rbim_core::lattice::LatticeGeometry;
use rbim_core::observables::PersistenceTracker;
use rbim_core::oracle::transition_matrix;
use rbim_core::rng::{derive_seed, ThermalNoise};

fn config_index(s: &SpinState) -> usize {
    s.spins()
        .iter()
        .enumerate()
        .map(|(i, &x)| if x > 0 { 1 << i } else { 0 })
        .sum()
}

fn spins_of(config: usize) -> Vec<i8> {
    (0..3).map(|i| if config >> i & 1 == 1 { 1 } else { -1 }).collect()
}

#[test]
fn empirical_one_step_matrix_matches_product_form() {
    let g = LatticeGeometry::new(1, 3).unwrap();
    let bonds = [1i8, -1, 1];
    let table = BondTable::from_couplings(&g, bonds.to_vec()).unwrap();
    let params = ModelParams::new(4.0, 3.5, Schedule::Synchronous).unwrap();
    let exact = transition_matrix(bonds, 4.0, 3.5);
    let trials = 40_000u64;
    for from in 0..8 {
        let mut counts = [0u64; 8];
        for k in 0..trials {
            let mut s = SpinState::from_spins(&g, spins_of(from)).unwrap();
            let noise = ThermalNoise::new(derive_seed(31, &[from as u64, k]));
            s.step(&table, &params, &noise);
            counts[config_index(&s)] += 1;
        }
        for to in 0..8 {
            let q = exact[from][to];
            let f = counts[to] as f64 / trials as f64;
            let se = (q * (1.0 - q) / trials as f64).sqrt().max(1e-4);
            assert!((f - q).abs() < 5.0 * se, "from {from} to {to}: {f} vs {q}");
        }
    }
}

#[test]
fn infinite_temperature_halves_persistence() {
    let g = LatticeGeometry::new(3, 21).unwrap();
    let bonds = BondTable::generate(&g, 0.2, 4).unwrap();
    let params = ModelParams::new(4.0, 1e12, Schedule::Synchronous).unwrap();
    let noise = ThermalNoise::new(8);
    let mut s = SpinState::random(&g, 2);
    let mut tracker = PersistenceTracker::new(&s);
    let n = g.sites() as f64;
    for t in 1..=6 {
        s.step_observed(&bonds, &params, &noise, true, |i| tracker.mark_flipped(i));
        let q = 0.5f64.powi(t);
        let se = (q * (1.0 - q) / n).sqrt();
        assert!((tracker.probability() - q).abs() < 5.0 * se, "t={t}");
    }
}

#[test]
fn random_sequential_catches_double_flips() {
    // a site flipped twice within one sweep is back at its old value but no
    // longer persistent
    let g = LatticeGeometry::new(2, 9).unwrap();
    let bonds = BondTable::generate(&g, 0.5, 3).unwrap();
    let params = ModelParams::new(4.0, 1e9, Schedule::RandomSequential).unwrap();
    let noise = ThermalNoise::new(12);
    let mut s = SpinState::random(&g, 1);
    let initial = s.spins().to_vec();
    let mut tracker = PersistenceTracker::new(&s);
    s.step_observed(&bonds, &params, &noise, false, |i| tracker.mark_flipped(i));
    let unchanged = s.spins().iter().zip(&initial).filter(|(a, b)| a == b).count();
    assert!(tracker.count() < unchanged);
    for i in 0..g.sites() {
        if tracker.is_persistent(i) {
            assert_eq!(s.spins()[i], initial[i]);
        }
    }
}

proptest! {
    #[test]
    fn heatbath_is_a_monotone_probability(h in -50.0f64..50.0, dh in 0.0f64..5.0, t in 0.01f64..100.0) {
        let a = heatbath_prob(h, t);
        let b = heatbath_prob(h + dh, t);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b >= a);
        prop_assert!((heatbath_prob(-h, t) - (1.0 - a)).abs() < 1e-12);
    }

    #[test]
    fn index_round_trip(dim in 1usize..=5, k in 1usize..5, site_frac in 0.0f64..1.0) {
        let len = 2 * k + 1;
        let g = LatticeGeometry::new(dim, len).unwrap();
        let site = ((g.sites() as f64 * site_frac) as usize).min(g.sites() - 1);
        prop_assert_eq!(g.index(&g.coords(site).unwrap()).unwrap(), site);
        for (n, j) in g.neighbors(site).unwrap().into_iter().enumerate() {
            let back = g.axis_neighbor(j, n / 2, if n % 2 == 0 { 1 } else { -1 }).unwrap();
            prop_assert_eq!(back, site);
        }
    }

    #[test]
    fn tracker_agrees_with_comparison(seed in any::<u64>(), steps in 1usize..30) {
        let g = LatticeGeometry::new(2, 7).unwrap();
        let bonds = BondTable::generate(&g, 0.3, seed).unwrap();
        let params = ModelParams::new(4.0, 2.0, Schedule::Synchronous).unwrap();
        let noise = ThermalNoise::new(seed ^ 1);
        let mut s = SpinState::random(&g, seed ^ 2);
        let mut by_flip = PersistenceTracker::new(&s);
        let mut by_compare = PersistenceTracker::new(&s);
        for _ in 0..steps {
            s.step_observed(&bonds, &params, &noise, false, |i| by_flip.mark_flipped(i));
            by_compare.update(&s).unwrap();
        }
        prop_assert_eq!(by_flip.count(), by_compare.count());
        prop_assert_eq!(by_flip.count(), by_flip.popcount());
    }
}
