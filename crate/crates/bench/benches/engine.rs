use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};

use rbim_bench::fixture;
use rbim_core::fitting::{compare_models, fit_exponential, fit_stretched_exponential, DecaySeries};
use rbim_core::{ModelParams, PersistenceTracker, Schedule, ThermalNoise};

fn sweeps(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep");
    for (dim, len, temp) in [(1, 100_001, 3.5), (2, 201, 3.0), (3, 51, 2.5), (5, 11, 1.4)] {
        let (bonds, state) = fixture(dim, len, 0.3);
        let sites = state.geometry().sites() as u64;
        group.throughput(Throughput::Elements(sites));
        for schedule in [Schedule::Synchronous, Schedule::RandomSequential] {
            let params = ModelParams::new(4.0, temp, schedule).unwrap();
            let noise = ThermalNoise::new(3);
            group.bench_function(format!("d{dim}-L{len}-{}", schedule.as_str()), |b| {
                b.iter_batched_ref(
                    || state.clone(),
                    |s| s.step(&bonds, &params, &noise),
                    BatchSize::LargeInput,
                )
            });
        }
    }
    group.finish();
}

fn tracker(c: &mut Criterion) {
    let (bonds, mut state) = fixture(3, 51, 0.3);
    let params = ModelParams::new(4.0, 2.5, Schedule::Synchronous).unwrap();
    let noise = ThermalNoise::new(3);
    let mut tracker = PersistenceTracker::new(&state);
    state.step(&bonds, &params, &noise);
    c.bench_function("tracker-update-d3-L51", |b| {
        b.iter(|| tracker.update(black_box(&state)).unwrap())
    });
}

fn fits(c: &mut Criterion) {
    let s = DecaySeries::from_fn(0..=50, |t| (-(0.3 * t).powf(0.7)).exp());
    let w = rbim_core::Window::new(1.0, 50.0);
    c.bench_function("fit-exponential", |b| b.iter(|| fit_exponential(black_box(&s), w).unwrap()));
    c.bench_function("fit-stretched", |b| {
        b.iter(|| fit_stretched_exponential(black_box(&s), w).unwrap())
    });
    c.bench_function("compare-models", |b| b.iter(|| compare_models(black_box(&s), w).unwrap()));
}

criterion_group!(benches, sweeps, tracker, fits);
criterion_main!(benches);
