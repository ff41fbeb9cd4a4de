//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! The process exits 0 after reporting unless `RBIM_ACCEPTANCE_STRICT=1`,
//! in which case any FAIL makes it exit 1. `RBIM_SKIP_SLOW=1` skips the
//! d=5 long run.

use std::time::Instant;

use rbim_core::disorder::BondTable;
use rbim_core::dynamics::{ModelParams, Schedule, SpinState};
use rbim_core::experiment::{preset, run_experiment, run_experiment_with, ExperimentConfig, RunOptions};
use rbim_core::fitting::{
    fit_exponential, fit_powerlaw, fit_stretched_exponential, fit_stretched_fixed, DecayModel,
    DecaySeries, Window,
};
use rbim_core::lattice::LatticeGeometry;
use rbim_core::oracle::{matching_params, run_oracle, OracleSettings};
use rbim_core::output::write_series_csv;
use rbim_core::rng::ThermalNoise;

/// Stretched fit counts as materially better when its rss/dof is below this
/// fraction of the exponential's.
const MATERIAL_RSS_RATIO: f64 = 0.5;

type Criterion = fn() -> Outcome;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn desk(name: &str) -> ExperimentConfig {
    preset(name).expect("shipped preset")
}

fn c1_oracle() -> Outcome {
    let settings = OracleSettings::default();
    let report = run_oracle(settings, matching_params(&settings));
    let worst = report
        .patterns
        .iter()
        .flat_map(|p| {
            (1..=settings.steps).map(move |t| ((p.mean[t] - p.exact[t]) / p.stderr[t]).abs())
        })
        .fold(0.0f64, f64::max);
    let failing = report.patterns.iter().filter(|p| !p.pass).count();
    outcome(
        report.pass,
        format!(
            "8 bond patterns x {} samples, worst |diff|/SE = {worst:.2}, failing patterns = {failing}",
            settings.samples
        ),
    )
}

fn c2_infinite_temperature() -> Outcome {
    let config = ExperimentConfig {
        dimension: 2,
        length: 101,
        temperature: 1e9,
        p_values: vec![0.3],
        samples: 100,
        t_max: 10,
        paper_grade: false,
        ..desk("d2-desk")
    };
    let r = run_experiment(&config).unwrap();
    let n = (config.samples as f64) * 101.0 * 101.0;
    let mut worst = 0.0f64;
    for row in &r.results[0].rows[1..] {
        let q = 0.5f64.powi(row.t as i32);
        let se = (q * (1.0 - q) / n).sqrt();
        worst = worst.max((row.p_mean - q).abs() / se);
    }
    outcome(worst <= 4.0, format!("d=2 L=101, t=1..10, worst |P - 2^-t|/SE = {worst:.2} (limit 4)"))
}

fn c3_one_dimension() -> Outcome {
    let config = desk("d1-desk");
    let r = run_experiment(&config).unwrap();
    let gammas: Vec<f64> = r
        .results
        .iter()
        .map(|pr| pr.fits.exponential.as_ref().map_or(f64::NAN, |f| f.decay()))
        .collect();
    let in_range = gammas.iter().all(|g| (0.45..=0.67).contains(g));
    let max = gammas.iter().cloned().fold(f64::MIN, f64::max);
    let min = gammas.iter().cloned().fold(f64::MAX, f64::min);
    let spread = max - min;
    let list: Vec<String> = r
        .results
        .iter()
        .zip(&gammas)
        .map(|(pr, g)| format!("p={}:{g:.4}", pr.p))
        .collect();
    outcome(
        in_range && spread <= 0.12,
        format!("gamma {} in [0.45,0.67]; spread {spread:.4} (limit 0.12)", list.join(" ")),
    )
}

fn c4_two_dimensions() -> Outcome {
    let config = ExperimentConfig {
        p_values: vec![0.1, 0.5],
        ..desk("d2-desk")
    };
    let r = run_experiment(&config).unwrap();
    let fit = |i: usize| r.results[i].fits.exponential.clone().expect("exponential fit");
    let (a, b) = (fit(0), fit(1));
    let diff = (a.decay() - b.decay()).abs();
    let combined = a.decay_uncertainty() + b.decay_uncertainty();
    let in_range = (0.27..=0.43).contains(&a.decay());
    outcome(
        in_range && diff > combined,
        format!(
            "gamma(0.1) = {:.4} +- {:.4} in [0.27,0.43]; gamma(0.5) = {:.4} +- {:.4}; |diff| {diff:.4} vs combined {combined:.4}",
            a.decay(),
            a.decay_uncertainty(),
            b.decay(),
            b.decay_uncertainty()
        ),
    )
}

fn c5_three_dimensions() -> Outcome {
    let config = ExperimentConfig {
        p_values: vec![0.1, 0.5],
        ..desk("d3-desk")
    };
    let r = run_experiment(&config).unwrap();
    let high = r.results[1].fits.exponential.clone().expect("exponential fit at p=0.5");
    let high_ok = (0.30..=0.48).contains(&high.decay());

    let cmp = r.results[0].fits.comparison.clone().expect("comparison at p=0.1");
    let curved = cmp.curvature.is_some_and(|c| c.non_exponential);
    let exp = cmp.fit(DecayModel::Exponential).expect("exponential fit at p=0.1");
    let (stretched_note, not_better) = match cmp.fit(DecayModel::StretchedExponential) {
        Some(s) => {
            let ratio = s.rss_per_dof() / exp.rss_per_dof();
            (format!("stretched/exp rss per dof = {ratio:.4} (materially better below {MATERIAL_RSS_RATIO})"), ratio >= MATERIAL_RSS_RATIO)
        }
        None => ("stretched fit failed".to_string(), true),
    };
    let t_stat = cmp.curvature.map_or(f64::NAN, |c| c.t_statistic);
    outcome(
        high_ok && curved && not_better,
        format!(
            "p=0.5 gamma = {:.4} over [{}, {}] in [0.30,0.48]: {}; p=0.1 curvature t = {t_stat:.1} non-exponential: {curved}; {stretched_note}: {}",
            high.decay(),
            high.window.t_min,
            high.window.t_max,
            verdict(high_ok),
            verdict(not_better)
        ),
    )
}

fn c6_five_dimensions() -> Outcome {
    let config = ExperimentConfig {
        p_values: vec![0.3],
        ..desk("d5-desk")
    };
    assert!(config.samples >= 200 && config.t_max == 200 && config.length == 11);
    let r = run_experiment(&config).unwrap();
    let pr = &r.results[0];
    let pow = pr.fits.power_law.clone().expect("power-law fit");
    let theta_ok = (0.38..=0.62).contains(&pow.decay());
    let blocking = pr.fits.blocking.expect("blocking report");
    let p_inf_ok = blocking.p_inf < 1e-2;
    let end = pr.rows[200].p_mean;
    let mid = pr.rows[100].p_mean;
    let decreasing = end < mid;
    outcome(
        theta_ok && p_inf_ok && decreasing,
        format!(
            "theta = {:.4} over [{}, {}] in [0.38,0.62]: {}; P_inf = {:.4e} < 1e-2: {}; P(200) = {end:.4e} < P(100) = {mid:.4e}: {}",
            pow.decay(),
            pow.window.t_min,
            pow.window.t_max,
            verdict(theta_ok),
            blocking.p_inf,
            verdict(p_inf_ok),
            verdict(decreasing)
        ),
    )
}

fn c7_fit_recovery() -> Outcome {
    let mut errors = Vec::new();
    let e = DecaySeries::from_fn(0..=20, |t| (-0.56 * t).exp());
    let fe = fit_exponential(&e, e.span()).unwrap();
    errors.push(("exp gamma", (fe.decay() - 0.56).abs()));
    errors.push(("exp A", (fe.amplitude() - 1.0).abs()));

    let p = DecaySeries::from_fn(1..=100, |t| t.powf(-0.5));
    let fp = fit_powerlaw(&p, p.span()).unwrap();
    errors.push(("power theta", (fp.decay() - 0.5).abs()));
    errors.push(("power A", (fp.amplitude() - 1.0).abs()));

    let s = DecaySeries::from_fn(1..=60, |t| (-(0.3 * t).powf(0.7)).exp());
    let fs = fit_stretched_exponential(&s, s.span()).unwrap();
    errors.push(("stretched gamma", (fs.decay() - 0.3).abs()));
    errors.push(("stretched beta", (fs.stretch().unwrap() - 0.7).abs()));
    errors.push(("stretched A", (fs.amplitude() - 1.0).abs()));

    let noisy = DecaySeries::from_fn(1..=30, |t| (-0.4 * t + 0.05 * (t * 1.7).sin()).exp());
    let w = Window::new(1.0, 30.0);
    let nested = fit_stretched_fixed(&noisy, w, 1.0).unwrap();
    let plain = fit_exponential(&noisy, w).unwrap();
    errors.push(("beta=1 vs exp gamma", (nested.decay() - plain.decay()).abs()));
    errors.push(("beta=1 vs exp A", (nested.amplitude() - plain.amplitude()).abs()));

    let (name, worst) = errors
        .iter()
        .cloned()
        .fold(("", 0.0f64), |a, b| if b.1 > a.1 { b } else { a });
    outcome(worst < 1e-9, format!("worst |param error| = {worst:.2e} ({name}), limit 1e-9"))
}

fn c8_structural() -> Outcome {
    let mut problems = Vec::new();

    // P(0) = 1 and non-increasing per sample
    let config = ExperimentConfig {
        length: 15,
        samples: 4,
        t_max: 40,
        p_values: vec![0.2],
        paper_grade: false,
        ..desk("d3-desk")
    };
    for k in 0..config.samples {
        let recs = rbim_core::run_sample(&config, 0.2, k).unwrap();
        if recs[0].persistence != 1.0 {
            problems.push(format!("sample {k}: P(0) = {}", recs[0].persistence));
        }
        if recs.windows(2).any(|w| w[1].persistence > w[0].persistence) {
            problems.push(format!("sample {k}: P increased"));
        }
    }

    // spin-sum cache over 1000 steps, both schedules
    let g = LatticeGeometry::new(2, 11).unwrap();
    let bonds = BondTable::generate(&g, 0.3, 5).unwrap();
    for schedule in [Schedule::Synchronous, Schedule::RandomSequential] {
        let params = ModelParams::new(4.0, 3.0, schedule).unwrap();
        let noise = ThermalNoise::new(9);
        let mut s = SpinState::random(&g, 6);
        for _ in 0..1000 {
            s.step(&bonds, &params, &noise);
            if s.spin_sum() != s.recount() {
                problems.push(format!("{}: cache mismatch at t={}", schedule.as_str(), s.t()));
                break;
            }
        }
    }

    // neighbor symmetry and round trip, exhaustive
    for dim in 1..=3 {
        for len in [3, 5] {
            let g = LatticeGeometry::new(dim, len).unwrap();
            for i in 0..g.sites() {
                if g.index(&g.coords(i).unwrap()).unwrap() != i {
                    problems.push(format!("d={dim} L={len}: round trip at {i}"));
                }
                let nb = g.neighbors(i).unwrap();
                if nb.len() != 2 * dim {
                    problems.push(format!("d={dim} L={len}: degree at {i}"));
                }
                for j in nb {
                    if !g.neighbors(j).unwrap().contains(&i) {
                        problems.push(format!("d={dim} L={len}: asymmetric {i}-{j}"));
                    }
                }
            }
        }
    }

    // bond fractions within 5 binomial SE (exact at p = 0 and 1)
    let g = LatticeGeometry::new(2, 301).unwrap();
    let n = (g.sites() * 2) as f64;
    for p in [0.0, 0.25, 0.5, 1.0] {
        let f = BondTable::generate(&g, p, 17).unwrap().plus_fraction();
        let se = (p * (1.0 - p) / n).sqrt();
        if (f - p).abs() > 5.0 * se {
            problems.push(format!("p={p}: +1 fraction {f}"));
        }
    }

    // identical CSV bytes across worker counts
    let config = ExperimentConfig {
        length: 31,
        samples: 6,
        t_max: 25,
        p_values: vec![0.1, 0.4],
        paper_grade: false,
        ..desk("d2-desk")
    };
    let csv = |workers: usize| -> Vec<Vec<u8>> {
        let r = run_experiment_with(&config, RunOptions { workers }).unwrap();
        r.results
            .iter()
            .map(|pr| {
                let mut buf = Vec::new();
                write_series_csv(pr, &mut buf).unwrap();
                buf
            })
            .collect()
    };
    if csv(1) != csv(4) {
        problems.push("CSV bytes differ between 1 and 4 workers".into());
    }

    let detail = if problems.is_empty() {
        "P(0)=1, monotone P, spin-sum cache, neighbors, bond fractions, worker determinism".to_string()
    } else {
        problems.join("; ")
    };
    outcome(problems.is_empty(), detail)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "miss"
    }
}

fn main() {
    let skip_slow = std::env::var("RBIM_SKIP_SLOW").is_ok_and(|v| v == "1");
    let strict = std::env::var("RBIM_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");

    let criteria: Vec<(&str, Option<Criterion>)> = vec![
        ("exact-chain oracle", Some(c1_oracle)),
        ("infinite-temperature law", Some(c2_infinite_temperature)),
        ("d=1 exponential, p-independent", Some(c3_one_dimension)),
        ("d=2 p-dependent exponential", Some(c4_two_dimensions)),
        ("d=3 regime split", Some(c5_three_dimensions)),
        ("d=5 power law, no blocking", if skip_slow { None } else { Some(c6_five_dimensions) }),
        ("fit recovery", Some(c7_fit_recovery)),
        ("structural invariants", Some(c8_structural)),
    ];

    let mut failed = 0;
    let mut passed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let Some(run) = run else {
            println!("SKIP [{}] {name}: RBIM_SKIP_SLOW=1", i + 1);
            continue;
        };
        let start = Instant::now();
        let o = run();
        let secs = start.elapsed().as_secs_f64();
        if o.pass {
            passed += 1;
        } else {
            failed += 1;
        }
        println!(
            "{} [{}] {name}: {} ({secs:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    println!("acceptance: {passed} passed, {failed} failed");
    if strict && failed > 0 {
        std::process::exit(1);
    }
}
