//! Long-horizon integrator behaviour and decay-rate measurements.

use piezobeam::dynamics::{admissibility_estimate, default_dt, random_smooth_state, run, InputSignal, RunPlan};
use piezobeam::generator::{assemble_generator, GeneratorAssembly};
use piezobeam::grid::StaggeredGrid;
use piezobeam::params::BeamParameters;
use piezobeam::spectral::{compute_spectrum, decay_rate_fit_series, real_mode, SymmetrizedSystem};
use piezobeam::state::StateVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn toy(gamma: f64, n: usize) -> GeneratorAssembly<f64> {
    assemble_generator(&BeamParameters::toy().with_gamma(gamma), &StaggeredGrid::new(1.0, n).unwrap()).unwrap()
}

#[test]
fn ten_thousand_steps_conserve_energy_and_gauge() {
    let a = toy(1.0, 32);
    let y0 = random_smooth_state(&a, &mut ChaCha8Rng::seed_from_u64(42));
    let mut plan = RunPlan::open_loop(default_dt(&a), 10_000);
    plan.stride = 50;
    let s = run(&a, &y0, &plan).unwrap();
    assert!(s.max_relative_drift() <= 1e-9, "{}", s.max_relative_drift());
    assert!(s.max_gauge_residual() <= 1e-10, "{}", s.max_gauge_residual());
}

#[test]
fn conservative_run_has_zero_decay_rate() {
    let a = toy(0.5, 16);
    let y0 = random_smooth_state(&a, &mut ChaCha8Rng::seed_from_u64(7));
    let mut plan = RunPlan::open_loop(0.01, 400);
    plan.stride = 4;
    let s = run(&a, &y0, &plan).unwrap();
    let fit = decay_rate_fit_series(&s, (0.0, 4.0)).unwrap();
    assert!(fit.rate.abs() <= 1e-9, "{}", fit.rate);
}

#[test]
fn feedback_leaves_unobservable_modes_undamped() {
    let a = toy(0.0, 32);
    let sys = SymmetrizedSystem::new(&a).unwrap();
    let r = compute_spectrum(&a, 1e-8).unwrap();
    // index among positive nonzero frequencies of the first non-stabilizable mode
    let positive: Vec<_> = r.modes.iter().filter(|m| m.lambda.im > 1e-8 * r.spectral_radius).collect();
    let k = positive.iter().position(|m| !m.stabilizable).unwrap();
    let y0 = StateVector::from_vector(32, a.lift(&real_mode(&sys, k).unwrap().1)).unwrap();
    let mut plan = RunPlan::open_loop(default_dt(&a), 3000);
    plan.gain = 1.0;
    plan.stride = 10;
    let s = run(&a, &y0, &plan).unwrap();
    let t_end = *s.times.last().unwrap();
    let fit = decay_rate_fit_series(&s, (0.0, t_end)).unwrap();
    assert!(fit.rate.abs() <= 1e-6, "{}", fit.rate);
}

#[test]
fn feedback_damps_observable_modes() {
    let a = toy(0.0, 16);
    let y0 = random_smooth_state(&a, &mut ChaCha8Rng::seed_from_u64(3));
    let mut plan = RunPlan::open_loop(default_dt(&a), 2000);
    plan.gain = 1.0;
    plan.stride = 20;
    let s = run(&a, &y0, &plan).unwrap();
    let e = s.totals();
    assert!(e.last().unwrap() < &(0.99 * e[0]));
}

#[test]
fn driven_run_balances_energy_with_supplied_work() {
    // E(T) − E(0) = Σ u·B*y_mid·dt for the midpoint rule
    let a = toy(0.8, 16);
    let y0 = StateVector::zeros(16);
    let mut plan = RunPlan::open_loop(0.005, 400);
    plan.input = InputSignal::Sinusoid { amplitude: 0.5, frequency: 1.3, phase: 0.2 };
    plan.keep_states = true;
    let s = run(&a, &y0, &plan).unwrap();
    let b = a.observation();
    let mut work = 0.0;
    for (i, u) in s.input_values.iter().enumerate() {
        let mid = (&s.states[i] + &s.states[i + 1]) * 0.5;
        work += u * b.dot(&mid) * plan.dt;
    }
    let e = s.totals();
    let gain = e.last().unwrap() - e[0];
    assert!(gain > 0.0);
    assert!((gain - work).abs() <= 1e-10 * gain, "{gain} vs {work}");
}

#[test]
fn admissibility_constant_is_finite_and_seeded() {
    let a = toy(1.0, 16);
    let e1 = admissibility_estimate(12, 0.5, &a, 42).unwrap();
    let e2 = admissibility_estimate(12, 0.5, &a, 42).unwrap();
    assert!(e1.constant.is_finite() && e1.constant > 0.0);
    assert_eq!(e1.ratios, e2.ratios);
    assert_eq!(e1.ratios.len() + e1.skipped, 12);
}

#[test]
fn trajectory_csv_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = toy(1.0, 12);
    let y0 = random_smooth_state(&a, &mut ChaCha8Rng::seed_from_u64(42));
    let mut plan = RunPlan::open_loop(default_dt(&a), 100);
    plan.input = InputSignal::Constant(0.1);
    let mut texts = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let path = dir.path().join(name);
        run(&a, &y0, &plan).unwrap().write_csv(&path).unwrap();
        texts.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
    let header = String::from_utf8(texts[0].clone()).unwrap();
    assert!(header.starts_with("time,E_total,"));
}
