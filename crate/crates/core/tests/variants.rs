//! Electrostatic clamped-free model and the charge-actuated magnetic model.

use nalgebra::DVector;
use piezobeam::dynamics::{run, InputSignal, RunPlan};
use piezobeam::generator::assemble_generator;
use piezobeam::grid::StaggeredGrid;
use piezobeam::params::BeamParameters;
use piezobeam::state::{Field, StateVector};
use piezobeam::variants::{
    assemble_charge_magnetic, assemble_electrostatic, boundary_feedback_simulate, electrostatic_default_dt,
    simulate_electrostatic,
};

fn grid(n: usize) -> StaggeredGrid<f64> {
    StaggeredGrid::new(1.0, n).unwrap()
}

#[test]
fn electrostatic_open_loop_conserves_energy() {
    let a = assemble_electrostatic(&BeamParameters::toy(), &grid(32)).unwrap();
    let y0 = a.mode(0).unwrap() + a.mode(3).unwrap() * 0.5;
    let mut plan = RunPlan::open_loop(electrostatic_default_dt(&a), 10_000);
    plan.stride = 100;
    let s = simulate_electrostatic(&a, &y0, &plan).unwrap();
    assert!(s.max_relative_drift() <= 1e-9, "{}", s.max_relative_drift());
}

#[test]
fn electrostatic_mass_is_positive_definite() {
    let a = assemble_electrostatic(&BeamParameters::toy(), &grid(16)).unwrap();
    assert!(a.mass().clone().cholesky().is_some());
    assert_eq!(a.spectrum(1e-8).unwrap().kernel_dimension, 0);
}

#[test]
fn coupling_stiffens_the_lowest_mode() {
    let base = BeamParameters::toy();
    let lowest = |gamma: f64| {
        let a = assemble_electrostatic(&base.with_gamma(gamma), &grid(32)).unwrap();
        a.spectrum(1e-8).unwrap().eigenvalues.iter().map(|l| l.im).filter(|w| *w > 0.0).fold(f64::INFINITY, f64::min)
    };
    let (w0, w1, w2) = (lowest(0.0), lowest(0.5), lowest(1.0));
    assert!(w0 < w1 && w1 < w2, "{w0} {w1} {w2}");
}

#[test]
fn boundary_feedback_dissipates_monotonically() {
    let a = assemble_electrostatic(&BeamParameters::toy(), &grid(32)).unwrap();
    let y0 = a.mode(0).unwrap();
    let dt = electrostatic_default_dt(&a);
    let s = boundary_feedback_simulate(&a, 1.0, &y0, 3.0, dt, 1).unwrap();
    let e = s.totals();
    for w in e.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-13));
    }
    assert!(*e.last().unwrap() > 0.0);
    assert!(*e.last().unwrap() < 0.5 * e[0]);
}

#[test]
fn boundary_feedback_from_rest_stays_at_rest() {
    let a = assemble_electrostatic(&BeamParameters::toy(), &grid(16)).unwrap();
    let s = boundary_feedback_simulate(&a, 2.0, &DVector::zeros(a.dim()), 1.0, 0.01, 1).unwrap();
    assert!(s.totals().iter().all(|e| *e == 0.0));
}

#[test]
fn boundary_feedback_requires_dissipative_sign() {
    let a = assemble_electrostatic(&BeamParameters::toy().with_gamma(-1.0), &grid(16)).unwrap();
    assert!(boundary_feedback_simulate(&a, 1.0, &DVector::zeros(a.dim()), 1.0, 0.01, 1).is_err());
    let b = assemble_electrostatic(&BeamParameters::toy(), &grid(16)).unwrap();
    assert!(boundary_feedback_simulate(&b, -1.0, &DVector::zeros(b.dim()), 1.0, 0.01, 1).is_err());
}

#[test]
fn charge_influence_has_two_boundary_entries() {
    let a = assemble_charge_magnetic(&BeamParameters::toy(), &grid(24)).unwrap();
    let b = a.control();
    let support: Vec<usize> = (0..b.len()).filter(|&i| b[i] != 0.0).collect();
    let r = a.layout().range(Field::Velocity);
    assert_eq!(support, vec![r.start, r.end - 1]);
    assert_eq!(b[r.start], -b[r.end - 1]);
    assert!(a.is_distributional());
}

#[test]
fn charge_influence_norm_grows_with_resolution() {
    let norms: Vec<f64> = [32, 64, 128, 256]
        .iter()
        .map(|&n| {
            let a = assemble_charge_magnetic(&BeamParameters::toy(), &grid(n)).unwrap();
            a.energy_norm_sq(a.control()).sqrt()
        })
        .collect();
    for w in norms.windows(2) {
        // ‖b‖_M² ∝ 1/Δx
        assert!((w[1] / w[0] - 2f64.sqrt()).abs() < 1e-12, "{norms:?}");
    }
}

#[test]
fn charge_model_shares_the_current_generator() {
    let p = BeamParameters::toy();
    let a = assemble_charge_magnetic(&p, &grid(16)).unwrap();
    let c = assemble_generator(&p, &grid(16)).unwrap();
    assert_eq!(a.generator(), c.generator());
    assert_eq!(a.mass(), c.mass());
}

#[test]
fn charge_step_response_is_antisymmetric() {
    let n = 32;
    let a = assemble_charge_magnetic(&BeamParameters::toy(), &grid(n)).unwrap();
    let mut plan = RunPlan::open_loop(0.002, 300);
    plan.input = InputSignal::Constant(1.0);
    plan.keep_states = true;
    let s = run(&a, &StateVector::zeros(n), &plan).unwrap();
    let y = StateVector::from_vector(n, s.states.last().unwrap().clone()).unwrap();
    let v = y.field(Field::Velocity);
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    assert!(scale > 0.0);
    for j in 0..=n {
        assert!((v[j] + v[n - j]).abs() <= 1e-10 * scale, "node {j}: {v:?}");
    }
}
