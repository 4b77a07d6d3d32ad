//! Implicit-midpoint time integration of `ẏ = Gy + b·u(t)` with optional
//! collocated feedback `u = −k·cᵀy`.
//!
//! The shifted matrix `I − dt/2·G` is LU-factored once per `(G, dt)`. The
//! rank-one feedback term is folded in with a Sherman–Morrison correction, so
//! the closed-loop scheme is still exactly the midpoint rule for
//! `G − k·b·cᵀ`. With `c = Mb` and `MG` skew this gives the discrete
//! dissipation identity `E⁺ − E = −k·dt·(cᵀy_mid)²`.

use std::path::Path;

use nalgebra::{DMatrix, DVector, LU};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::generator::GeneratorAssembly;
use crate::operators::EnergyBreakdown;
use crate::scalar::Real;
use crate::state::{Field, StateVector};

/// Scalar input signal `u(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSignal<T> {
    Zero,
    Constant(T),
    Sinusoid { amplitude: T, frequency: T, phase: T },
    /// Piecewise-linear interpolation of samples, held constant outside.
    Tabulated { times: Vec<T>, values: Vec<T> },
}

impl<T: Real> InputSignal<T> {
    pub fn value(&self, t: T) -> T {
        match self {
            InputSignal::Zero => T::zero(),
            InputSignal::Constant(c) => *c,
            InputSignal::Sinusoid { amplitude, frequency, phase } => {
                *amplitude * (T::two_pi() * *frequency * t + *phase).sin()
            }
            InputSignal::Tabulated { times, values } => interpolate(times, values, t),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            InputSignal::Zero => true,
            InputSignal::Constant(c) => *c == T::zero(),
            InputSignal::Sinusoid { amplitude, .. } => *amplitude == T::zero(),
            InputSignal::Tabulated { values, .. } => values.iter().all(|v| *v == T::zero()),
        }
    }
}

fn interpolate<T: Real>(times: &[T], values: &[T], t: T) -> T {
    if times.is_empty() {
        return T::zero();
    }
    if t <= times[0] {
        return values[0];
    }
    let last = times.len() - 1;
    if t >= times[last] {
        return values[last];
    }
    let k = times.partition_point(|&s| s <= t);
    let (t0, t1) = (times[k - 1], times[k]);
    let w = (t - t0) / (t1 - t0);
    values[k - 1] + (values[k] - values[k - 1]) * w
}

/// Implicit midpoint stepper for one `(G, dt)` pair, optionally with an input
/// direction `b` and collocated feedback through the covector `c`.
#[derive(Debug, Clone)]
pub struct MidpointStepper<T: Real> {
    dt: T,
    generator: DMatrix<T>,
    lu: LU<T, nalgebra::Dyn, nalgebra::Dyn>,
    input: Option<DVector<T>>,
    feedback: Option<Feedback<T>>,
}

#[derive(Debug, Clone)]
struct Feedback<T: Real> {
    gain: T,
    covector: DVector<T>,
    // A⁻¹ b and 1 + (k dt/2) cᵀ A⁻¹ b
    solved_input: DVector<T>,
    denominator: T,
}

impl<T: Real> MidpointStepper<T> {
    pub fn new(generator: &DMatrix<T>, dt: T) -> Result<Self> {
        if !(dt > T::zero()) {
            return Err(Error::InvalidConfig("time step must be positive".into()));
        }
        let n = generator.nrows();
        let shifted = DMatrix::identity(n, n) - generator * (dt * T::lit(0.5));
        let lu = shifted.lu();
        if !lu.is_invertible() {
            return Err(Error::LinearSolveFailure);
        }
        Ok(Self { dt, generator: generator.clone(), lu, input: None, feedback: None })
    }

    pub fn with_input(mut self, b: DVector<T>) -> Self {
        self.input = Some(b);
        self.feedback = None;
        self
    }

    /// Enables `u = −gain·cᵀy` evaluated at the midpoint. Requires an input
    /// direction.
    pub fn with_feedback(mut self, gain: T, covector: DVector<T>) -> Result<Self> {
        let b = self.input.as_ref().ok_or_else(|| Error::InvalidConfig("feedback needs an input direction".into()))?;
        let solved_input = self.lu.solve(b).ok_or(Error::LinearSolveFailure)?;
        let sigma = gain * self.dt * T::lit(0.5);
        let denominator = T::one() + sigma * covector.dot(&solved_input);
        if !(denominator.abs() > T::zero()) {
            return Err(Error::LinearSolveFailure);
        }
        self.feedback = Some(Feedback { gain, covector, solved_input, denominator });
        Ok(self)
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// `‖y⁺ − y − dt·(G·y_mid + b·u_mid)‖ / max(‖y‖, ‖y⁺‖)`, where `u_mid` is
    /// the total input returned by [`Self::step`].
    pub fn defect(&self, y: &DVector<T>, next: &DVector<T>, u_mid: T) -> T {
        let mid = (y + next) * T::lit(0.5);
        let mut r = next - y - &self.generator * mid * self.dt;
        if let Some(b) = &self.input {
            r.axpy(-self.dt * u_mid, b, T::one());
        }
        let scale = y.norm().max(next.norm());
        if scale > T::zero() {
            r.norm() / scale
        } else {
            r.norm()
        }
    }

    /// One step. `u_ext` is the open-loop input at the half step. Returns the
    /// new state and the total input applied at the midpoint.
    ///
    /// Solved in increment form `(I − dt/2·G_k)δ = dt·(G_k y + b u_ext)`,
    /// `y⁺ = y + δ`, which keeps the solve's rounding error proportional to
    /// the increment rather than to the state.
    pub fn step(&self, y: &DVector<T>, u_ext: T) -> Result<(DVector<T>, T)> {
        let mut rhs = &self.generator * y * self.dt;
        if let Some(b) = &self.input {
            if u_ext != T::zero() {
                rhs.axpy(self.dt * u_ext, b, T::one());
            }
        }
        match &self.feedback {
            None => {
                let delta = self.lu.solve(&rhs).ok_or(Error::LinearSolveFailure)?;
                Ok((y + delta, u_ext))
            }
            Some(fb) => {
                let b = self.input.as_ref().expect("feedback implies input");
                let sigma = fb.gain * self.dt * T::lit(0.5);
                let cy = fb.covector.dot(y);
                rhs.axpy(-fb.gain * self.dt * cy, b, T::one());
                let mut delta = self.lu.solve(&rhs).ok_or(Error::LinearSolveFailure)?;
                let coeff = sigma * fb.covector.dot(&delta) / fb.denominator;
                delta.axpy(-coeff, &fb.solved_input, T::one());
                let u = u_ext - fb.gain * (cy + fb.covector.dot(&delta) * T::lit(0.5));
                Ok((y + delta, u))
            }
        }
    }
}

/// One open-loop step of the current-actuated system with input `u_mid` along
/// the gauge-consistent control direction.
pub fn step_midpoint<T: Real>(
    y: &StateVector<T>,
    u_mid: T,
    dt: T,
    assembly: &GeneratorAssembly<T>,
) -> Result<StateVector<T>> {
    let stepper = MidpointStepper::new(assembly.generator(), dt)?.with_input(assembly.control_constrained().clone());
    let (next, _) = stepper.step(y.as_vector(), u_mid)?;
    StateVector::from_vector(y.n_cells(), next)
}

/// Recorded trajectory.
#[derive(Debug, Clone, Default)]
pub struct TimeSeries<T> {
    pub times: Vec<T>,
    /// Full state at each record.
    pub states: Vec<DVector<T>>,
    pub energies: Vec<EnergyBreakdown<T>>,
    pub gauge_residuals: Vec<(T, T)>,
    /// Input at each record time (open-loop value or feedback law).
    pub record_inputs: Vec<T>,
    /// Midpoint input applied in every step.
    pub input_values: Vec<T>,
}

impl<T: Real> TimeSeries<T> {
    pub fn totals(&self) -> Vec<T> {
        self.energies.iter().map(|e| e.total).collect()
    }

    /// `max |E(t) − E(0)| / E(0)`.
    pub fn max_relative_drift(&self) -> T {
        let Some(first) = self.energies.first() else { return T::zero() };
        let e0 = first.total;
        let worst = self.energies.iter().fold(T::zero(), |acc, e| acc.max((e.total - e0).abs()));
        if e0 > T::zero() {
            worst / e0
        } else {
            worst
        }
    }

    pub fn max_gauge_residual(&self) -> T {
        self.gauge_residuals.iter().fold(T::zero(), |acc, &(a, b)| acc.max(a).max(b))
    }

    /// Writes the energy/gauge/input table.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "time",
            "E_total",
            "E_kin_v",
            "E_kin_theta",
            "E_kin_eta",
            "E_elastic",
            "E_nonlocal",
            "E_magnetic",
            "gauge_pos",
            "gauge_vel",
            "input",
        ])?;
        for k in 0..self.times.len() {
            let e = &self.energies[k];
            let (gp, gv) = self.gauge_residuals[k];
            let row = [
                self.times[k],
                e.total,
                e.kinetic_v,
                e.kinetic_theta,
                e.kinetic_eta,
                e.elastic,
                e.nonlocal,
                e.magnetic,
                gp,
                gv,
                self.record_inputs[k],
            ];
            w.write_record(row.iter().map(|v| format!("{:.17e}", v.as_f64())))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes each recorded state as `state_XXXXXX.csv` (`field,index,value`).
    pub fn write_state_snapshots(&self, dir: &Path, n_cells: usize) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut paths = Vec::with_capacity(self.states.len());
        for (k, s) in self.states.iter().enumerate() {
            let path = dir.join(format!("state_{k:06}.csv"));
            let state = StateVector::from_vector(n_cells, s.clone())?;
            write_state_csv(&path, &state)?;
            paths.push(path);
        }
        Ok(paths)
    }
}

pub fn write_state_csv<T: Real>(path: &Path, state: &StateVector<T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["field", "index", "value"])?;
    for f in Field::ALL {
        for (i, v) in state.field(f).iter().enumerate() {
            w.write_record([f.name().to_string(), i.to_string(), format!("{:.17e}", v.as_f64())])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Time-stepping plan for [`run`].
#[derive(Debug, Clone)]
pub struct RunPlan<T> {
    pub dt: T,
    pub steps: usize,
    pub stride: usize,
    pub input: InputSignal<T>,
    /// Closed loop when positive; overrides `input`.
    pub gain: T,
    pub gauge_tol: T,
    /// Bound on the relative defect of the midpoint equation, checked at
    /// every record.
    pub solver_tol: T,
    pub keep_states: bool,
}

impl<T: Real> RunPlan<T> {
    pub fn open_loop(dt: T, steps: usize) -> Self {
        Self {
            dt,
            steps,
            stride: 1,
            input: InputSignal::Zero,
            gain: T::zero(),
            gauge_tol: T::lit(1e-10),
            solver_tol: T::lit(1e-12),
            keep_states: false,
        }
    }
}

/// Default step `dx/(10·sqrt(α/ρ))`.
pub fn default_dt<T: Real>(assembly: &GeneratorAssembly<T>) -> T {
    assembly.grid().dx() / (T::lit(10.0) * assembly.params().wave_speed())
}

/// Integrates the magnetic model (either actuation) from `y0`.
pub fn run<T: Real>(assembly: &GeneratorAssembly<T>, y0: &StateVector<T>, plan: &RunPlan<T>) -> Result<TimeSeries<T>> {
    let closed = plan.gain > T::zero();
    let b = assembly.control_constrained().clone();
    let mut stepper = MidpointStepper::new(assembly.generator(), plan.dt)?.with_input(b);
    let observation = assembly.observation();
    if closed {
        stepper = stepper.with_feedback(plan.gain, observation.clone())?;
    }
    let input = if closed { InputSignal::Zero } else { plan.input.clone() };
    let stride = plan.stride.max(1);
    let drift_limit = plan.gauge_tol * T::lit(100.0);
    let n = y0.n_cells();
    let ops = assembly.operators();
    let params = assembly.params();

    let mut series = TimeSeries::default();
    let record = |series: &mut TimeSeries<T>, step: usize, y: &DVector<T>| -> Result<()> {
        let t = T::from_count(step) * plan.dt;
        let state = StateVector::from_vector(n, y.clone())?;
        let gauge = assembly.gauge_residual(&state);
        let worst = gauge.0.max(gauge.1);
        if worst > drift_limit {
            return Err(Error::GaugeDrift { step, residual: worst.as_f64(), limit: drift_limit.as_f64() });
        }
        series.times.push(t);
        series.energies.push(ops.energy_unchecked(&state, params));
        series.gauge_residuals.push(gauge);
        let u = if closed { -plan.gain * observation.dot(y) } else { input.value(t) };
        series.record_inputs.push(u);
        if plan.keep_states {
            series.states.push(y.clone());
        }
        Ok(())
    };

    let mut y = y0.as_vector().clone();
    record(&mut series, 0, &y)?;
    let half = T::lit(0.5);
    for step in 1..=plan.steps {
        let t_mid = (T::from_count(step - 1) + half) * plan.dt;
        let (next, u) = stepper.step(&y, input.value(t_mid))?;
        let prev = std::mem::replace(&mut y, next);
        series.input_values.push(u);
        if step % stride == 0 {
            let defect = stepper.defect(&prev, &y, u);
            if !(defect <= plan.solver_tol) {
                return Err(Error::SolverDefect { step, defect: defect.as_f64(), tolerance: plan.solver_tol.as_f64() });
            }
            record(&mut series, step, &y)?;
        }
    }
    Ok(series)
}

/// Outcome of [`admissibility_estimate`].
#[derive(Debug, Clone)]
pub struct AdmissibilityEstimate<T> {
    /// Largest observed ratio `‖y(T)‖²/(‖y0‖² + ‖u‖²_{L²(0,T)})`.
    pub constant: T,
    pub ratios: Vec<T>,
    pub skipped: usize,
}

/// Which parts of a random trial are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialKind {
    InitialOnly,
    InputOnly,
    Both,
}

/// Number of Fourier modes in random initial data and inputs. Kept fixed so
/// that trials with the same seed describe the same continuum data on every
/// grid.
const TRIAL_MODES: usize = 4;

/// Smooth random state on the gauge manifold, built from the first few
/// Fourier modes of every independent field.
pub fn random_smooth_state<T: Real>(assembly: &GeneratorAssembly<T>, rng: &mut impl Rng) -> StateVector<T> {
    let grid = assembly.grid();
    let l = grid.length();
    let pi = T::pi();
    let mut coeffs = || -> Vec<T> { (0..TRIAL_MODES).map(|_| T::lit(rng.random_range(-1.0..1.0))).collect() };
    let (c1, c2, c4, c5) = (coeffs(), coeffs(), coeffs(), coeffs());
    let cosines = |c: &[T], x: T| c.iter().enumerate().fold(T::zero(), |a, (k, &ck)| a + ck * (T::from_count(k) * pi * x / l).cos());
    let sines = |c: &[T], x: T| c.iter().enumerate().fold(T::zero(), |a, (k, &ck)| a + ck * (T::from_count(k + 1) * pi * x / l).sin());
    let strain = grid.sample_cells(|x| cosines(&c1, x));
    let theta = grid.sample_interior(|x| sines(&c2, x));
    let velocity = grid.sample_nodes(|x| cosines(&c4, x));
    let rate = grid.sample_interior(|x| sines(&c5, x));
    StateVector::constrained(grid.n_cells(), assembly.params().xi(), grid.dx(), &strain, &theta, &velocity, &rate)
        .expect("field lengths follow the grid")
}

fn random_input<T: Real>(horizon: T, rng: &mut impl Rng) -> InputSignal<T> {
    let times: Vec<T> = (0..=32).map(|k| horizon * T::from_count(k) / T::lit(32.0)).collect();
    let c: Vec<T> = (0..TRIAL_MODES).map(|_| T::lit(rng.random_range(-1.0..1.0))).collect();
    let values = times
        .iter()
        .map(|&t| {
            c.iter()
                .enumerate()
                .fold(T::zero(), |a, (k, &ck)| a + ck * (T::from_count(k) * T::pi() * t / horizon).cos())
        })
        .collect();
    InputSignal::Tabulated { times, values }
}

/// Monte-Carlo estimate of the admissibility constant `c(T)`.
///
/// Trials cycle through initial-only, input-only and combined data drawn from
/// a seeded generator (one stream per trial, independent of the grid).
pub fn admissibility_estimate<T: Real>(
    trials: usize,
    horizon: T,
    assembly: &GeneratorAssembly<T>,
    seed: u64,
) -> Result<AdmissibilityEstimate<T>> {
    if trials < 10 {
        return Err(Error::InvalidConfig("admissibility estimate needs at least 10 trials".into()));
    }
    let dt0 = default_dt(assembly);
    let steps = (horizon / dt0).ceil().to_usize().unwrap_or(1).max(1);
    let dt = horizon / T::from_count(steps);
    let b = assembly.control_constrained().clone();
    let stepper = MidpointStepper::new(assembly.generator(), dt)?.with_input(b);
    let half = T::lit(0.5);

    let mut ratios = Vec::with_capacity(trials);
    let mut skipped = 0;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial as u64));
        let kind = match trial % 3 {
            0 => TrialKind::InitialOnly,
            1 => TrialKind::InputOnly,
            _ => TrialKind::Both,
        };
        let y0 = random_smooth_state(assembly, &mut rng);
        let signal = random_input(horizon, &mut rng);
        let (y0, signal) = match kind {
            TrialKind::InitialOnly => (y0, InputSignal::Zero),
            TrialKind::InputOnly => (StateVector::zeros(y0.n_cells()), signal),
            TrialKind::Both => (y0, signal),
        };
        let (ratio, skip) = trial_ratio(assembly, &stepper, &y0, &signal, steps, dt, half)?;
        if skip {
            skipped += 1;
        } else {
            ratios.push(ratio);
        }
    }
    let constant = ratios.iter().fold(T::zero(), |a, &r| a.max(r));
    Ok(AdmissibilityEstimate { constant, ratios, skipped })
}

/// Ratio for a single trial; `skip` is set for the degenerate `y0 = 0, u = 0` case.
pub fn trial_ratio<T: Real>(
    assembly: &GeneratorAssembly<T>,
    stepper: &MidpointStepper<T>,
    y0: &StateVector<T>,
    signal: &InputSignal<T>,
    steps: usize,
    dt: T,
    half: T,
) -> Result<(T, bool)> {
    let mut y = y0.as_vector().clone();
    let mut input_sq = T::zero();
    for step in 0..steps {
        let u = signal.value((T::from_count(step) + half) * dt);
        input_sq += u * u * dt;
        y = stepper.step(&y, u)?.0;
    }
    let initial = assembly.energy_norm_sq(y0.as_vector());
    let denom = initial + input_sq;
    if !(denom > T::zero()) {
        return Ok((T::zero(), true));
    }
    Ok((assembly.energy_norm_sq(&y) / denom, false))
}
