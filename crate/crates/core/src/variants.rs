//! Comparison models: the electrostatic clamped-free bar driven by surface
//! charge at `x = L`, and the magnetic model with charge (boundary point load)
//! actuation.
//!
//! Electrostatic state: `y1 = v_x` on the `N` cells and `y2 = v̇` on nodes
//! `1..=N` (node 0 is clamped). The right end is stress free, so the
//! discrete stress flux vanishes on the last face and the point load enters
//! the last node's momentum row with weight `2/dx`.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{InputSignal, MidpointStepper, RunPlan, TimeSeries};
use crate::error::{Error, Result};
use crate::generator::{assemble_generator, skewness_tolerance, GeneratorAssembly};
use crate::grid::StaggeredGrid;
use crate::operators::{DiscreteOperators, EnergyBreakdown};
use crate::params::BeamParameters;
use crate::scalar::Real;
use crate::spectral::{real_mode, spectrum_of, SpectrumReport, SymmetrizedSystem};

#[derive(Debug, Clone)]
pub struct ElectrostaticAssembly<T: Real> {
    params: BeamParameters<T>,
    grid: StaggeredGrid<T>,
    generator: DMatrix<T>,
    mass: DMatrix<T>,
    control: DVector<T>,
    trace: DVector<T>,
    p_xi: DMatrix<T>,
    skewness: T,
}

/// Assembles the clamped-free electrostatic model and certifies skewness.
pub fn assemble_electrostatic<T: Real>(
    params: &BeamParameters<T>,
    grid: &StaggeredGrid<T>,
) -> Result<ElectrostaticAssembly<T>> {
    let ops = DiscreteOperators::for_params(params, grid)?;
    let n = grid.n_cells();
    let dx = grid.dx();
    let dim = 2 * n;
    let p = ops.p_xi_matrix();
    let stiff = DMatrix::<T>::identity(n, n) * params.alpha() + &p * params.nonlocal_stiffness();
    // drop the clamped node 0
    let gf = ops.grad_nodal_matrix().columns(1, n).into_owned();
    let div = ops.div_free_matrix().rows(1, n).into_owned();

    let mut g = DMatrix::zeros(dim, dim);
    g.view_mut((0, n), (n, n)).copy_from(&gf);
    g.view_mut((n, 0), (n, n)).copy_from(&(&div * &stiff / params.rho()));

    let mut mass = DMatrix::zeros(dim, dim);
    mass.view_mut((0, 0), (n, n)).copy_from(&(&stiff * dx));
    for j in 0..n {
        let w = if j == n - 1 { dx * T::lit(0.5) } else { dx };
        mass[(n + j, n + j)] = params.rho() * w;
    }

    let mg = &mass * &g;
    let denom = mg.norm();
    let skew = (&mg + mg.transpose()).norm();
    let skewness = if denom > T::zero() { skew / denom } else { skew };
    let tol = skewness_tolerance::<T>();
    if !(skewness <= tol) {
        return Err(Error::AssemblyInconsistent { residual: skewness.as_f64(), tolerance: tol.as_f64() });
    }

    let mut control = DVector::zeros(dim);
    control[dim - 1] = params.gamma() / (params.eps3() * params.h()) * T::lit(2.0) / dx / params.rho();
    let mut trace = DVector::zeros(dim);
    trace[dim - 1] = T::one();
    Ok(ElectrostaticAssembly {
        params: *params,
        grid: grid.clone(),
        generator: g,
        mass,
        control,
        trace,
        p_xi: p,
        skewness,
    })
}

impl<T: Real> ElectrostaticAssembly<T> {
    pub fn params(&self) -> &BeamParameters<T> {
        &self.params
    }

    pub fn grid(&self) -> &StaggeredGrid<T> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.generator.nrows()
    }

    pub fn generator(&self) -> &DMatrix<T> {
        &self.generator
    }

    pub fn mass(&self) -> &DMatrix<T> {
        &self.mass
    }

    /// Influence of `σ_s` on the state.
    pub fn control(&self) -> &DVector<T> {
        &self.control
    }

    /// Functional `y ↦ v̇(L)`.
    pub fn trace(&self) -> &DVector<T> {
        &self.trace
    }

    pub fn skewness(&self) -> T {
        self.skewness
    }

    pub fn energy(&self, y: &DVector<T>) -> EnergyBreakdown<T> {
        let n = self.grid.n_cells();
        let dx = self.grid.dx();
        let half = T::lit(0.5);
        let strain = y.rows(0, n);
        let rate = y.rows(n, n);
        let elastic = half * self.params.alpha() * dx * strain.dot(&strain);
        let nonlocal = half * self.params.nonlocal_stiffness() * dx * strain.dot(&(&self.p_xi * strain));
        let kinetic_v = (0..n).fold(T::zero(), |a, j| a + self.mass[(n + j, n + j)] * rate[j] * rate[j]) * half;
        EnergyBreakdown {
            kinetic_v,
            elastic,
            nonlocal,
            total: kinetic_v + elastic + nonlocal,
            ..EnergyBreakdown::default()
        }
    }

    pub fn symmetrized(&self) -> Result<SymmetrizedSystem<T>> {
        let covector = &self.mass * &self.control;
        SymmetrizedSystem::from_parts(&self.mass, &self.generator, &covector, vec![true; self.dim()])
    }

    pub fn spectrum(&self, eig_tol: T) -> Result<SpectrumReport<T>> {
        spectrum_of(&self.symmetrized()?, eig_tol)
    }

    /// Real part of the `k`-th oscillating mode, unit energy norm.
    pub fn mode(&self, k: usize) -> Result<DVector<T>> {
        Ok(real_mode(&self.symmetrized()?, k)?.1)
    }
}

/// Closed loop `σ_s = −k·v̇(L)` integrated with the implicit midpoint rule.
/// The feedback dissipates `k·γ/(ε3 h)·v̇(L)²`, so it requires `γ ≥ 0`.
pub fn boundary_feedback_simulate<T: Real>(
    assembly: &ElectrostaticAssembly<T>,
    gain: T,
    y0: &DVector<T>,
    t_final: T,
    dt: T,
    stride: usize,
) -> Result<TimeSeries<T>> {
    if !(dt > T::zero()) || t_final < dt {
        return Err(Error::InvalidConfig("need dt > 0 and t_final >= dt".into()));
    }
    let steps = (t_final / dt).round().to_usize().unwrap_or(0).max(1);
    let mut plan = RunPlan::open_loop(dt, steps);
    plan.gain = gain;
    plan.stride = stride;
    simulate_electrostatic(assembly, y0, &plan)
}

/// Electrostatic run with either an open-loop charge input or, when
/// `plan.gain > 0`, the boundary feedback `σ_s = −k·v̇(L)`.
pub fn simulate_electrostatic<T: Real>(
    assembly: &ElectrostaticAssembly<T>,
    y0: &DVector<T>,
    plan: &RunPlan<T>,
) -> Result<TimeSeries<T>> {
    if y0.len() != assembly.dim() {
        return Err(Error::DimensionMismatch { field: "electrostatic state", expected: assembly.dim(), found: y0.len() });
    }
    let gain = plan.gain;
    if gain < T::zero() {
        return Err(Error::InvalidConfig("feedback gain must be non-negative".into()));
    }
    if gain > T::zero() && assembly.params.gamma() < T::zero() {
        return Err(Error::InvalidConfig("boundary feedback sign requires gamma >= 0".into()));
    }
    let closed = gain > T::zero();
    let mut stepper = MidpointStepper::new(&assembly.generator, plan.dt)?.with_input(assembly.control.clone());
    if closed {
        stepper = stepper.with_feedback(gain, assembly.trace.clone())?;
    }
    let input = if closed { InputSignal::Zero } else { plan.input.clone() };
    let stride = plan.stride.max(1);
    let mut series = TimeSeries::default();
    let push = |series: &mut TimeSeries<T>, step: usize, y: &DVector<T>| {
        let t = T::from_count(step) * plan.dt;
        series.times.push(t);
        series.energies.push(assembly.energy(y));
        series.gauge_residuals.push((T::zero(), T::zero()));
        let u = if closed { -gain * assembly.trace.dot(y) } else { input.value(t) };
        series.record_inputs.push(u);
        if plan.keep_states {
            series.states.push(y.clone());
        }
    };
    let mut y = y0.clone();
    push(&mut series, 0, &y);
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
            push(&mut series, step, &y);
        }
    }
    Ok(series)
}

/// Default step `dx/(10·sqrt(α/ρ))`, as for the magnetic model.
pub fn electrostatic_default_dt<T: Real>(assembly: &ElectrostaticAssembly<T>) -> T {
    assembly.grid.dx() / (T::lit(10.0) * assembly.params.wave_speed())
}

/// Magnetic model with the charge-driven boundary loads as input.
pub fn assemble_charge_magnetic<T: Real>(
    params: &BeamParameters<T>,
    grid: &StaggeredGrid<T>,
) -> Result<GeneratorAssembly<T>> {
    Ok(assemble_generator(params, grid)?.with_charge_control())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::DominantBlock;

    fn es(gamma: f64, n: usize) -> ElectrostaticAssembly<f64> {
        let p = BeamParameters::toy().with_gamma(gamma);
        assemble_electrostatic(&p, &StaggeredGrid::new(1.0, n).unwrap()).unwrap()
    }

    #[test]
    fn clamped_free_frequencies_at_gamma_zero() {
        let r = es(0.0, 64).spectrum(1e-8).unwrap();
        assert_eq!(r.kernel_dimension, 0);
        let freqs: Vec<f64> = r.modes.iter().filter(|m| m.lambda.im > 0.0).map(|m| m.lambda.im).collect();
        for (k, w) in freqs.iter().take(3).enumerate() {
            let exact = (k as f64 + 0.5) * std::f64::consts::PI;
            assert!((w - exact).abs() < 1e-2 * exact, "{w} vs {exact}");
        }
        assert!(r.modes.iter().all(|m| m.dominant_block == DominantBlock::Mechanical));
    }

    #[test]
    fn nonlocal_term_stiffens() {
        let w0 = es(0.0, 32).spectrum(1e-8).unwrap().modes.iter().find(|m| m.lambda.im > 0.0).unwrap().lambda.im;
        let w1 = es(1.0, 32).spectrum(1e-8).unwrap().modes.iter().find(|m| m.lambda.im > 0.0).unwrap().lambda.im;
        assert!(w1 > w0);
    }

    #[test]
    fn mass_is_positive_definite() {
        assert!(es(1.0, 16).mass().clone().cholesky().is_some());
    }

    #[test]
    fn zero_state_stays_zero() {
        let a = es(1.0, 16);
        let s = boundary_feedback_simulate(&a, 1.0, &DVector::zeros(32), 1.0, 0.01, 10).unwrap();
        assert!(s.totals().iter().all(|&e| e == 0.0));
    }

    #[test]
    fn feedback_never_increases_energy() {
        let a = es(1.0, 32);
        let y0 = a.mode(0).unwrap();
        let s = boundary_feedback_simulate(&a, 1.0, &y0, 2.0, 0.005, 1).unwrap();
        let e = s.totals();
        assert!(e.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        assert!(*e.last().unwrap() < 0.5 * e[0]);
        assert!(*e.last().unwrap() > 0.0);
    }

    #[test]
    fn zero_gain_conserves() {
        let a = es(1.0, 16);
        let y0 = a.mode(1).unwrap();
        let s = boundary_feedback_simulate(&a, 0.0, &y0, 1.0, 0.01, 1).unwrap();
        let e = s.totals();
        assert!(e.iter().all(|x| (x - e[0]).abs() < 1e-12 * e[0]));
    }

    #[test]
    fn negative_gamma_feedback_is_rejected() {
        let a = es(-1.0, 16);
        assert!(boundary_feedback_simulate(&a, 1.0, &DVector::zeros(32), 1.0, 0.01, 1).is_err());
    }

    #[test]
    fn charge_control_has_two_entries() {
        let p = BeamParameters::toy();
        let a = assemble_charge_magnetic(&p, &StaggeredGrid::new(1.0, 16).unwrap()).unwrap();
        assert_eq!(a.control().iter().filter(|v| **v != 0.0).count(), 2);
        assert!(a.is_distributional());
    }
}
