//! Discrete differential operators, the Helmholtz inverse `P_xi`, the energy
//! Gram matrix and the energy functional.
//!
//! `P_xi = (I − xi·Δ_N)^{-1}` where `Δ_N` is the cell-centred Neumann
//! Laplacian. It is applied through a prefactorized tridiagonal solve; the
//! dense matrix is only materialized for assembly of the generator.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::StaggeredGrid;
use crate::params::BeamParameters;
use crate::scalar::Real;
use crate::state::{relative_gauge_residual, Field, Layout, StateVector};
use crate::stencil;

/// LU factors of the symmetric tridiagonal Neumann-Helmholtz matrix
/// `I − xi·Δ_N`, Thomas algorithm.
#[derive(Debug, Clone)]
pub struct HelmholtzFactor<T> {
    off: T,
    upper: Vec<T>,
    pivots: Vec<T>,
}

impl<T: Real> HelmholtzFactor<T> {
    pub fn new(n: usize, xi: T, dx: T) -> Result<Self> {
        let k = xi / (dx * dx);
        let off = -k;
        let diag = |i: usize| {
            if i == 0 || i == n - 1 {
                T::one() + k
            } else {
                T::one() + k + k
            }
        };
        let mut upper = Vec::with_capacity(n);
        let mut pivots = Vec::with_capacity(n);
        let mut prev = T::zero();
        for i in 0..n {
            let m = diag(i) - if i > 0 { off * prev } else { T::zero() };
            if !(m.abs() > T::zero()) || !m.is_finite() {
                return Err(Error::SolverFailure("Helmholtz pivot vanished"));
            }
            pivots.push(m);
            prev = off / m;
            upper.push(prev);
        }
        Ok(Self { off, upper, pivots })
    }

    pub fn solve_in_place(&self, rhs: &mut [T]) {
        let n = self.pivots.len();
        assert_eq!(rhs.len(), n, "Helmholtz solve: length mismatch");
        rhs[0] /= self.pivots[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.off * rhs[i - 1]) / self.pivots[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.upper[i] * rhs[i + 1];
        }
    }
}

/// Which source the elliptic potential equation carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialSource {
    CurrentActuation,
    ChargeActuation,
}

/// Through-thickness potential moment `φ¹` on cells. The additive constant of
/// the charge-actuated solution is fixed to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField<T> {
    pub phi1: Vec<T>,
    pub source: PotentialSource,
}

/// Energy split by physical origin (J per unit width). `total` is the sum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown<T> {
    pub kinetic_v: T,
    pub kinetic_theta: T,
    pub kinetic_eta: T,
    pub elastic: T,
    pub nonlocal: T,
    pub magnetic: T,
    pub total: T,
}

impl<T: Real> EnergyBreakdown<T> {
    pub fn components(&self) -> [T; 6] {
        [self.kinetic_v, self.kinetic_theta, self.kinetic_eta, self.elastic, self.nonlocal, self.magnetic]
    }
}

/// Operators for one grid and one value of `xi`.
#[derive(Debug, Clone)]
pub struct DiscreteOperators<T: Real> {
    grid: StaggeredGrid<T>,
    xi: T,
    helmholtz: HelmholtzFactor<T>,
}

impl<T: Real> DiscreteOperators<T> {
    pub fn new(grid: &StaggeredGrid<T>, xi: T) -> Result<Self> {
        let helmholtz = HelmholtzFactor::new(grid.n_cells(), xi, grid.dx())?;
        Ok(Self { grid: grid.clone(), xi, helmholtz })
    }

    pub fn for_params(params: &BeamParameters<T>, grid: &StaggeredGrid<T>) -> Result<Self> {
        Self::new(grid, params.xi())
    }

    pub fn grid(&self) -> &StaggeredGrid<T> {
        &self.grid
    }

    pub fn xi(&self) -> T {
        self.xi
    }

    fn n(&self) -> usize {
        self.grid.n_cells()
    }

    /// `w` solving `w − xi·Δ_N w = z`.
    pub fn apply_p_xi(&self, z: &[T]) -> Vec<T> {
        let mut w = z.to_vec();
        self.helmholtz.solve_in_place(&mut w);
        w
    }

    /// Forward Helmholtz operator `w − xi·Δ_N w`.
    pub fn helmholtz(&self, w: &[T]) -> Vec<T> {
        let lap = stencil::lap_neumann(w, self.grid.dx());
        w.iter().zip(lap).map(|(&a, l)| a - self.xi * l).collect()
    }

    pub fn laplacian(&self, c: &[T]) -> Vec<T> {
        stencil::lap_neumann(c, self.grid.dx())
    }

    /// Interior nodes → cells (`N × (N−1)`).
    pub fn grad_interior_matrix(&self) -> DMatrix<T> {
        let n = self.n();
        let inv = T::one() / self.grid.dx();
        let mut m = DMatrix::zeros(n, n - 1);
        for j in 0..n {
            if j < n - 1 {
                m[(j, j)] = inv;
            }
            if j > 0 {
                m[(j, j - 1)] = -inv;
            }
        }
        m
    }

    /// Nodes → cells (`N × (N+1)`).
    pub fn grad_nodal_matrix(&self) -> DMatrix<T> {
        let n = self.n();
        let inv = T::one() / self.grid.dx();
        let mut m = DMatrix::zeros(n, n + 1);
        for j in 0..n {
            m[(j, j)] = -inv;
            m[(j, j + 1)] = inv;
        }
        m
    }

    /// Cells → interior nodes (`(N−1) × N`), the negative transpose of
    /// [`Self::grad_interior_matrix`].
    pub fn div_interior_matrix(&self) -> DMatrix<T> {
        -self.grad_interior_matrix().transpose()
    }

    /// Cells → nodes with zero boundary flux (`(N+1) × N`).
    pub fn div_free_matrix(&self) -> DMatrix<T> {
        let mut m = -self.grad_nodal_matrix().transpose();
        let two = T::lit(2.0);
        let n = self.n();
        for c in 0..n {
            m[(0, c)] *= two;
            m[(n, c)] *= two;
        }
        m
    }

    pub fn laplacian_matrix(&self) -> DMatrix<T> {
        self.grad_interior_matrix() * self.div_interior_matrix()
    }

    /// Dense `P_xi`, assembled column by column from the tridiagonal solve and
    /// symmetrized.
    pub fn p_xi_matrix(&self) -> DMatrix<T> {
        let n = self.n();
        let mut p = DMatrix::zeros(n, n);
        let mut col = vec![T::zero(); n];
        for j in 0..n {
            col.iter_mut().for_each(|v| *v = T::zero());
            col[j] = T::one();
            self.helmholtz.solve_in_place(&mut col);
            p.set_column(j, &DVector::from_column_slice(&col));
        }
        (&p + p.transpose()) * T::lit(0.5)
    }

    /// Relative Frobenius residual of `Δ_N∘P_xi − (P_xi − I)/xi` over the
    /// unit-vector probe basis.
    pub fn p_xi_identity_check(&self) -> T {
        let n = self.n();
        let p = self.p_xi_matrix();
        let lhs = self.laplacian_matrix() * &p;
        let rhs = (&p - DMatrix::identity(n, n)) / self.xi;
        let denom = rhs.norm();
        let diff = (lhs - &rhs).norm();
        if denom > T::zero() {
            diff / denom
        } else {
            diff
        }
    }

    /// Solves `−xi·φ¹_xx + φ¹ = (gamma/eps3)·v_x + σ_s/(eps3·h)·1` with Neumann
    /// data. The constant offset only appears for charge actuation.
    pub fn solve_potential(
        &self,
        strain: &[T],
        sigma_s: T,
        source: PotentialSource,
        params: &BeamParameters<T>,
    ) -> PotentialField<T> {
        let scale = params.gamma() / params.eps3();
        let mut phi1: Vec<T> = self.apply_p_xi(strain).into_iter().map(|v| v * scale).collect();
        if source == PotentialSource::ChargeActuation {
            let offset = sigma_s / (params.eps3() * params.h());
            phi1.iter_mut().for_each(|v| *v += offset);
        }
        PotentialField { phi1, source }
    }

    /// Gram matrix of the energy inner product on the full state coordinates:
    /// `½ yᵀ M y` is the discrete energy. Positive definite only on the gauge
    /// subspace.
    pub fn assemble_mass(&self, params: &BeamParameters<T>) -> DMatrix<T> {
        let n = self.n();
        let layout = Layout::new(n);
        let dx = self.grid.dx();
        let mut m = DMatrix::zeros(layout.dim(), layout.dim());

        let r1 = layout.range(Field::Strain);
        let stiff = DMatrix::identity(n, n) * params.alpha() + self.p_xi_matrix() * params.nonlocal_stiffness();
        m.view_mut((r1.start, r1.start), (n, n)).copy_from(&(stiff * dx));

        let mu_dx = params.mu() * dx;
        let d = self.div_interior_matrix();
        let r2 = layout.range(Field::Theta);
        let r3 = layout.range(Field::Eta);
        m.view_mut((r2.start, r2.start), (n - 1, n - 1))
            .copy_from(&(DMatrix::identity(n - 1, n - 1) * mu_dx));
        let cross = &d * (-mu_dx);
        m.view_mut((r2.start, r3.start), (n - 1, n)).copy_from(&cross);
        m.view_mut((r3.start, r2.start), (n, n - 1)).copy_from(&cross.transpose());
        m.view_mut((r3.start, r3.start), (n, n)).copy_from(&(d.transpose() * &d * mu_dx));

        for (k, idx) in layout.range(Field::Velocity).enumerate() {
            m[(idx, idx)] = params.rho() * self.grid.node_weight(k);
        }
        for idx in layout.range(Field::ThetaRate) {
            m[(idx, idx)] = params.theta_inertia() * dx;
        }
        for idx in layout.range(Field::EtaRate) {
            m[(idx, idx)] = params.eps3() * dx;
        }
        m
    }

    /// Energy of `y` split by component. Fails with `GaugeViolation` if either
    /// gauge residual exceeds `gauge_tol`.
    pub fn energy(
        &self,
        y: &StateVector<T>,
        params: &BeamParameters<T>,
        gauge_tol: T,
    ) -> Result<EnergyBreakdown<T>> {
        let dx = self.grid.dx();
        for (a, b) in [(Field::Theta, Field::Eta), (Field::ThetaRate, Field::EtaRate)] {
            let r = relative_gauge_residual(y.field(a), y.field(b), self.xi, dx);
            if r > gauge_tol {
                return Err(Error::GaugeViolation { residual: r.as_f64(), tolerance: gauge_tol.as_f64() });
            }
        }
        Ok(self.energy_unchecked(y, params))
    }

    /// Energy without the gauge check.
    pub fn energy_unchecked(&self, y: &StateVector<T>, params: &BeamParameters<T>) -> EnergyBreakdown<T> {
        let dx = self.grid.dx();
        let half = T::lit(0.5);
        let sq = |v: &[T]| v.iter().fold(T::zero(), |acc, &x| acc + x * x);

        let velocity = y.field(Field::Velocity);
        let kinetic_v = half
            * params.rho()
            * velocity
                .iter()
                .enumerate()
                .fold(T::zero(), |acc, (j, &v)| acc + self.grid.node_weight(j) * v * v);
        let kinetic_theta = half * params.theta_inertia() * dx * sq(y.field(Field::ThetaRate));
        let kinetic_eta = half * params.eps3() * dx * sq(y.field(Field::EtaRate));
        let strain = y.field(Field::Strain);
        let elastic = half * params.alpha() * dx * sq(strain);
        let p = self.apply_p_xi(strain);
        let nonlocal = half
            * params.nonlocal_stiffness()
            * dx
            * p.iter().zip(strain).fold(T::zero(), |acc, (&a, &b)| acc + a * b);
        let div_eta = stencil::div_interior(y.field(Field::Eta), dx);
        let magnetic = half
            * params.mu()
            * dx
            * y.field(Field::Theta)
                .iter()
                .zip(div_eta)
                .fold(T::zero(), |acc, (&t, d)| acc + (t - d) * (t - d));
        let total = kinetic_v + kinetic_theta + kinetic_eta + elastic + nonlocal + magnetic;
        EnergyBreakdown { kinetic_v, kinetic_theta, kinetic_eta, elastic, nonlocal, magnetic, total }
    }
}
