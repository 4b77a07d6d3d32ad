//! Dense generator `G`, energy Gram matrix `M` and control influence of the
//! current-actuated stretching system.
//!
//! The rows of `G` (state order y1..y6) are
//!
//! ```text
//! ẏ1 = grad y4
//! ẏ2 = y5
//! ẏ3 = y6
//! ρ ẏ4 = div s,   s = (α + γ²/ε3·P)y1 + γ(I − P)y6 + γξ·P grad y5   (s = 0 on both end faces)
//! c ẏ5 = −μ y2 + μ div y3 − γξ·div P grad y4                          (c = ε1h²/12)
//! ε3 ẏ6 = μ lap y3 − μ grad y2 + γ(I − P) grad y4
//! ```
//!
//! On the gauge subspace `y6 = ξ grad y5` the stress reduces to
//! `(α + γ²/ε3·P)y1 + γ y6`. Writing it with the split `γ y6 = γ(I − P)y6 +
//! γ P(ξ grad y5)` makes `MG` exactly skew on the whole coordinate space, not
//! just on the constrained subspace.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::StaggeredGrid;
use crate::operators::DiscreteOperators;
use crate::params::BeamParameters;
use crate::scalar::Real;
use crate::state::{relative_gauge_residual, Field, Layout, StateVector};

/// How the electrodes drive the magnetic model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlKind {
    /// Bounded, rank-one current input on the θ equation.
    Current,
    /// Surface charge entering as boundary point loads on the momentum rows.
    /// The influence vector is grid dependent (unbounded in the limit).
    ChargeBoundary,
}

#[derive(Debug, Clone)]
pub struct GeneratorAssembly<T: Real> {
    params: BeamParameters<T>,
    ops: DiscreteOperators<T>,
    layout: Layout,
    generator: DMatrix<T>,
    mass: DMatrix<T>,
    control: DVector<T>,
    control_constrained: DVector<T>,
    embedding: DMatrix<T>,
    kind: ControlKind,
    skewness: T,
}

/// Tolerance for the skewness certificate, floored at a few hundred ulps for
/// single precision.
pub fn skewness_tolerance<T: Real>() -> T {
    T::lit(1e-12).max(T::eps() * T::lit(100.0))
}

/// Current-actuated influence vector: `12/(ε1 h³)` on every θ̇ coordinate.
pub fn assemble_control<T: Real>(params: &BeamParameters<T>, grid: &StaggeredGrid<T>) -> DVector<T> {
    let layout = Layout::new(grid.n_cells());
    let mut b = DVector::zeros(layout.dim());
    let h = params.h();
    let value = T::lit(12.0) / (params.eps1() * h * h * h);
    for i in layout.range(Field::ThetaRate) {
        b[i] = value;
    }
    b
}

/// Charge-actuated influence vector: the forcing `γσ/(ε3 h)(δ(x) − δ(x−L))`
/// as boundary loads with trapezoid half-weights, divided by `ρ`.
pub fn assemble_charge_control<T: Real>(params: &BeamParameters<T>, grid: &StaggeredGrid<T>) -> DVector<T> {
    let layout = Layout::new(grid.n_cells());
    let mut b = DVector::zeros(layout.dim());
    let load = params.gamma() / (params.eps3() * params.h()) * T::lit(2.0) / grid.dx() / params.rho();
    let r = layout.range(Field::Velocity);
    b[r.start] = load;
    b[r.end - 1] = -load;
    b
}

impl<T: Real> GeneratorAssembly<T> {
    pub fn params(&self) -> &BeamParameters<T> {
        &self.params
    }
    pub fn operators(&self) -> &DiscreteOperators<T> {
        &self.ops
    }
    pub fn grid(&self) -> &StaggeredGrid<T> {
        self.ops.grid()
    }
    pub fn layout(&self) -> Layout {
        self.layout
    }
    pub fn generator(&self) -> &DMatrix<T> {
        &self.generator
    }
    pub fn mass(&self) -> &DMatrix<T> {
        &self.mass
    }
    /// Influence vector as specified by the actuation (may leave the gauge
    /// subspace for current actuation).
    pub fn control(&self) -> &DVector<T> {
        &self.control
    }
    /// M-orthogonal projection of [`Self::control`] onto the gauge subspace.
    /// It defines the same adjoint `B*` on constrained states and keeps
    /// forced trajectories on the constraint manifold.
    pub fn control_constrained(&self) -> &DVector<T> {
        &self.control_constrained
    }
    /// Full coordinates ← reduced coordinates `(y1, y2, y4, y5)`.
    pub fn embedding(&self) -> &DMatrix<T> {
        &self.embedding
    }
    pub fn kind(&self) -> ControlKind {
        self.kind
    }
    pub fn is_distributional(&self) -> bool {
        self.kind == ControlKind::ChargeBoundary
    }
    /// `‖MG + GᵀM‖_F / ‖MG‖_F` measured at assembly time.
    pub fn skewness(&self) -> T {
        self.skewness
    }

    /// Covector `Mb` so that `B*z = (Mb)ᵀ z`.
    pub fn observation(&self) -> DVector<T> {
        &self.mass * &self.control
    }

    pub fn reduced_mass(&self) -> DMatrix<T> {
        self.embedding.transpose() * &self.mass * &self.embedding
    }

    /// Generator in reduced coordinates. Valid because `G` maps the gauge
    /// subspace into itself.
    pub fn reduced_generator(&self) -> DMatrix<T> {
        let gt = &self.generator * &self.embedding;
        select_reduced(&self.layout, &gt)
    }

    /// Reduced coordinates of a constrained full vector.
    pub fn reduce(&self, full: &DVector<T>) -> DVector<T> {
        select_reduced(&self.layout, &DMatrix::from_column_slice(full.len(), 1, full.as_slice())).column(0).into_owned()
    }

    pub fn lift(&self, reduced: &DVector<T>) -> DVector<T> {
        &self.embedding * reduced
    }

    /// Constraint matrix `C` with `C y = (y3 − ξ grad y2, y6 − ξ grad y5)`.
    pub fn constraint_matrix(&self) -> DMatrix<T> {
        let n = self.layout.n_cells();
        let xi = self.params.xi();
        let gi = self.ops.grad_interior_matrix() * xi;
        let mut c = DMatrix::zeros(2 * n, self.layout.dim());
        for (row0, (src, dst)) in [(0, (Field::Theta, Field::Eta)), (n, (Field::ThetaRate, Field::EtaRate))] {
            let rs = self.layout.range(src);
            let rd = self.layout.range(dst);
            c.view_mut((row0, rs.start), (n, n - 1)).copy_from(&(-&gi));
            for k in 0..n {
                c[(row0 + k, rd.start + k)] = T::one();
            }
        }
        c
    }

    /// Relative gauge residuals `(r_pos, r_vel)`.
    pub fn gauge_residual(&self, y: &StateVector<T>) -> (T, T) {
        let xi = self.params.xi();
        let dx = self.grid().dx();
        (
            relative_gauge_residual(y.field(Field::Theta), y.field(Field::Eta), xi, dx),
            relative_gauge_residual(y.field(Field::ThetaRate), y.field(Field::EtaRate), xi, dx),
        )
    }

    /// `B*z = bᵀ M z`; for current actuation `(1/h)·Σ z5·dx`.
    pub fn b_star(&self, z: &StateVector<T>) -> T {
        self.b_star_vec(z.as_vector())
    }

    pub fn b_star_vec(&self, z: &DVector<T>) -> T {
        self.control.dot(&(&self.mass * z))
    }

    pub fn energy_norm_sq(&self, z: &DVector<T>) -> T {
        z.dot(&(&self.mass * z))
    }

    /// Same interior dynamics, charge-driven boundary loads as input.
    pub fn with_charge_control(&self) -> Self {
        let control = assemble_charge_control(&self.params, self.grid());
        Self { control_constrained: control.clone(), control, kind: ControlKind::ChargeBoundary, ..self.clone() }
    }

    /// Writes `G`, `M` and `b` as MatrixMarket coordinate files
    /// (`generator.mtx`, `mass.mtx`, `control.mtx`) with 17 significant digits.
    pub fn dump_matrices(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_coordinate(&dir.join("generator.mtx"), &self.generator)?;
        write_coordinate(&dir.join("mass.mtx"), &self.mass)?;
        let b = DMatrix::from_column_slice(self.control.len(), 1, self.control.as_slice());
        write_coordinate(&dir.join("control.mtx"), &b)?;
        Ok(())
    }
}

fn select_reduced<T: Real>(layout: &Layout, full: &DMatrix<T>) -> DMatrix<T> {
    let mut out = DMatrix::zeros(layout.reduced_dim(), full.ncols());
    for field in [Field::Strain, Field::Theta, Field::Velocity, Field::ThetaRate] {
        let src = layout.range(field);
        let dst = layout.reduced_range(field).expect("independent block");
        out.rows_mut(dst.start, dst.len()).copy_from(&full.rows(src.start, src.len()));
    }
    out
}

fn write_coordinate<T: Real>(path: &Path, m: &DMatrix<T>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let nnz = m.iter().filter(|v| **v != T::zero()).count();
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(out, "{} {} {}", m.nrows(), m.ncols(), nnz)?;
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            let v = m[(r, c)];
            if v != T::zero() {
                writeln!(out, "{} {} {:.16e}", r + 1, c + 1, v.as_f64())?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Assembles the current-actuated system and certifies skewness of `MG`.
pub fn assemble_generator<T: Real>(
    params: &BeamParameters<T>,
    grid: &StaggeredGrid<T>,
) -> Result<GeneratorAssembly<T>> {
    let ops = DiscreteOperators::for_params(params, grid)?;
    let n = grid.n_cells();
    let layout = Layout::new(n);
    let dim = layout.dim();

    let (rho, alpha, gamma, eps3, mu, xi) =
        (params.rho(), params.alpha(), params.gamma(), params.eps3(), params.mu(), params.xi());
    let c_theta = params.theta_inertia();

    let gi = ops.grad_interior_matrix();
    let gf = ops.grad_nodal_matrix();
    let d = ops.div_interior_matrix();
    let div = ops.div_free_matrix();
    let p = ops.p_xi_matrix();
    let id = DMatrix::<T>::identity(n, n);
    let i_minus_p = &id - &p;

    let mut g = DMatrix::<T>::zeros(dim, dim);
    let r = |f: Field| layout.range(f).start;
    let (o1, o2, o3, o4, o5, o6) = (
        r(Field::Strain),
        r(Field::Theta),
        r(Field::Eta),
        r(Field::Velocity),
        r(Field::ThetaRate),
        r(Field::EtaRate),
    );

    g.view_mut((o1, o4), (n, n + 1)).copy_from(&gf);
    for k in 0..n - 1 {
        g[(o2 + k, o5 + k)] = T::one();
    }
    for k in 0..n {
        g[(o3 + k, o6 + k)] = T::one();
    }

    // momentum
    let div_rho = &div / rho;
    let stiff = &id * alpha + &p * params.nonlocal_stiffness();
    g.view_mut((o4, o1), (n + 1, n)).copy_from(&(&div_rho * stiff));
    g.view_mut((o4, o6), (n + 1, n)).copy_from(&(&div_rho * &i_minus_p * gamma));
    g.view_mut((o4, o5), (n + 1, n - 1)).copy_from(&(&div_rho * &p * &gi * (gamma * xi)));

    // θ̇ row
    for k in 0..n - 1 {
        g[(o5 + k, o2 + k)] = -mu / c_theta;
    }
    g.view_mut((o5, o3), (n - 1, n)).copy_from(&(&d * (mu / c_theta)));
    g.view_mut((o5, o4), (n - 1, n + 1)).copy_from(&(&d * &p * &gf * (-(gamma * xi) / c_theta)));

    // η̇ row
    g.view_mut((o6, o3), (n, n)).copy_from(&(&gi * &d * (mu / eps3)));
    g.view_mut((o6, o2), (n, n - 1)).copy_from(&(&gi * (-mu / eps3)));
    g.view_mut((o6, o4), (n, n + 1)).copy_from(&(&i_minus_p * &gf * (gamma / eps3)));

    let mass = ops.assemble_mass(params);
    let mg = &mass * &g;
    let denom = mg.norm();
    let skew = (&mg + mg.transpose()).norm();
    let skewness = if denom > T::zero() { skew / denom } else { skew };
    let tol = skewness_tolerance::<T>();
    if !(skewness <= tol) {
        return Err(Error::AssemblyInconsistent { residual: skewness.as_f64(), tolerance: tol.as_f64() });
    }

    let embedding = {
        let mut e = DMatrix::zeros(dim, layout.reduced_dim());
        for field in [Field::Strain, Field::Theta, Field::Velocity, Field::ThetaRate] {
            let full = layout.range(field);
            let red = layout.reduced_range(field).expect("independent block");
            for k in 0..full.len() {
                e[(full.start + k, red.start + k)] = T::one();
            }
        }
        let xg = &gi * xi;
        let red2 = layout.reduced_range(Field::Theta).unwrap().start;
        let red5 = layout.reduced_range(Field::ThetaRate).unwrap().start;
        e.view_mut((o3, red2), (n, n - 1)).copy_from(&xg);
        e.view_mut((o6, red5), (n, n - 1)).copy_from(&xg);
        e
    };

    let control = assemble_control(params, grid);
    let control_constrained = {
        let mr = embedding.transpose() * &mass * &embedding;
        let chol = mr.cholesky().ok_or(Error::NotPositiveDefinite)?;
        let rhs = embedding.transpose() * (&mass * &control);
        &embedding * chol.solve(&rhs)
    };

    Ok(GeneratorAssembly {
        params: *params,
        ops,
        layout,
        generator: g,
        mass,
        control,
        control_constrained,
        embedding,
        kind: ControlKind::Current,
        skewness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::RawParameters;

    fn toy(n: usize) -> GeneratorAssembly<f64> {
        let p = BeamParameters::toy();
        assemble_generator(&p, &StaggeredGrid::new(1.0, n).unwrap()).unwrap()
    }

    #[test]
    fn toy_skewness() {
        assert!(toy(16).skewness() <= 1e-12);
    }

    #[test]
    fn rigid_translation_is_in_the_kernel() {
        let a = toy(16);
        let mut y = StateVector::zeros(16);
        y.set(Field::Velocity, &[1.0; 17]).unwrap();
        let gy = a.generator() * y.as_vector();
        assert!(gy.amax() < 1e-12, "{}", gy.amax());
    }

    #[test]
    fn zero_coupling_decouples_blocks() {
        let p = BeamParameters::<f64>::toy().with_gamma(0.0);
        let a = assemble_generator(&p, &StaggeredGrid::new(1.0, 12).unwrap()).unwrap();
        let l = a.layout();
        let mech = [Field::Strain, Field::Velocity];
        let em = [Field::Theta, Field::Eta, Field::ThetaRate, Field::EtaRate];
        for &r in &mech {
            for &c in &em {
                for (i, j) in l.range(r).flat_map(|i| l.range(c).map(move |j| (i, j))) {
                    assert_eq!(a.generator()[(i, j)], 0.0);
                    assert_eq!(a.generator()[(j, i)], 0.0);
                }
            }
        }
    }

    #[test]
    fn control_values_and_support() {
        let raw = RawParameters { eps1: 12.0, ..RawParameters::TOY };
        let p = BeamParameters::<f64>::from_raw(&raw).unwrap();
        let grid = StaggeredGrid::new(1.0, 20).unwrap();
        let b = assemble_control(&p, &grid);
        assert_eq!(b.iter().filter(|v| **v != 0.0).count(), 19);
        let l = Layout::new(20);
        assert!(l.range(Field::ThetaRate).all(|i| b[i] == 1.0));
    }

    #[test]
    fn constrained_control_has_the_same_adjoint() {
        let a = toy(16);
        let bh = a.control_constrained();
        let c = a.constraint_matrix();
        assert!((&c * bh).amax() < 1e-10 * bh.amax());
        let z = a.lift(&DVector::from_fn(a.layout().reduced_dim(), |i, _| ((i * 7 % 13) as f64 - 6.0) / 5.0));
        let lhs = bh.dot(&(a.mass() * &z));
        let rhs = a.b_star_vec(&z);
        assert!((lhs - rhs).abs() < 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn charge_control_has_two_entries() {
        let a = toy(32).with_charge_control();
        assert_eq!(a.control().iter().filter(|v| **v != 0.0).count(), 2);
        assert!(a.is_distributional());
    }

    #[test]
    fn matrix_dump_round_trips() {
        let a = toy(8);
        let dir = tempfile::tempdir().unwrap();
        a.dump_matrices(dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("generator.mtx")).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("%%MatrixMarket"));
        let dims: Vec<usize> = lines.next().unwrap().split_whitespace().map(|s| s.parse().unwrap()).collect();
        assert_eq!(dims[0], a.layout().dim());
        let mut g = DMatrix::<f64>::zeros(dims[0], dims[1]);
        for line in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let (r, c): (usize, usize) = (parts[0].parse().unwrap(), parts[1].parse().unwrap());
            g[(r - 1, c - 1)] = parts[2].parse().unwrap();
        }
        assert_eq!(&g, a.generator());
    }
}
