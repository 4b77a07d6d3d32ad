//! Eigenstructure of the generator in the energy inner product.
//!
//! Everything runs on the reduced coordinates `q = (y1, y2, y4, y5)`. With
//! `M_r = TᵀMT = LLᵀ` the matrix `S = L⁻¹(M_r G_r)L⁻ᵀ` is skew-symmetric and
//! similar to `G_r`. Modes come from the Hermitian matrix `iS`; the real parts
//! are measured separately from a general Schur decomposition of `S` so that
//! the imaginary-axis property is checked rather than assumed.
//!
//! `M_r` is block diagonal over the four reduced blocks, hence so is `L`, and
//! the energy carried by a block of a normalized mode is just the squared norm
//! of that block of the Hermitian eigenvector.

use std::path::Path;

use nalgebra::{Cholesky, Complex, ComplexField, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::dynamics::TimeSeries;
use crate::error::{Error, Result};
use crate::generator::GeneratorAssembly;
use crate::scalar::Real;
use crate::state::Field;

/// Largest state dimension accepted by the dense eigensolvers.
pub const MAX_DENSE_DIM: usize = 6 * 1024;

/// Energy fraction above which a mode is attributed to one block.
const DOMINANCE: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DominantBlock {
    Mechanical,
    Electromagnetic,
    Mixed,
}

impl DominantBlock {
    pub fn name(self) -> &'static str {
        match self {
            DominantBlock::Mechanical => "mechanical",
            DominantBlock::Electromagnetic => "electromagnetic",
            DominantBlock::Mixed => "mixed",
        }
    }

    fn from_fraction(mechanical: f64) -> Self {
        if mechanical > DOMINANCE {
            DominantBlock::Mechanical
        } else if 1.0 - mechanical > DOMINANCE {
            DominantBlock::Electromagnetic
        } else {
            DominantBlock::Mixed
        }
    }
}

/// One eigenpair, normalized so that `‖φ‖_M = 1`.
#[derive(Debug, Clone)]
pub struct ModeRecord<T: Real> {
    pub lambda: Complex<T>,
    /// `B*φ` for the normalized mode.
    pub bstar: Complex<T>,
    pub stabilizable: bool,
    pub mechanical_fraction: T,
    pub dominant_block: DominantBlock,
}

impl<T: Real> ModeRecord<T> {
    pub fn bstar_abs(&self) -> T {
        self.bstar.modulus()
    }

    pub fn frequency(&self) -> T {
        self.lambda.im.abs()
    }
}

#[derive(Debug, Clone)]
pub struct SpectrumReport<T: Real> {
    /// Sorted by `|Im λ|`, positive imaginary part first on ties.
    pub eigenvalues: Vec<Complex<T>>,
    pub max_abs_real: T,
    /// `max |λ|`, used as `‖G‖` in relative tolerances.
    pub spectral_radius: T,
    pub kernel_dimension: usize,
    /// Per-mode table in the same order as `eigenvalues`. Empty for closed-loop
    /// reports, which carry eigenvalues only.
    pub modes: Vec<ModeRecord<T>>,
    pub eig_tol: T,
}

impl<T: Real> SpectrumReport<T> {
    pub fn stabilizable_count(&self) -> usize {
        self.modes.iter().filter(|m| m.stabilizable).count()
    }

    pub fn non_stabilizable_count(&self) -> usize {
        self.modes.len() - self.stabilizable_count()
    }

    /// Largest real part over all eigenvalues.
    pub fn spectral_abscissa(&self) -> T {
        self.eigenvalues.iter().fold(T::min_value().unwrap_or(-T::one()), |a, l| a.max(l.re))
    }

    /// Writes `re, im, bstar_abs, stabilizable, dominant_block`. Closed-loop
    /// reports leave the mode columns empty.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["re", "im", "bstar_abs", "stabilizable", "dominant_block"])?;
        for (k, l) in self.eigenvalues.iter().enumerate() {
            let re = format!("{:.17e}", l.re.as_f64());
            let im = format!("{:.17e}", l.im.as_f64());
            match self.modes.get(k) {
                Some(m) => w.write_record([
                    re,
                    im,
                    format!("{:.17e}", m.bstar_abs().as_f64()),
                    m.stabilizable.to_string(),
                    m.dominant_block.name().to_string(),
                ])?,
                None => w.write_record([re, im, String::new(), String::new(), String::new()])?,
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Counts of the stabilizability classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Classification {
    pub stabilizable: usize,
    pub non_stabilizable: usize,
    pub kernel: usize,
}

/// Energy-symmetrized reduced system.
#[derive(Debug, Clone)]
pub struct SymmetrizedSystem<T: Real> {
    /// Marks the coordinates that carry mechanical energy.
    mechanical: Vec<bool>,
    cholesky: Cholesky<T, Dyn>,
    /// `S = L⁻¹ M_r G_r L⁻ᵀ`.
    skew: DMatrix<T>,
    /// `L⁻¹ Tᵀ M b`, so that `B*φ = cᵀ v` for `φ = T L⁻ᵀ v`.
    observation: DVector<T>,
}

impl<T: Real> SymmetrizedSystem<T> {
    pub fn new(assembly: &GeneratorAssembly<T>) -> Result<Self> {
        let layout = assembly.layout();
        if layout.dim() > MAX_DENSE_DIM {
            return Err(Error::TooLarge(layout.dim()));
        }
        let mut mechanical = vec![false; layout.reduced_dim()];
        for field in [Field::Strain, Field::Velocity] {
            for k in layout.reduced_range(field).expect("independent block") {
                mechanical[k] = true;
            }
        }
        let ell = assembly.embedding().transpose() * assembly.observation();
        Self::from_parts(&assembly.reduced_mass(), &assembly.reduced_generator(), &ell, mechanical)
    }

    /// Symmetrizes `ẋ = Gx` under the positive definite Gram matrix `mass`.
    /// `covector` represents `B*` (`B*x = covectorᵀx`). The mass matrix must
    /// not couple mechanical and non-mechanical coordinates.
    pub fn from_parts(mass: &DMatrix<T>, generator: &DMatrix<T>, covector: &DVector<T>, mechanical: Vec<bool>) -> Result<Self> {
        let cholesky = mass.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
        let l = cholesky.l();
        let k = mass * generator;
        // S = L⁻¹ K L⁻ᵀ = L⁻¹ (L⁻¹ Kᵀ)ᵀ
        let left = l.solve_lower_triangular(&k.transpose()).ok_or(Error::NotPositiveDefinite)?;
        let skew = l.solve_lower_triangular(&left.transpose()).ok_or(Error::NotPositiveDefinite)?;
        let observation = l.solve_lower_triangular(covector).ok_or(Error::NotPositiveDefinite)?;
        Ok(Self { mechanical, cholesky, skew, observation })
    }

    pub fn skew(&self) -> &DMatrix<T> {
        &self.skew
    }

    pub fn observation(&self) -> &DVector<T> {
        &self.observation
    }

    /// `‖S + Sᵀ‖_F / ‖S‖_F`.
    pub fn skewness(&self) -> T {
        let n = self.skew.norm();
        let s = (&self.skew + self.skew.transpose()).norm();
        if n > T::zero() {
            s / n
        } else {
            s
        }
    }

    /// Reduced coordinates `L⁻ᵀ v` of a normalized symmetrized vector.
    pub fn to_reduced(&self, v: &DVector<T>) -> DVector<T> {
        self.cholesky.l().tr_solve_lower_triangular(v).expect("Cholesky factor is invertible")
    }

    /// Eigenvalues of `S − k·c·cᵀ` by real Schur decomposition.
    pub fn eigenvalues_with_feedback(&self, gain: T) -> Vec<Complex<T>> {
        let mut s = self.skew.clone();
        if gain != T::zero() {
            s.ger(-gain, &self.observation, &self.observation, T::one());
        }
        s.complex_eigenvalues().iter().copied().collect()
    }

    fn mechanical_fraction(&self, v: &[Complex<T>]) -> T {
        let mut mech = T::zero();
        let mut total = T::zero();
        for (z, &is_mech) in v.iter().zip(&self.mechanical) {
            let e = z.norm_sqr();
            total += e;
            if is_mech {
                mech += e;
            }
        }
        if total > T::zero() {
            mech / total
        } else {
            T::zero()
        }
    }
}

/// Sorts by `|Im λ|` and puts the positive member of every conjugate pair
/// first, treating frequencies equal to within roundoff as ties.
fn sort_spectrum<T: Real, X>(items: &mut [X], lambda: impl Fn(&X) -> Complex<T>) {
    items.sort_by(|a, b| sort_key(&lambda(a), &lambda(b)));
    let radius = items.iter().fold(T::zero(), |a, x| a.max(lambda(x).modulus()));
    let tol = T::lit(1e-10) * radius;
    for k in 1..items.len() {
        let (a, b) = (lambda(&items[k - 1]), lambda(&items[k]));
        if a.im < T::zero() && b.im > T::zero() && (a.im.abs() - b.im.abs()).abs() <= tol {
            items.swap(k - 1, k);
        }
    }
}

fn sort_key<T: Real>(a: &Complex<T>, b: &Complex<T>) -> std::cmp::Ordering {
    let (fa, fb) = (a.im.abs(), b.im.abs());
    fa.partial_cmp(&fb)
        .unwrap_or(std::cmp::Ordering::Equal)
        .then_with(|| b.im.partial_cmp(&a.im).unwrap_or(std::cmp::Ordering::Equal))
}

/// Open-loop spectrum with the stabilizability table.
pub fn compute_spectrum<T: Real>(assembly: &GeneratorAssembly<T>, eig_tol: T) -> Result<SpectrumReport<T>> {
    let sys = SymmetrizedSystem::new(assembly)?;
    spectrum_of(&sys, eig_tol)
}

/// Same as [`compute_spectrum`] for an already symmetrized system.
pub fn spectrum_of<T: Real>(sys: &SymmetrizedSystem<T>, eig_tol: T) -> Result<SpectrumReport<T>> {
    let s = &sys.skew;
    let n = s.nrows();
    let i = Complex::new(T::zero(), T::one());
    let half = T::lit(0.5);
    let hermitian = DMatrix::from_fn(n, n, |r, c| i * Complex::from((s[(r, c)] - s[(c, r)]) * half));
    let eig = SymmetricEigen::try_new(hermitian, T::eps(), 0).ok_or(Error::SolverFailure("hermitian eigensolver"))?;

    let obs = &sys.observation;
    let mut modes: Vec<ModeRecord<T>> = (0..n)
        .map(|k| {
            let v = eig.eigenvectors.column(k);
            let lambda = Complex::new(T::zero(), -eig.eigenvalues[k]);
            let bstar = v.iter().zip(obs.iter()).fold(Complex::new(T::zero(), T::zero()), |a, (z, &c)| a + *z * c);
            let mechanical_fraction = sys.mechanical_fraction(v.as_slice());
            ModeRecord {
                lambda,
                bstar,
                stabilizable: bstar.modulus() > eig_tol,
                mechanical_fraction,
                dominant_block: DominantBlock::from_fraction(mechanical_fraction.as_f64()),
            }
        })
        .collect();
    sort_spectrum(&mut modes, |m| m.lambda);

    let schur = s.complex_eigenvalues();
    let max_abs_real = schur.iter().fold(T::zero(), |a, l| a.max(l.re.abs()));
    let spectral_radius = modes.iter().fold(T::zero(), |a, m| a.max(m.lambda.modulus()));
    let kernel_dimension = count_kernel(modes.iter().map(|m| m.lambda), spectral_radius);
    Ok(SpectrumReport {
        eigenvalues: modes.iter().map(|m| m.lambda).collect(),
        max_abs_real,
        spectral_radius,
        kernel_dimension,
        modes,
        eig_tol,
    })
}

/// `k`-th oscillating mode (0 = lowest nonzero frequency, positive imaginary
/// part) as a real state in the system's own coordinates, scaled to unit
/// energy norm. The complex eigenvector is rotated so that its largest entry
/// is real before the real part is taken.
pub fn real_mode<T: Real>(sys: &SymmetrizedSystem<T>, k: usize) -> Result<(Complex<T>, DVector<T>)> {
    let s = &sys.skew;
    let n = s.nrows();
    let i = Complex::new(T::zero(), T::one());
    let half = T::lit(0.5);
    let hermitian = DMatrix::from_fn(n, n, |r, c| i * Complex::from((s[(r, c)] - s[(c, r)]) * half));
    let eig = SymmetricEigen::try_new(hermitian, T::eps(), 0).ok_or(Error::SolverFailure("hermitian eigensolver"))?;
    let radius = eig.eigenvalues.iter().fold(T::zero(), |a, &m| a.max(m.abs()));
    let tol = kernel_tolerance::<T>() * radius;
    // λ = −iμ, so positive frequencies have μ < 0
    let mut picks: Vec<usize> = (0..n).filter(|&j| -eig.eigenvalues[j] > tol).collect();
    picks.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap_or(std::cmp::Ordering::Equal));
    let &j = picks.get(k).ok_or(Error::InvalidConfig(format!("mode index {k} out of range")))?;
    let v = eig.eigenvectors.column(j);
    let (_, pivot) = v.iter().enumerate().fold((T::zero(), 0), |(best, at), (idx, z)| {
        let m = z.modulus();
        if m > best {
            (m, idx)
        } else {
            (best, at)
        }
    });
    let phase = v[pivot].conj() / Complex::from(v[pivot].modulus());
    let re = DVector::from_iterator(n, v.iter().map(|z| (*z * phase).re));
    let scale = re.norm();
    let reduced = sys.to_reduced(&(re / scale));
    Ok((Complex::new(T::zero(), -eig.eigenvalues[j]), reduced))
}

/// Relative threshold below which an eigenvalue counts as zero.
pub fn kernel_tolerance<T: Real>() -> T {
    T::lit(1e-10)
}

fn count_kernel<T: Real>(eigs: impl Iterator<Item = Complex<T>>, radius: T) -> usize {
    let tol = kernel_tolerance::<T>() * radius;
    eigs.filter(|l| l.modulus() <= tol).count()
}

/// Classification summary of an open-loop report. Kernel modes are counted
/// separately, so the three counts partition the spectrum.
pub fn classify_stabilizability<T: Real>(report: &SpectrumReport<T>) -> Classification {
    let tol = kernel_tolerance::<T>() * report.spectral_radius;
    let mut c = Classification { stabilizable: 0, non_stabilizable: 0, kernel: 0 };
    for m in &report.modes {
        if m.lambda.modulus() <= tol {
            c.kernel += 1;
        } else if m.stabilizable {
            c.stabilizable += 1;
        } else {
            c.non_stabilizable += 1;
        }
    }
    c
}

/// M-orthonormal basis of `{y : Gy = 0}` on the gauge subspace, as full
/// state vectors.
pub fn kernel_basis<T: Real>(assembly: &GeneratorAssembly<T>) -> Result<Vec<DVector<T>>> {
    let sys = SymmetrizedSystem::new(assembly)?;
    let svd = sys.skew.clone().try_svd(false, true, T::eps(), 0).ok_or(Error::SolverFailure("svd"))?;
    let v_t = svd.v_t.as_ref().expect("requested right singular vectors");
    let radius = svd.singular_values.iter().fold(T::zero(), |a, &s| a.max(s));
    let tol = kernel_tolerance::<T>() * radius;
    let mut basis = Vec::new();
    for (k, &sigma) in svd.singular_values.iter().enumerate() {
        if sigma <= tol {
            let v = v_t.row(k).transpose();
            let reduced = sys.to_reduced(&v);
            basis.push(assembly.lift(&reduced));
        }
    }
    Ok(basis)
}

/// Eigenvalues of the closed loop `G − k·b·bᵀM`. The report carries no mode
/// table.
pub fn closed_loop_spectrum<T: Real>(assembly: &GeneratorAssembly<T>, gain: T, eig_tol: T) -> Result<SpectrumReport<T>> {
    if gain < T::zero() {
        return Err(Error::InvalidConfig("feedback gain must be non-negative".into()));
    }
    let sys = SymmetrizedSystem::new(assembly)?;
    Ok(closed_loop_of(&sys, gain, eig_tol))
}

pub fn closed_loop_of<T: Real>(sys: &SymmetrizedSystem<T>, gain: T, eig_tol: T) -> SpectrumReport<T> {
    let mut eigenvalues = sys.eigenvalues_with_feedback(gain);
    sort_spectrum(&mut eigenvalues, |l| *l);
    let max_abs_real = eigenvalues.iter().fold(T::zero(), |a, l| a.max(l.re.abs()));
    let spectral_radius = eigenvalues.iter().fold(T::zero(), |a, l| a.max(l.modulus()));
    let kernel_dimension = count_kernel(eigenvalues.iter().copied(), spectral_radius);
    SpectrumReport { eigenvalues, max_abs_real, spectral_radius, kernel_dimension, modes: Vec::new(), eig_tol }
}

/// Pairs open-loop with closed-loop eigenvalues one-to-one, committing the
/// closest pairs first. Modes the feedback barely moves (uncontrollable or
/// weakly coupled) are therefore matched before strongly shifted ones can
/// claim their partners.
pub fn match_eigenvalues<T: Real>(open: &[Complex<T>], closed: &[Complex<T>]) -> Vec<Complex<T>> {
    assert_eq!(open.len(), closed.len(), "closed-loop spectrum has the open-loop size");
    let mut pairs: Vec<(T, usize, usize)> = Vec::with_capacity(open.len() * closed.len());
    for (i, o) in open.iter().enumerate() {
        for (j, c) in closed.iter().enumerate() {
            pairs.push(((*c - *o).modulus(), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut out: Vec<Option<Complex<T>>> = vec![None; open.len()];
    let mut used = vec![false; closed.len()];
    let mut left = open.len();
    for (_, i, j) in pairs {
        if left == 0 {
            break;
        }
        if out[i].is_none() && !used[j] {
            out[i] = Some(closed[j]);
            used[j] = true;
            left -= 1;
        }
    }
    out.into_iter().map(|c| c.expect("every open-loop eigenvalue is matched")).collect()
}

/// Least-squares fit of `log E(t) ≈ a − ω t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit<T> {
    pub rate: T,
    pub r_squared: T,
    pub samples: usize,
}

/// Fits the decay rate of `energy` over records with `t0 ≤ t ≤ t1`.
pub fn decay_rate_fit<T: Real>(times: &[T], energy: &[T], window: (T, T)) -> Result<DecayFit<T>> {
    let picked: Vec<(T, T)> = times
        .iter()
        .zip(energy)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(&t, &e)| (t, e))
        .collect();
    if picked.len() < 10 {
        return Err(Error::DegenerateWindow(picked.len()));
    }
    if let Some(&(_, e)) = picked.iter().find(|(_, e)| !(*e > T::zero())) {
        return Err(Error::NonPositiveEnergy(e.as_f64()));
    }
    let m = T::from_count(picked.len());
    let (st, sy) = picked.iter().fold((T::zero(), T::zero()), |(a, b), (t, e)| (a + *t, b + e.ln()));
    let (mt, my) = (st / m, sy / m);
    let (mut stt, mut sty, mut syy) = (T::zero(), T::zero(), T::zero());
    for (t, e) in &picked {
        let dt = *t - mt;
        let dy = e.ln() - my;
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    let slope = sty / stt;
    let r_squared = if syy > T::zero() { (sty * sty) / (stt * syy) } else { T::one() };
    Ok(DecayFit { rate: -slope, r_squared, samples: picked.len() })
}

/// [`decay_rate_fit`] on the total energy of a recorded trajectory.
pub fn decay_rate_fit_series<T: Real>(series: &TimeSeries<T>, window: (T, T)) -> Result<DecayFit<T>> {
    decay_rate_fit(&series.times, &series.totals(), window)
}
