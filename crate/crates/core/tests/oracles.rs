//! Independent oracles: closed-form continuum energies, a dense Helmholtz
//! solve built from scratch, and analytic dispersion relations.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use piezobeam::generator::assemble_generator;
use piezobeam::grid::StaggeredGrid;
use piezobeam::operators::DiscreteOperators;
use piezobeam::params::BeamParameters;
use piezobeam::spectral::{compute_spectrum, DominantBlock};
use piezobeam::state::StateVector;
use piezobeam::variants::assemble_electrostatic;

fn params(gamma: f64) -> BeamParameters<f64> {
    BeamParameters::new(1.3, 0.7, gamma, 2.0, 1.5, 0.9, 0.8, 1.0).unwrap()
}

/// Continuum energy of the fields
/// `v_x = a1 cos πx`, `θ = a2 sin πx`, `v̇ = a4 cos 2πx`, `θ̇ = a5 sin 2πx`
/// with `η = ξ θ_x`, `η̇ = ξ θ̇_x` on `[0, 1]`.
fn continuum_energy(p: &BeamParameters<f64>, a: [f64; 4]) -> f64 {
    let [a1, a2, a4, a5] = a;
    let xi = p.xi();
    let c = p.eps1() * p.h() * p.h() / 12.0;
    let half_int = 0.5;
    0.5 * half_int
        * (p.rho() * a4 * a4
            + p.alpha() * a1 * a1
            + p.gamma() * p.gamma() / p.eps3() * a1 * a1 / (1.0 + xi * PI * PI)
            + c * a5 * a5
            + p.eps3() * (xi * 2.0 * PI * a5).powi(2)
            + p.mu() * (a2 * (1.0 + xi * PI * PI)).powi(2))
}

fn sampled_state(p: &BeamParameters<f64>, n: usize, a: [f64; 4]) -> (StaggeredGrid<f64>, StateVector<f64>) {
    let g = StaggeredGrid::new(1.0, n).unwrap();
    let [a1, a2, a4, a5] = a;
    let strain = g.sample_cells(|x| a1 * (PI * x).cos());
    let theta = g.sample_interior(|x| a2 * (PI * x).sin());
    let vel = g.sample_nodes(|x| a4 * (2.0 * PI * x).cos());
    let rate = g.sample_interior(|x| a5 * (2.0 * PI * x).sin());
    let y = StateVector::constrained(n, p.xi(), g.dx(), &strain, &theta, &vel, &rate).unwrap();
    (g, y)
}

#[test]
fn energy_converges_to_continuum_quadrature() {
    let p = params(0.6);
    let a = [0.8, -1.1, 0.5, 1.7];
    let exact = continuum_energy(&p, a);
    let mut errors = Vec::new();
    for n in [32, 64, 128] {
        let (g, y) = sampled_state(&p, n, a);
        let ops = DiscreteOperators::for_params(&p, &g).unwrap();
        let e = ops.energy(&y, &p, 1e-10).unwrap().total;
        errors.push((e - exact).abs() / exact);
    }
    assert!(errors[2] < 1e-3, "{errors:?}");
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio} from {errors:?}");
    }
}

#[test]
fn energy_matches_quadratic_form() {
    let p = params(-0.4);
    let (g, y) = sampled_state(&p, 24, [0.3, 0.9, -0.2, 0.4]);
    let ops = DiscreteOperators::for_params(&p, &g).unwrap();
    let m = ops.assemble_mass(&p);
    let quad = 0.5 * y.as_vector().dot(&(&m * y.as_vector()));
    let e = ops.energy_unchecked(&y, &p).total;
    assert!((quad - e).abs() <= 1e-13 * e);
}

/// Dense `(I − ξ·lap)` with mirrored ghost cells, assembled entry by entry.
fn dense_helmholtz(n: usize, xi: f64, dx: f64) -> DMatrix<f64> {
    let s = xi / (dx * dx);
    DMatrix::from_fn(n, n, |i, j| {
        let off = if i.abs_diff(j) == 1 { -s } else { 0.0 };
        let diag = if i == j {
            let neighbours = if i == 0 || i == n - 1 { 1.0 } else { 2.0 };
            1.0 + s * neighbours
        } else {
            0.0
        };
        diag + off
    })
}

#[test]
fn p_xi_matches_dense_solve() {
    for (n, xi) in [(16, 1.0 / 12.0), (40, 1.0), (97, 0.003)] {
        let g = StaggeredGrid::new(1.0, n).unwrap();
        let ops = DiscreteOperators::new(&g, xi).unwrap();
        let w: Vec<f64> = (0..n).map(|k| ((k * 7 + 3) % 11) as f64 - 5.0).collect();
        let z = ops.apply_p_xi(&w);
        let expect = dense_helmholtz(n, xi, g.dx()).lu().solve(&DVector::from_vec(w)).unwrap();
        let err = (DVector::from_vec(z) - &expect).amax();
        assert!(err <= 1e-12 * expect.amax(), "{err}");
    }
}

#[test]
fn p_xi_spectrum_in_unit_interval() {
    let g: StaggeredGrid<f64> = StaggeredGrid::new(1.0, 48).unwrap();
    let ops: DiscreteOperators<f64> = DiscreteOperators::new(&g, 0.2).unwrap();
    let eig = ops.p_xi_matrix().symmetric_eigen();
    let lo = eig.eigenvalues.min();
    let hi: f64 = eig.eigenvalues.max();
    assert!(lo > 0.0);
    assert!((hi - 1.0).abs() < 1e-12);
    // analytic: 1/(1 + ξ (2/dx)² sin²(kπ/2N))
    let mut numeric: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    numeric.sort_by(|a, b| b.partial_cmp(a).unwrap());
    for (k, v) in numeric.iter().enumerate() {
        let s = (k as f64 * PI / (2.0 * 48.0)).sin();
        let exact = 1.0 / (1.0 + 0.2 * (2.0 / g.dx()).powi(2) * s * s);
        assert!((v - exact).abs() < 1e-12, "{k}: {v} vs {exact}");
    }
}

fn positive_frequencies(n: usize, block: DominantBlock) -> Vec<f64> {
    let p = BeamParameters::toy().with_gamma(0.0);
    let a = assemble_generator(&p, &StaggeredGrid::new(1.0, n).unwrap()).unwrap();
    let r = compute_spectrum(&a, 1e-8).unwrap();
    r.modes.iter().filter(|m| m.dominant_block == block && m.lambda.im > 1e-6).map(|m| m.lambda.im).take(5).collect()
}

#[test]
fn mechanical_dispersion_is_second_order() {
    let exact: Vec<f64> = (1..=5).map(|k| k as f64 * PI).collect();
    let e32: Vec<f64> = positive_frequencies(32, DominantBlock::Mechanical).iter().zip(&exact).map(|(w, x)| (w - x).abs()).collect();
    let e64: Vec<f64> = positive_frequencies(64, DominantBlock::Mechanical).iter().zip(&exact).map(|(w, x)| (w - x).abs()).collect();
    for k in 0..5 {
        let ratio = e32[k] / e64[k];
        assert!((3.5..4.5).contains(&ratio), "mode {}: {ratio}", k + 1);
    }
}

#[test]
fn electromagnetic_dispersion_is_second_order() {
    // toy units: ε1h²/12 = 1/12, ξ = 1/12, μ = 1
    let exact: Vec<f64> = (1..=5).map(|k| (12.0 * (1.0 + (k as f64 * PI).powi(2) / 12.0)).sqrt()).collect();
    let e32: Vec<f64> = positive_frequencies(32, DominantBlock::Electromagnetic).iter().zip(&exact).map(|(w, x)| (w - x).abs()).collect();
    let e64: Vec<f64> = positive_frequencies(64, DominantBlock::Electromagnetic).iter().zip(&exact).map(|(w, x)| (w - x).abs()).collect();
    for k in 0..5 {
        let ratio = e32[k] / e64[k];
        assert!((3.5..4.5).contains(&ratio), "mode {}: {ratio}", k + 1);
    }
}

#[test]
fn clamped_free_dispersion_is_second_order() {
    let freqs = |n: usize| -> Vec<f64> {
        let p = BeamParameters::toy().with_gamma(0.0);
        let a = assemble_electrostatic(&p, &StaggeredGrid::new(1.0, n).unwrap()).unwrap();
        a.spectrum(1e-8).unwrap().modes.iter().filter(|m| m.lambda.im > 0.0).map(|m| m.lambda.im).take(4).collect()
    };
    let exact: Vec<f64> = (0..4).map(|k| (k as f64 + 0.5) * PI).collect();
    let (f32_, f64_) = (freqs(32), freqs(64));
    for k in 0..4 {
        let ratio = (f32_[k] - exact[k]).abs() / (f64_[k] - exact[k]).abs();
        assert!((3.5..4.5).contains(&ratio), "mode {k}: {ratio}");
    }
}
