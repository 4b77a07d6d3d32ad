//! Spectral analysis against independent computations.

use nalgebra::DVector;
use piezobeam::generator::{assemble_generator, GeneratorAssembly};
use piezobeam::grid::StaggeredGrid;
use piezobeam::params::BeamParameters;
use piezobeam::spectral::{
    classify_stabilizability, closed_loop_of, compute_spectrum, kernel_basis, match_eigenvalues, real_mode,
    spectrum_of, DominantBlock, SymmetrizedSystem,
};
use piezobeam::state::{Field, Layout};

fn toy(gamma: f64, n: usize) -> GeneratorAssembly<f64> {
    assemble_generator(&BeamParameters::toy().with_gamma(gamma), &StaggeredGrid::new(1.0, n).unwrap()).unwrap()
}

#[test]
fn real_modes_satisfy_second_order_eigen_relation() {
    // Re φ of a pair ±iω solves G²v = −ω²v
    let a = toy(0.7, 24);
    let sys = SymmetrizedSystem::new(&a).unwrap();
    let g = a.reduced_generator();
    let m = a.reduced_mass();
    let gnorm = g.norm();
    for k in [0, 3, 10, 40] {
        let (lambda, v) = real_mode(&sys, k).unwrap();
        let r = &g * (&g * &v) + &v * (lambda.im * lambda.im);
        let rn = r.dot(&(&m * &r)).sqrt();
        let vn = v.dot(&(&m * &v)).sqrt();
        assert!(rn <= 1e-8 * gnorm * gnorm * vn, "mode {k}: {rn}");
    }
}

#[test]
fn ordering_is_by_modulus_of_imaginary_part_positive_first() {
    let r = compute_spectrum(&toy(0.5, 16), 1e-8).unwrap();
    let tol = 1e-10 * r.spectral_radius;
    for w in r.eigenvalues.windows(2) {
        assert!(w[0].im.abs() <= w[1].im.abs() + tol);
        if (w[0].im + w[1].im).abs() <= tol && w[0].im.abs() > tol {
            assert!(w[0].im > 0.0);
        }
    }
}

#[test]
fn even_electromagnetic_modes_are_unobservable_at_zero_coupling() {
    let a = toy(0.0, 32);
    let r = compute_spectrum(&a, 1e-8).unwrap();
    let em: Vec<_> = r.modes.iter().filter(|m| m.dominant_block == DominantBlock::Electromagnetic && m.lambda.im > 0.0).collect();
    for (i, m) in em.iter().take(10).enumerate() {
        let k = i + 1;
        if k % 2 == 0 {
            assert!(m.bstar_abs() <= 1e-8 && !m.stabilizable, "k={k}: {}", m.bstar_abs());
        } else {
            assert!(m.bstar_abs() > 1e-3 && m.stabilizable, "k={k}: {}", m.bstar_abs());
        }
    }
    // mechanical modes never see the current at γ=0
    assert!(r.modes.iter().filter(|m| m.dominant_block == DominantBlock::Mechanical).all(|m| !m.stabilizable));
}

#[test]
fn classification_partitions_the_spectrum() {
    let r = compute_spectrum(&toy(1.0, 16), 1e-8).unwrap();
    let c = classify_stabilizability(&r);
    assert_eq!(c.stabilizable + c.non_stabilizable + c.kernel, Layout::new(16).reduced_dim());
    assert_eq!(c.kernel, 1);
}

#[test]
fn kernel_is_the_rigid_translation() {
    for n in [16, 32] {
        let a = toy(0.8, n);
        let basis = kernel_basis(&a).unwrap();
        assert_eq!(basis.len(), 1);
        let layout = a.layout();
        let mut translation = DVector::zeros(layout.dim());
        for i in layout.range(Field::Velocity) {
            translation[i] = 1.0;
        }
        let k = &basis[0];
        let c = k.dot(&translation) / translation.dot(&translation);
        let resid = (k - &translation * c).norm() / k.norm();
        assert!(resid < 1e-10, "{resid}");
    }
}

#[test]
fn kernel_dimension_ignores_stiffness() {
    let p = BeamParameters::toy().with_gamma(0.6);
    let g = StaggeredGrid::new(1.0, 24).unwrap();
    for alpha in [1.0, 2.0, 4.0] {
        let a = assemble_generator(&p.with_alpha(alpha).unwrap(), &g).unwrap();
        assert_eq!(compute_spectrum(&a, 1e-8).unwrap().kernel_dimension, 1);
    }
}

#[test]
fn small_gain_shift_follows_first_order_perturbation() {
    let a = toy(1.0, 16);
    let sys = SymmetrizedSystem::new(&a).unwrap();
    let open = spectrum_of(&sys, 1e-8).unwrap();
    for k in [1e-3, 1e-2] {
        let closed = closed_loop_of(&sys, k, 1e-8);
        let matched = match_eigenvalues(&open.eigenvalues, &closed.eigenvalues);
        for (i, m) in open.modes.iter().enumerate().filter(|(_, m)| m.stabilizable && m.lambda.im > 0.0).take(6) {
            let predicted = -k * m.bstar_abs().powi(2);
            let rel = (matched[i].re - predicted).abs() / predicted.abs();
            assert!(rel < 0.1, "k={k} ω={}: {} vs {predicted}", m.lambda.im, matched[i].re);
        }
    }
}

#[test]
fn closed_loop_removes_nothing_from_unobservable_modes() {
    let a = toy(0.0, 24);
    let sys = SymmetrizedSystem::new(&a).unwrap();
    let open = spectrum_of(&sys, 1e-8).unwrap();
    let closed = closed_loop_of(&sys, 1.0, 1e-8);
    assert_eq!(closed.eigenvalues.len(), open.eigenvalues.len());
    let matched = match_eigenvalues(&open.eigenvalues, &closed.eigenvalues);
    for (i, m) in open.modes.iter().enumerate().filter(|(_, m)| m.bstar_abs() < 1e-12) {
        assert!(matched[i].re.abs() <= 1e-8, "ω={}: {}", m.lambda.im, matched[i].re);
    }
}

#[test]
fn spectrum_csv_has_expected_schema() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spectrum.csv");
    let r = compute_spectrum(&toy(0.3, 8), 1e-8).unwrap();
    r.write_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "re,im,bstar_abs,stabilizable,dominant_block");
    assert_eq!(lines.count(), r.eigenvalues.len());
}
