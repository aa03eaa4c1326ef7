//! Randomized checks of the Gaussian and determinant lemmas used by the
//! transport bound.

use metastab::transport::{jacobi_formula_check, matrix_opt_value, partial_gaussian, tilde_matrix_and_subdet};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};

fn config(cases: u32) -> Config {
    Config { cases, rng_seed: RngSeed::Fixed(0x00c0_ffee), failure_persistence: None, ..Config::default() }
}

/// GᵀG + shift·Id with G entrywise uniform.
fn spd(n: usize, shift: f64) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| {
        let g = DMatrix::from_vec(n, n, v);
        g.transpose() * &g + DMatrix::identity(n, n) * shift
    })
}

fn unit(n: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
        .prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-2)
        .prop_map(|v| DVector::from_vec(v).normalize())
}

fn symmetric(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| {
        let g = DMatrix::from_vec(n, n, v);
        (&g + g.transpose()) * 0.5
    })
}

proptest! {
    #![proptest_config(config(100))]

    #[test]
    fn partial_gaussian_closed_form(
        a in spd(3, 0.3),
        eta in unit(3),
        z in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let z = DVector::from_vec(z);
        let z_perp = &z - &eta * z.dot(&eta);
        let (closed, quad) = partial_gaussian(&a, &eta, &z_perp).unwrap();
        prop_assert!((closed - quad).abs() <= 1e-8 * closed.abs().max(1e-300), "{closed} vs {quad}");
    }

    #[test]
    fn subdeterminant_identity((a, eta) in (2usize..=5).prop_flat_map(|n| (spd(n, 0.2), unit(n)))) {
        let rep = tilde_matrix_and_subdet(&a, &eta).unwrap();
        let det = a.clone().lu().determinant();
        prop_assert!(rep.residual <= 1e-10 * det, "residual {} det {det}", rep.residual);
        prop_assert!(rep.transverse_eigenvalues.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn jacobi_formula(b in spd(3, 1.0), c in symmetric(3), r in -1.0f64..1.0) {
        let phi = |t: f64| {
            let (s, co) = (r * t).sin_cos();
            let mut rot = DMatrix::identity(3, 3);
            rot[(0, 0)] = co;
            rot[(0, 1)] = -s;
            rot[(1, 0)] = s;
            rot[(1, 1)] = co;
            rot * (&b + &c * (0.5 * t))
        };
        let samples: Vec<f64> = (0..11).map(|k| k as f64 / 10.0).collect();
        let residual = jacobi_formula_check(phi, &samples).unwrap();
        prop_assert!(residual <= 1e-6, "residual {residual}");
    }
}

proptest! {
    #![proptest_config(config(50))]

    #[test]
    fn matrix_optimization(b in spd(3, 0.3)) {
        let rep = matrix_opt_value(&b, None).unwrap();
        let expect = b.clone().lu().determinant().sqrt();
        prop_assert!((rep.inf_value - expect).abs() <= 1e-12 * expect);
        prop_assert!((rep.numeric_value - expect).abs() <= 1e-6 * expect.max(1.0), "{} vs {expect}", rep.numeric_value);
    }
}

#[test]
fn eigenvector_direction_has_rank_deficient_tilde() {
    let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 5.0]));
    let eta = DVector::from_vec(vec![1.0, 0.0, 0.0]);
    let rep = tilde_matrix_and_subdet(&a, &eta).unwrap();
    let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 2.0, 5.0]));
    assert!((rep.tilde - expect).norm() < 1e-14);
    assert!(rep.residual < 1e-12);
}

#[test]
fn partial_gaussian_examples() {
    let id = DMatrix::identity(2, 2);
    let e1 = DVector::from_vec(vec![1.0, 0.0]);
    let (closed, _) = partial_gaussian(&id, &e1, &DVector::zeros(2)).unwrap();
    assert!((closed - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-14);
    let d = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]));
    let (closed, quad) = partial_gaussian(&d, &e1, &DVector::from_vec(vec![0.0, 1.0])).unwrap();
    // Σ̃⁻¹[z⊥] = 1 enters as e^{−1/2}.
    assert!((closed - std::f64::consts::PI.sqrt() * (-0.5f64).exp()).abs() < 1e-12);
    assert!((closed - quad).abs() < 1e-9);
    assert!(partial_gaussian(&d, &e1, &DVector::from_vec(vec![1.0, 1.0])).is_err());
}

#[test]
fn matrix_optimization_examples() {
    let rep = matrix_opt_value(&DMatrix::identity(2, 2), None).unwrap();
    assert!((rep.inf_value - 1.0).abs() < 1e-15);
    let b = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.5]));
    let rep = matrix_opt_value(&b, None).unwrap();
    assert!((rep.numeric_value - 1.0).abs() < 1e-6);
}

#[test]
fn jacobi_examples() {
    let r = jacobi_formula_check(|t| DMatrix::identity(2, 2) * t.exp(), &[0.0, 0.5, 1.0]).unwrap();
    assert!(r < 1e-8);
    let err = jacobi_formula_check(|t| DMatrix::identity(2, 2) * t, &[0.5, 0.0]);
    assert!(matches!(err, Err(metastab::Error::Singular(1))));
}
