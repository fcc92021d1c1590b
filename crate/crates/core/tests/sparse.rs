mod common;

use common::*;
use kscdl::sparse::*;
use kscdl::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn solve(g: &DMatrix<f64>, b: &DVector<f64>, c: f64, lambda: f64, affine: bool) -> SparseCode {
    let p = QuadraticCodingProblem::new(g.clone(), b.clone(), c, lambda, affine).unwrap();
    solve_coding(&p, &SolverOptions::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_exhaustive_support_enumeration(seed in any::<u64>(), n in 1usize..=5, extra in 0usize..4,
                                              lambda in prop::sample::select(vec![0.0, 0.01, 0.1, 1.0]),
                                              affine in any::<bool>()) {
        let mut r = rng(seed);
        let (g, b, c) = random_coding_problem(&mut r, n, n + extra);
        let (want, _) = enumerate_coding(&g, &b, c, lambda, affine);
        let got = solve(&g, &b, c, lambda, affine);
        prop_assert!((got.objective - want).abs() <= 1e-6 * want.abs().max(1.0),
                     "solver {} oracle {}", got.objective, want);
        prop_assert!(got.kkt_residual <= 1e-6);
        if affine {
            prop_assert!((got.weights.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rank_deficient_problems_reach_the_oracle_value(seed in any::<u64>(), n in 3usize..=5,
                                                       lambda in 0.001f64..0.5, affine in any::<bool>()) {
        let mut r = rng(seed);
        let (g, b, c) = random_coding_problem(&mut r, n, 2);
        let (want, _) = enumerate_coding(&g, &b, c, lambda, affine);
        let got = solve(&g, &b, c, lambda, affine);
        prop_assert!(got.objective <= want + 1e-6 * want.abs().max(1.0), "solver {} kkt {} oracle {} w {}", got.objective, got.kkt_residual, want, got.weights);
    }

    #[test]
    fn objective_is_never_below_the_reported_minimum(seed in any::<u64>(), lambda in 0.0f64..0.3) {
        let mut r = rng(seed);
        let (g, b, c) = random_coding_problem(&mut r, 4, 6);
        let p = QuadraticCodingProblem::new(g, b, c, lambda, true).unwrap();
        let code = solve_coding(&p, &SolverOptions::default()).unwrap();
        for _ in 0..50 {
            let mut w = DVector::from_fn(4, |_, _| gaussian(&mut r));
            let s = w.sum();
            w.add_scalar_mut((1.0 - s) / 4.0);
            prop_assert!(p.objective(&w) >= code.objective - 1e-9);
        }
    }
}

#[test]
fn large_lambda_gives_the_zero_code() {
    let mut r = rng(20);
    let (g, b, c) = random_coding_problem(&mut r, 5, 8);
    let lambda = 2.0 * b.amax() + 1.0;
    let code = solve(&g, &b, c, lambda, false);
    assert_eq!(code.weights.amax(), 0.0);
    assert!((code.objective - c).abs() < 1e-12);
}

#[test]
fn exact_atom_is_recovered_with_affine_constraint() {
    // Query equal to atom 2: w = e_2 reaches objective lambda.
    let mut r = rng(21);
    let a = gaussian_matrix(&mut r, 10, 5);
    let x = a.column(2).into_owned();
    let g = a.transpose() * &a;
    let b = a.transpose() * &x;
    let code = solve(&g, &b, x.norm_squared(), 0.01, true);
    assert!(code.objective <= 0.01 + 1e-8);
    assert!((code.weights[2] - 1.0).abs() < 1e-6);
}

#[test]
fn invalid_problems_are_rejected() {
    let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    let p = QuadraticCodingProblem::new(g, DVector::zeros(2), 0.0, 0.1, false).unwrap();
    assert!(matches!(solve_coding(&p, &SolverOptions::default()), Err(Error::InvalidProblem(_))));
    assert!(QuadraticCodingProblem::new(DMatrix::identity(2, 2), DVector::zeros(3), 0.0, 0.1, false).is_err());
    assert!(QuadraticCodingProblem::new(DMatrix::identity(2, 2), DVector::zeros(2), 0.0, -0.1, false).is_err());
    let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
    assert!(QuadraticCodingProblem::new(asym, DVector::zeros(2), 0.0, 0.1, false).is_err());
}

#[test]
fn kkt_residual_is_zero_at_the_oracle_minimizer() {
    let mut r = rng(22);
    for affine in [false, true] {
        let (g, b, c) = random_coding_problem(&mut r, 4, 7);
        let (_, w) = enumerate_coding(&g, &b, c, 0.1, affine);
        let p = QuadraticCodingProblem::new(g, b, c, 0.1, affine).unwrap();
        assert!(p.kkt_residual(&w) < 1e-8);
    }
}

#[test]
fn euclidean_learning_decreases_the_objective() {
    let mut r = rng(23);
    let basis = gaussian_matrix(&mut r, 12, 3);
    let samples: Vec<DVector<f64>> = (0..40)
        .map(|_| &basis * DVector::from_fn(3, |_, _| gaussian(&mut r)) + DVector::from_fn(12, |_, _| 0.01 * gaussian(&mut r)))
        .collect();
    let res = learn_dictionary_euclidean(&samples, 3, 0.05, 15, &SolverOptions::default()).unwrap();
    for pair in res.objective_trace.windows(2) {
        assert!(pair[1] <= pair[0] * (1.0 + 1e-9) + 1e-9, "{:?}", res.objective_trace);
    }
    for j in 0..3 {
        assert!(res.dictionary.atoms.column(j).norm() <= 1.0 + 1e-12);
    }
    assert!(learn_dictionary_euclidean(&samples, 41, 0.05, 1, &SolverOptions::default()).is_err());
}
