//! l1-regularized quadratic coding, with and without the affine constraint,
//! and the Euclidean dictionary-learning baseline.

use kscdl::sparse::{learn_dictionary_euclidean, solve_coding, QuadraticCodingProblem, SolverOptions};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> kscdl::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };

    // min ||x - A w||^2 + lambda |w|_1 written as w'Gw - 2b'w + c.
    let a = DMatrix::from_fn(20, 6, |_, _| normal());
    let x = a.column(1) * 0.7 + a.column(4) * 0.3;
    let g = a.transpose() * &a;
    let b = a.transpose() * &x;
    let c = x.norm_squared();
    let opts = SolverOptions::default();
    for affine in [false, true] {
        for lambda in [0.0, 0.1, 1.0] {
            let p = QuadraticCodingProblem::new(g.clone(), b.clone(), c, lambda, affine)?;
            let code = solve_coding(&p, &opts)?;
            let w: Vec<String> = code.weights.iter().map(|v| format!("{v:6.3}")).collect();
            println!(
                "affine {affine:<5} lambda {lambda:<4} objective {:9.5} kkt {:.1e}  w = [{}]",
                code.objective,
                code.kkt_residual,
                w.join(" ")
            );
        }
    }

    let basis = DMatrix::from_fn(12, 3, |_, _| normal());
    let samples: Vec<DVector<f64>> = (0..50)
        .map(|_| &basis * DVector::from_fn(3, |_, _| normal()) + DVector::from_fn(12, |_, _| 0.01 * normal()))
        .collect();
    let res = learn_dictionary_euclidean(&samples, 3, 0.05, 10, &opts)?;
    let trace: Vec<String> = res.objective_trace.iter().map(|v| format!("{v:.3}")).collect();
    println!("Euclidean dictionary objective: {}", trace.join(" "));
    Ok(())
}
