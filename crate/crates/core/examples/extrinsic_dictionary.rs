//! Extrinsic (kernel) sparse coding: atoms live in the RKHS of the Procrustes
//! Gaussian kernel as combinations of training shapes.

use kscdl::extrinsic::{code_shape_kernel, kernel_objective, learn_dictionary_kernel, KernelDictionary};
use kscdl::shape::PreShape;
use kscdl::ShapePoint;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> kscdl::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut shape = || -> kscdl::Result<ShapePoint> {
        let z = DMatrix::from_fn(5, 2, |_, _| StandardNormal.sample(&mut rng));
        Ok(ShapePoint::new(PreShape::from_centered(z)?))
    };
    let anchors: Vec<ShapePoint> = (0..5).map(|_| shape()).collect::<kscdl::Result<_>>()?;
    let query = shape()?;

    let dict = KernelDictionary::from_anchors(anchors.clone(), 0.5, None)?;
    let code = code_shape_kernel(&anchors[3], &dict, 0.01)?;
    println!("anchor 3: objective {:.5}, weights {:.3?}", code.objective, code.weights.as_slice());
    let code = code_shape_kernel(&query, &dict, 0.01)?;
    println!(
        "query: objective {:.5} (direct kernel evaluation {:.5})",
        code.objective,
        kernel_objective(&query, &dict, &code.weights, 0.01)?
    );

    let training: Vec<ShapePoint> = (0..30).map(|_| shape()).collect::<kscdl::Result<_>>()?;
    let res = learn_dictionary_kernel(&training, 6, 0.01, 0.5, 8)?;
    let trace: Vec<String> = res.objective_trace.iter().map(|v| format!("{v:.4}")).collect();
    println!("RKHS reconstruction error: {}", trace.join(" "));
    println!(
        "kept iterate {}, coefficient matrix {}x{}",
        res.best_iteration,
        res.dictionary.coefficients().nrows(),
        res.dictionary.coefficients().ncols()
    );
    Ok(())
}
