//! Intrinsic sparse coding: each query is coded on the tangent space at
//! itself, codes are affine, and atoms are learned by Riemannian descent.

use kscdl::intrinsic::{code_shape, learn_dictionary, reconstruct, Dictionary};
use kscdl::shape::{exp_map, geodesic_distance, project_horizontal, PreShape, TangentVector};
use kscdl::ShapePoint;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut *rng))
}

fn near(rng: &mut ChaCha8Rng, base: &ShapePoint, radius: f64) -> kscdl::Result<ShapePoint> {
    let (r, c) = base.coords().shape();
    let v = project_horizontal(base, &gaussian(rng, r, c));
    let v = &v * (radius / v.norm());
    Ok(exp_map(&TangentVector::new(base.clone(), v)?))
}

fn main() -> kscdl::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let base = ShapePoint::new(PreShape::from_centered(gaussian(&mut rng, 7, 3))?);
    let atoms: Vec<ShapePoint> = (0..6).map(|_| near(&mut rng, &base, 0.3)).collect::<kscdl::Result<_>>()?;
    let dict = Dictionary::new(atoms.clone(), Some("demo".into()), 0.01)?;

    let code = code_shape(&atoms[2], &dict, 0.01)?;
    println!("atom 2 coded by itself: objective {:.4}, weights {:.3?}", code.objective, code.weights.as_slice());

    let query = near(&mut rng, &base, 0.1)?;
    for lambda in [1e-4, 0.01, 0.1] {
        let code = code_shape(&query, &dict, lambda)?;
        let back = reconstruct(&dict, &code.weights)?;
        let nonzero = code.weights.iter().filter(|w| w.abs() > 1e-9).count();
        println!(
            "lambda {lambda:<6} objective {:.5}  nonzero {nonzero}  sum {:.6}  reconstruction error {:.4}",
            code.objective,
            code.weights.sum(),
            geodesic_distance(&back, &query)
        );
    }

    let training: Vec<ShapePoint> = (0..40).map(|_| near(&mut rng, &base, 0.35)).collect::<kscdl::Result<_>>()?;
    let init = Dictionary::new(training[..4].to_vec(), None, 0.01)?;
    let res = learn_dictionary(&training, &init, 0.01, 10)?;
    let trace: Vec<String> = res.objective_trace.iter().map(|v| format!("{v:.4}")).collect();
    println!("learning objective: {}", trace.join(" "));
    println!("frozen atom updates: {}", res.frozen_updates);
    Ok(())
}
