//! The Procrustes Gaussian kernel: Gram matrices and positive-definiteness
//! diagnostics over the bandwidth grid, for planar and spatial shapes.

use kscdl::kernel::{gram_matrix, procrustes_gaussian, select_sigma, SIGMA_GRID};
use kscdl::shape::PreShape;
use kscdl::ShapePoint;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn random_shapes(rng: &mut ChaCha8Rng, count: usize, n: usize, m: usize) -> kscdl::Result<Vec<ShapePoint>> {
    (0..count)
        .map(|_| {
            let z = DMatrix::from_fn(n - 1, m, |_, _| StandardNormal.sample(&mut *rng));
            Ok(ShapePoint::new(PreShape::from_centered(z)?))
        })
        .collect()
}

fn main() -> kscdl::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for m in [2, 3] {
        let shapes = random_shapes(&mut rng, 60, 10, m)?;
        println!("{m}D, {} shapes", shapes.len());
        println!("  k(s0, s1) at sigma 0.5 = {:.6}", procrustes_gaussian(&shapes[0], &shapes[1], 0.5)?);
        let k = gram_matrix(&shapes, 0.5)?;
        println!("  Gram {}x{}, diagonal {}", k.len(), k.len(), k.entries()[(0, 0)]);
        let (best, reports) = select_sigma(&shapes, &SIGMA_GRID)?;
        for (sigma, r) in &reports {
            println!(
                "  sigma {sigma:<5} min eig {:>12.4e}  max eig {:>10.4}  psd {}",
                r.min_eigenvalue, r.max_eigenvalue, r.is_psd
            );
        }
        println!("  selected sigma: {best:?}");
    }
    Ok(())
}
