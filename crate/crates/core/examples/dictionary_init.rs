//! Dictionary initialization: kernel k-means with silhouette model selection,
//! then principal geodesic analysis atoms per cluster and per class.

use kscdl::init::{cluster_shapes, init_dictionary, pga};
use kscdl::shape::{exp_map, project_horizontal, PreShape, TangentVector};
use kscdl::ShapePoint;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize, sd: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| {
        let e: f64 = StandardNormal.sample(&mut *rng);
        sd * e
    })
}

fn blob(rng: &mut ChaCha8Rng, center: &ShapePoint, count: usize) -> kscdl::Result<Vec<ShapePoint>> {
    let (r, c) = center.coords().shape();
    (0..count)
        .map(|_| {
            let v = project_horizontal(center, &gaussian(rng, r, c, 0.02));
            Ok(exp_map(&TangentVector::new(center.clone(), v)?))
        })
        .collect()
}

fn main() -> kscdl::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = ShapePoint::new(PreShape::from_centered(gaussian(&mut rng, 6, 2, 1.0))?);
    let b = ShapePoint::new(PreShape::from_centered(gaussian(&mut rng, 6, 2, 1.0))?);
    let mut shapes = blob(&mut rng, &a, 15)?;
    shapes.extend(blob(&mut rng, &b, 15)?);

    let clusters = cluster_shapes(&shapes, 0.5)?;
    println!("k = {}, silhouette {:.3}", clusters.k, clusters.silhouette);
    for c in 0..clusters.k {
        println!("  cluster {c}: {:?}", clusters.members(c));
    }

    let p = pga(&shapes[..15], 2)?;
    println!("PGA of the first blob: std devs {:.4?}, explained {:.3?}", p.std_devs, p.explained);

    let labels: Vec<String> = (0..30).map(|i| if i % 3 == 0 { "x".into() } else { "y".into() }).collect();
    let dicts = init_dictionary(&shapes, &labels, 0.5, 2, 0.01)?;
    for d in &dicts {
        println!("class {:?}: {} atoms", d.class_label(), d.atoms().len());
    }
    Ok(())
}
