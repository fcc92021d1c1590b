//! Kendall shape space basics on planar landmark configurations: similarity
//! invariance, geodesic distance, log/exp maps and weighted Karcher means.

use kscdl::shape::{
    exp_map, full_procrustes_distance, geodesic_distance, geodesic_point, log_map, weighted_karcher_mean_with,
    KarcherOptions,
};
use kscdl::{LandmarkConfiguration, ShapePoint};
use nalgebra::DMatrix;

fn config(points: &[[f64; 2]]) -> kscdl::Result<LandmarkConfiguration> {
    let flat: Vec<f64> = points.iter().flatten().copied().collect();
    LandmarkConfiguration::from_row_slice(points.len(), 2, &flat)
}

fn main() -> kscdl::Result<()> {
    let square = config(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])?;
    let trapezoid = config(&[[0.0, 0.0], [2.0, 0.0], [1.4, 0.9], [0.6, 0.9]])?;
    let kite = config(&[[0.0, 0.0], [1.0, -0.3], [1.6, 0.8], [0.2, 1.0]])?;

    // Rotate by 40 degrees, scale by 3, move far away: same shape.
    let (s, c) = 40f64.to_radians().sin_cos();
    let rot = DMatrix::from_row_slice(2, 2, &[c, s, -s, c]);
    let moved = square.similarity_transform(&rot, 3.0, &[12.0, -7.0])?;

    let a = ShapePoint::from_configuration(&square)?;
    let b = ShapePoint::from_configuration(&kite)?;
    let a2 = ShapePoint::from_configuration(&moved)?;
    println!("d(square, moved square) = {:.2e}", geodesic_distance(&a, &a2));
    println!("d(square, kite)         = {:.6}", geodesic_distance(&a, &b));
    println!("full Procrustes         = {:.6}", full_procrustes_distance(&a, &b));

    let v = log_map(&a, &b)?;
    println!("|log_square(kite)|      = {:.6}", v.norm());
    let back = exp_map(&v);
    println!("exp(log) error          = {:.2e}", geodesic_distance(&back, &b));

    let mid = geodesic_point(&a, &b, 0.5)?;
    println!(
        "midpoint distances      = {:.6} / {:.6}",
        geodesic_distance(&a, &mid),
        geodesic_distance(&mid, &b)
    );

    let shapes = [a.clone(), b.clone(), ShapePoint::from_configuration(&trapezoid)?];
    let mean = weighted_karcher_mean_with(&shapes, &[0.5, 0.3, 0.2], KarcherOptions::default())?;
    println!(
        "Karcher mean: {} iterations, gradient {:.1e}, cost {:.6} -> {:.6}",
        mean.iterations,
        mean.gradient_norm,
        mean.costs[0],
        mean.costs[mean.costs.len() - 1]
    );
    // Affine combinations may use negative weights (extrapolation).
    let beyond = weighted_karcher_mean_with(&[a.clone(), b.clone()], &[-0.25, 1.25], KarcherOptions::default())?;
    println!("extrapolated past kite by {:.6}", geodesic_distance(&beyond.mean, &b));
    Ok(())
}
