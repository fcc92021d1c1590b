//! Independent reference implementations and fixtures shared by the
//! integration tests. Nothing here calls into the solvers under test.

#![allow(dead_code)]

use kscdl::shape::ShapePoint;
use kscdl::{LandmarkConfiguration, PreShape};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller keeps the fixtures independent of rand_distr.
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| gaussian(rng))
}

pub fn random_config(rng: &mut ChaCha8Rng, n: usize, m: usize) -> LandmarkConfiguration {
    LandmarkConfiguration::new(gaussian_matrix(rng, n, m)).unwrap()
}

pub fn random_shape(rng: &mut ChaCha8Rng, n: usize, m: usize) -> ShapePoint {
    ShapePoint::from_configuration(&random_config(rng, n, m)).unwrap()
}

/// Shape at geodesic distance about `radius` from `base`, built without the
/// library exp map: a great-circle step along a horizontal direction.
pub fn nearby_shape(rng: &mut ChaCha8Rng, base: &ShapePoint, radius: f64) -> ShapePoint {
    let z = base.coords();
    let (r, c) = z.shape();
    let v = gaussian_matrix(rng, r, c);
    let v = horizontal(z, &v);
    let v = &v * (radius / v.norm());
    let t = v.norm();
    let p = z * t.cos() + &v * (t.sin() / t);
    ShapePoint::new(PreShape::from_unit(&p / p.norm()).unwrap())
}

/// Projection onto the horizontal space at pre-shape `z` (orthogonal to `z`
/// and to every `z A` with `A` skew), by least squares on the vertical basis.
pub fn horizontal(z: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let m = z.ncols();
    let mut basis: Vec<DMatrix<f64>> = vec![z.clone()];
    for a in 0..m {
        for b in (a + 1)..m {
            let mut skew = DMatrix::zeros(m, m);
            skew[(a, b)] = 1.0;
            skew[(b, a)] = -1.0;
            basis.push(z * skew);
        }
    }
    let k = basis.len();
    let g = DMatrix::from_fn(k, k, |i, j| basis[i].dot(&basis[j]));
    let rhs = DVector::from_fn(k, |i, _| basis[i].dot(v));
    let coef = g.pseudo_inverse(1e-12).unwrap() * rhs;
    let mut out = v.clone();
    for (i, b) in basis.iter().enumerate() {
        out -= b * coef[i];
    }
    out
}

/// Planar geodesic distance from the complex closed form `acos |z1^* z2|`.
pub fn planar_distance(a: &ShapePoint, b: &ShapePoint) -> f64 {
    let (z1, z2) = (a.coords(), b.coords());
    assert_eq!(z1.ncols(), 2);
    let mut re = 0.0;
    let mut im = 0.0;
    for i in 0..z1.nrows() {
        let (x1, y1) = (z1[(i, 0)], z1[(i, 1)]);
        let (x2, y2) = (z2[(i, 0)], z2[(i, 1)]);
        re += x1 * x2 + y1 * y2;
        im += x1 * y2 - y1 * x2;
    }
    (re * re + im * im).sqrt().min(1.0).acos()
}

/// Objective `c - 2 b^T w + w^T G w + lambda |w|_1`.
pub fn quadratic_objective(g: &DMatrix<f64>, b: &DVector<f64>, c: f64, lambda: f64, w: &DVector<f64>) -> f64 {
    c - 2.0 * b.dot(w) + (w.transpose() * g * w)[(0, 0)] + lambda * w.abs().sum()
}

/// Exhaustive minimum of the coding objective: for every sign pattern in
/// `{-1, 0, 1}^N` solve the stationarity system restricted to the support with
/// that sign vector, then evaluate the true objective. Every candidate is
/// feasible, and some optimum is the minimum-norm candidate of its own sign
/// pattern (one with linearly independent support columns).
pub fn enumerate_coding(g: &DMatrix<f64>, b: &DVector<f64>, c: f64, lambda: f64, affine: bool) -> (f64, DVector<f64>) {
    let n = b.len();
    let mut best = (f64::INFINITY, DVector::zeros(n));
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut signs = vec![0i32; n];
        let mut rest = code;
        for s in signs.iter_mut() {
            *s = (rest % 3) as i32 - 1;
            rest /= 3;
        }
        let support: Vec<usize> = (0..n).filter(|&i| signs[i] != 0).collect();
        let k = support.len();
        let mut w = DVector::zeros(n);
        if k == 0 {
            if affine {
                continue;
            }
        } else {
            let dim = if affine { k + 1 } else { k };
            let mut a = DMatrix::zeros(dim, dim);
            let mut rhs = DVector::zeros(dim);
            for (p, &i) in support.iter().enumerate() {
                for (q, &j) in support.iter().enumerate() {
                    a[(p, q)] = 2.0 * g[(i, j)];
                }
                rhs[p] = 2.0 * b[i] - lambda * signs[i] as f64;
                if affine {
                    a[(p, k)] = -1.0;
                    a[(k, p)] = 1.0;
                }
            }
            if affine {
                rhs[k] = 1.0;
            }
            let eps = 1e-12 * a.amax().max(1e-300);
            let sol = a.clone().svd(true, true).solve(&rhs, eps).unwrap();
            // Inconsistent systems have no restricted minimizer.
            if (&a * &sol - &rhs).norm() > 1e-9 * rhs.norm().max(1.0) {
                continue;
            }
            for (p, &i) in support.iter().enumerate() {
                w[i] = sol[p];
            }
            if affine && (w.sum() - 1.0).abs() > 1e-9 {
                continue;
            }
        }
        let f = quadratic_objective(g, b, c, lambda, &w);
        if f < best.0 {
            best = (f, w);
        }
    }
    best
}

/// Random coding problem: `G = A^T A`, `b = A^T x`, `c = |x|^2` with
/// `A` a `d x n` Gaussian matrix.
pub fn random_coding_problem(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (DMatrix<f64>, DVector<f64>, f64) {
    let a = gaussian_matrix(rng, d, n);
    let x = DVector::from_fn(d, |_, _| gaussian(rng));
    let g = a.transpose() * &a;
    let b = a.transpose() * &x;
    (g, b, x.norm_squared())
}

fn row_distance(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    let mut s = 0.0;
    for c in 0..a.ncols() {
        let d = a[(i, c)] - b[(j, c)];
        s += d * d;
    }
    s.sqrt()
}

/// Every monotone, boundary-anchored warping path between `n` and `m` rows.
pub fn all_warping_paths(n: usize, m: usize) -> Vec<Vec<(usize, usize)>> {
    fn rec(n: usize, m: usize, path: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        let (i, j) = *path.last().unwrap();
        if i + 1 == n && j + 1 == m {
            out.push(path.clone());
            return;
        }
        for (di, dj) in [(1, 1), (1, 0), (0, 1)] {
            if i + di < n && j + dj < m {
                path.push((i + di, j + dj));
                rec(n, m, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(n, m, &mut vec![(0, 0)], &mut out);
    out
}

/// Minimal DTW cost over every warping path, each summed from its start.
pub fn brute_force_dtw(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    all_warping_paths(a.nrows(), b.nrows())
        .iter()
        .map(|p| path_cost(a, b, p))
        .fold(f64::INFINITY, f64::min)
}

/// Cost of an explicit warping path.
pub fn path_cost(a: &DMatrix<f64>, b: &DMatrix<f64>, path: &[(usize, usize)]) -> f64 {
    path.iter().fold(0.0, |acc, &(i, j)| acc + row_distance(a, i, b, j))
}

/// Hinge-loss SVM with bias (`0.5 |[w; b]|^2 + C sum hinge`) by averaged
/// subgradient descent; returns the best primal value seen.
pub fn subgradient_svm(x: &[DVector<f64>], y: &[f64], c: f64, iters: usize) -> f64 {
    let d = x[0].len();
    let mut w = DVector::zeros(d + 1);
    let aug: Vec<DVector<f64>> = x
        .iter()
        .map(|xi| {
            let mut v = DVector::zeros(d + 1);
            v.rows_mut(0, d).copy_from(xi);
            v[d] = 1.0;
            v
        })
        .collect();
    let primal = |w: &DVector<f64>| {
        0.5 * w.norm_squared()
            + c * aug.iter().zip(y).map(|(xi, yi)| (1.0 - yi * w.dot(xi)).max(0.0)).sum::<f64>()
    };
    let mut best = primal(&w);
    for t in 1..=iters {
        let mut grad = w.clone();
        for (xi, yi) in aug.iter().zip(y) {
            if yi * w.dot(xi) < 1.0 {
                grad -= xi * (c * yi);
            }
        }
        let step = 1.0 / (t as f64 + 10.0);
        w -= grad * step;
        best = best.min(primal(&w));
    }
    best
}

/// Central finite-difference derivative of `f` at `t = 0`.
pub fn fd_derivative(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (f(h) - f(-h)) / (2.0 * h)
}

/// Naive DFT magnitude of `x` (zero-padded to `len`) at frequency `k`.
pub fn dft_magnitude(x: &[f64], len: usize, k: usize) -> f64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for (t, v) in x.iter().enumerate() {
        let ang = -2.0 * std::f64::consts::PI * (k * t) as f64 / len as f64;
        re += v * ang.cos();
        im += v * ang.sin();
    }
    (re * re + im * im).sqrt()
}
