//! Procrustes Gaussian kernel `k(s1, s2) = exp(-d_FP(s1, s2)^2 / (2 sigma^2))`.
//!
//! On planar shapes the kernel is positive definite for every bandwidth. For
//! 3D shapes, where `d_FP = sin(theta)`, it is only positive definite for some
//! bandwidths, so Gram matrices should be checked with [`psd_check`] before
//! they are used as inner products.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::shape::{full_procrustes_distance, ShapePoint};

/// Relative PSD tolerance: eigenvalues down to `-1e-8 * lambda_max` are accepted.
pub const DEFAULT_PSD_TOL: f64 = 1e-8;

/// Bandwidths screened when a 3D bandwidth has to be validated.
pub const SIGMA_GRID: [f64; 5] = [0.05, 0.1, 0.2, 0.5, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    entries: DMatrix<f64>,
    sigma: f64,
}

impl KernelMatrix {
    /// Wraps an arbitrary symmetric matrix (used for diagnostics and tests).
    pub fn from_entries(entries: DMatrix<f64>, sigma: f64) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::InvalidInput("kernel matrix must be square".into()));
        }
        if (&entries - entries.transpose()).amax() > 1e-12 {
            return Err(Error::InvalidInput("kernel matrix must be symmetric".into()));
        }
        Ok(Self { entries, sigma })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.nrows() == 0
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "kernel bandwidth must be positive, got {sigma}"
        )));
    }
    Ok(())
}

#[inline]
fn gaussian(d: f64, sigma: f64) -> f64 {
    (-(d * d) / (2.0 * sigma * sigma)).exp()
}

pub fn procrustes_gaussian(s1: &ShapePoint, s2: &ShapePoint, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    s1.same_space(s2)?;
    Ok(gaussian(full_procrustes_distance(s1, s2), sigma))
}

pub fn gram_matrix(shapes: &[ShapePoint], sigma: f64) -> Result<KernelMatrix> {
    check_sigma(sigma)?;
    if shapes.is_empty() {
        return Err(Error::InvalidInput("Gram matrix of an empty set".into()));
    }
    for s in &shapes[1..] {
        shapes[0].same_space(s)?;
    }
    let n = shapes.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..i)
                .map(|j| gaussian(full_procrustes_distance(&shapes[i], &shapes[j]), sigma))
                .collect()
        })
        .collect();
    let mut entries = DMatrix::identity(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            entries[(i, j)] = *v;
            entries[(j, i)] = *v;
        }
    }
    Ok(KernelMatrix { entries, sigma })
}

/// Kernel values between rows of `a` and rows of `b` (an `|a| x |b|` matrix).
pub fn cross_kernel(a: &[ShapePoint], b: &[ShapePoint], sigma: f64) -> Result<DMatrix<f64>> {
    check_sigma(sigma)?;
    if let (Some(x), Some(y)) = (a.first(), b.first()) {
        x.same_space(y)?;
    }
    let rows: Vec<Vec<f64>> = a
        .par_iter()
        .map(|x| {
            b.iter()
                .map(|y| gaussian(full_procrustes_distance(x, y), sigma))
                .collect()
        })
        .collect();
    Ok(DMatrix::from_fn(a.len(), b.len(), |i, j| rows[i][j]))
}

pub fn kernel_vector(query: &ShapePoint, atoms: &[ShapePoint], sigma: f64) -> Result<DVector<f64>> {
    check_sigma(sigma)?;
    if atoms.is_empty() {
        return Err(Error::InvalidInput("kernel vector against no atoms".into()));
    }
    atoms
        .iter()
        .map(|a| procrustes_gaussian(query, a, sigma))
        .collect::<Result<Vec<_>>>()
        .map(DVector::from_vec)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdReport {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub is_psd: bool,
}

/// Smallest eigenvalue of the symmetrized matrix; `is_psd` iff it is `>= -tol`.
pub fn psd_check(k: &KernelMatrix, tol: f64) -> PsdReport {
    let (min_eigenvalue, max_eigenvalue) = eigen_range(k.entries());
    PsdReport {
        min_eigenvalue,
        max_eigenvalue,
        is_psd: min_eigenvalue >= -tol,
    }
}

/// [`psd_check`] with the default tolerance scaled by the largest eigenvalue.
pub fn psd_check_relative(k: &KernelMatrix) -> PsdReport {
    let (min_eigenvalue, max_eigenvalue) = eigen_range(k.entries());
    PsdReport {
        min_eigenvalue,
        max_eigenvalue,
        is_psd: min_eigenvalue >= -DEFAULT_PSD_TOL * max_eigenvalue.abs().max(1.0),
    }
}

pub(crate) fn eigen_range(m: &DMatrix<f64>) -> (f64, f64) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// Largest bandwidth of `grid` whose Gram matrix over `shapes` passes
/// [`psd_check_relative`], with the per-bandwidth reports.
pub fn select_sigma(shapes: &[ShapePoint], grid: &[f64]) -> Result<(Option<f64>, Vec<(f64, PsdReport)>)> {
    let mut reports = Vec::with_capacity(grid.len());
    let mut best = None;
    for &sigma in grid {
        let report = psd_check_relative(&gram_matrix(shapes, sigma)?);
        if report.is_psd {
            best = Some(best.map_or(sigma, |b: f64| b.max(sigma)));
        }
        reports.push((sigma, report));
    }
    Ok((best, reports))
}
