//! Dictionary initialization: kernel k-means over the Procrustes Gaussian
//! Gram matrix picks the number of clusters, and principal geodesic analysis
//! of each cluster supplies the initial atoms.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::intrinsic::{Dictionary, DISTINCT_ATOMS};
use crate::kernel::{gram_matrix, psd_check_relative};
use crate::shape::{exp_raw, geodesic_distance, log_map, weighted_karcher_mean, ShapePoint};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterOptions {
    pub seed: u64,
    /// k-means restarts per candidate k; the lowest-cost run is kept.
    pub restarts: usize,
    pub max_k: usize,
    /// Below this mean silhouette the data is treated as a single cluster.
    pub min_silhouette: f64,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            restarts: 10,
            max_k: 10,
            min_silhouette: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub k: usize,
    /// Mean silhouette of the chosen clustering (0 when `k = 1`).
    pub silhouette: f64,
}

impl ClusterAssignment {
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == cluster).collect()
    }
}

/// Squared feature-space distance `K_ii + K_jj - 2 K_ij`.
fn kernel_dist2(k: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    (k[(i, i)] + k[(j, j)] - 2.0 * k[(i, j)]).max(0.0)
}

/// Squared distances of every point to every cluster centroid in feature space.
fn centroid_dist2(k: &DMatrix<f64>, labels: &[usize], n_clusters: usize) -> DMatrix<f64> {
    let n = labels.len();
    let mut size = vec![0usize; n_clusters];
    for &l in labels {
        size[l] += 1;
    }
    // sum_{j in c} K_ij and sum_{j,l in c} K_jl
    let mut cross = DMatrix::<f64>::zeros(n, n_clusters);
    for i in 0..n {
        for j in 0..n {
            cross[(i, labels[j])] += k[(i, j)];
        }
    }
    let mut within = vec![0.0f64; n_clusters];
    for j in 0..n {
        within[labels[j]] += cross[(j, labels[j])];
    }
    DMatrix::from_fn(n, n_clusters, |i, c| {
        if size[c] == 0 {
            return f64::INFINITY;
        }
        let s = size[c] as f64;
        (k[(i, i)] - 2.0 * cross[(i, c)] / s + within[c] / (s * s)).max(0.0)
    })
}

/// Kernel k-means with k-means++ seeding; returns labels and the within-cluster cost.
pub fn kernel_kmeans(k: &DMatrix<f64>, n_clusters: usize, seed: u64, restarts: usize) -> Result<(Vec<usize>, f64)> {
    let n = k.nrows();
    if n_clusters == 0 || n_clusters > n {
        return Err(Error::InvalidInput(format!("cannot form {n_clusters} clusters from {n} points")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..restarts.max(1) {
        // k-means++ over feature-space distances to chosen centers.
        let mut centers = vec![rng.random_range(0..n)];
        let mut d2: Vec<f64> = (0..n).map(|i| kernel_dist2(k, i, centers[0])).collect();
        while centers.len() < n_clusters {
            let total: f64 = d2.iter().sum();
            let next = if total <= 0.0 {
                (0..n).find(|i| !centers.contains(i)).unwrap_or(0)
            } else {
                let mut t = rng.random::<f64>() * total;
                let mut pick = n - 1;
                for (i, d) in d2.iter().enumerate() {
                    if t < *d {
                        pick = i;
                        break;
                    }
                    t -= d;
                }
                pick
            };
            centers.push(next);
            for (i, d) in d2.iter_mut().enumerate() {
                *d = d.min(kernel_dist2(k, i, next));
            }
        }
        let mut labels: Vec<usize> = (0..n)
            .map(|i| {
                (0..n_clusters)
                    .min_by(|&a, &b| kernel_dist2(k, i, centers[a]).total_cmp(&kernel_dist2(k, i, centers[b])))
                    .unwrap()
            })
            .collect();

        let mut cost = f64::INFINITY;
        for _ in 0..100 {
            let dist = centroid_dist2(k, &labels, n_clusters);
            let mut next: Vec<usize> = (0..n)
                .map(|i| {
                    (0..n_clusters)
                        .min_by(|&a, &b| dist[(i, a)].total_cmp(&dist[(i, b)]))
                        .unwrap()
                })
                .collect();
            // Refill empty clusters with the point farthest from its centroid.
            for c in 0..n_clusters {
                if !next.contains(&c) {
                    let far = (0..n)
                        .max_by(|&a, &b| dist[(a, next[a])].total_cmp(&dist[(b, next[b])]))
                        .unwrap();
                    next[far] = c;
                }
            }
            let new_cost: f64 = {
                let d = centroid_dist2(k, &next, n_clusters);
                (0..n).map(|i| d[(i, next[i])]).sum()
            };
            let changed = next != labels;
            labels = next;
            cost = new_cost;
            if !changed {
                break;
            }
        }
        if best.as_ref().is_none_or(|b| cost < b.1 - 1e-12) {
            best = Some((labels, cost));
        }
    }
    Ok(best.unwrap())
}

/// Mean silhouette under the kernel-induced distance.
pub fn silhouette(k: &DMatrix<f64>, labels: &[usize], n_clusters: usize) -> f64 {
    let n = labels.len();
    if n_clusters < 2 || n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        let mut sum = vec![0.0; n_clusters];
        let mut count = vec![0usize; n_clusters];
        for j in 0..n {
            if j != i {
                sum[labels[j]] += kernel_dist2(k, i, j).sqrt();
                count[labels[j]] += 1;
            }
        }
        let own = labels[i];
        if count[own] == 0 {
            continue;
        }
        let a = sum[own] / count[own] as f64;
        let b = (0..n_clusters)
            .filter(|&c| c != own && count[c] > 0)
            .map(|c| sum[c] / count[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 && b.is_finite() {
            total += (b - a) / denom;
        }
    }
    total / n as f64
}

/// Clusters a precomputed Gram matrix, choosing k by the mean silhouette.
pub fn cluster_gram(k: &DMatrix<f64>, opts: &ClusterOptions) -> Result<ClusterAssignment> {
    let n = k.nrows();
    if n < 2 {
        return Err(Error::InvalidInput("clustering needs at least 2 shapes".into()));
    }
    let single = ClusterAssignment {
        labels: vec![0; n],
        k: 1,
        silhouette: 0.0,
    };
    let spread = (0..n)
        .flat_map(|i| (0..i).map(move |j| (i, j)))
        .map(|(i, j)| kernel_dist2(k, i, j))
        .fold(0.0, f64::max);
    if spread < 1e-18 {
        log::warn!("all shapes coincide in feature space; using a single cluster");
        return Ok(single);
    }
    let max_k = opts.max_k.min(n / 3);
    let mut best = single;
    for n_clusters in 2..=max_k {
        let (labels, _) = kernel_kmeans(k, n_clusters, opts.seed, opts.restarts)?;
        let s = silhouette(k, &labels, n_clusters);
        log::debug!("k = {n_clusters}: silhouette {s:.4}");
        if s >= opts.min_silhouette && s > best.silhouette {
            best = ClusterAssignment {
                labels,
                k: n_clusters,
                silhouette: s,
            };
        }
    }
    Ok(best)
}

pub fn cluster_shapes(shapes: &[ShapePoint], sigma: f64) -> Result<ClusterAssignment> {
    cluster_shapes_with(shapes, sigma, &ClusterOptions::default())
}

pub fn cluster_shapes_with(shapes: &[ShapePoint], sigma: f64, opts: &ClusterOptions) -> Result<ClusterAssignment> {
    if shapes.len() < 2 {
        return Err(Error::InvalidInput("clustering needs at least 2 shapes".into()));
    }
    let gram = gram_matrix(shapes, sigma)?;
    let report = psd_check_relative(&gram);
    if !report.is_psd {
        return Err(Error::NotPsd {
            min_eigenvalue: report.min_eigenvalue,
        });
    }
    cluster_gram(gram.entries(), opts)
}

/// `n` distinct indices, one per kernel k-means cluster: the member closest to
/// its cluster centroid.
pub fn representatives(k: &DMatrix<f64>, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n == k.nrows() {
        return Ok((0..n).collect());
    }
    let (labels, _) = kernel_kmeans(k, n, seed, 10)?;
    let dist = centroid_dist2(k, &labels, n);
    Ok((0..n)
        .map(|c| {
            (0..labels.len())
                .filter(|&i| labels[i] == c)
                .min_by(|&a, &b| dist[(a, c)].total_cmp(&dist[(b, c)]))
                .unwrap()
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct Pga {
    pub mean: ShapePoint,
    /// Orthonormal principal directions in the tangent space at `mean`.
    pub directions: Vec<DMatrix<f64>>,
    pub std_devs: Vec<f64>,
    /// Fraction of total tangent variance along each direction.
    pub explained: Vec<f64>,
}

/// Principal geodesic analysis: PCA of the log-mapped data at the Karcher mean.
pub fn pga(cluster: &[ShapePoint], num_components: usize) -> Result<Pga> {
    if cluster.is_empty() {
        return Err(Error::InvalidInput("PGA of an empty cluster".into()));
    }
    let n = cluster.len();
    let weights = vec![1.0 / n as f64; n];
    let mean = weighted_karcher_mean(cluster, &weights)?;
    let limit = (n - 1).min(mean.manifold_dim());
    let wanted = if num_components > limit {
        log::warn!("PGA components clipped from {num_components} to {limit}");
        limit
    } else {
        num_components
    };
    let (rows, cols) = mean.coords().shape();
    if wanted == 0 {
        return Ok(Pga {
            mean,
            directions: vec![],
            std_devs: vec![],
            explained: vec![],
        });
    }
    let mut data = DMatrix::zeros(n, rows * cols);
    for (i, s) in cluster.iter().enumerate() {
        let v = log_map(&mean, s)?;
        for (j, x) in v.coords().iter().enumerate() {
            data[(i, j)] = *x;
        }
    }
    let svd = data.svd(false, true);
    let v_t = svd.v_t.expect("svd v_t");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let total: f64 = svd.singular_values.iter().map(|s| s * s).sum();
    let mut directions = Vec::with_capacity(wanted);
    let mut std_devs = Vec::with_capacity(wanted);
    let mut explained = Vec::with_capacity(wanted);
    for &idx in order.iter().take(wanted) {
        let s = svd.singular_values[idx];
        let dir = DMatrix::from_iterator(rows, cols, v_t.row(idx).iter().copied());
        directions.push(dir);
        std_devs.push(s / (n as f64).sqrt());
        explained.push(if total > 0.0 { s * s / total } else { 0.0 });
    }
    Ok(Pga {
        mean,
        directions,
        std_devs,
        explained,
    })
}

fn push_distinct(atoms: &mut Vec<ShapePoint>, candidate: ShapePoint) {
    if atoms.iter().all(|a| geodesic_distance(a, &candidate) >= DISTINCT_ATOMS) {
        atoms.push(candidate);
    }
}

/// The Karcher mean plus `exp_mu(+-sigma_j v_j)` for each principal direction.
pub fn pga_atoms(cluster: &[ShapePoint], num_components: usize) -> Result<Vec<ShapePoint>> {
    let p = pga(cluster, num_components)?;
    let mut atoms = vec![p.mean.clone()];
    for (dir, sd) in p.directions.iter().zip(&p.std_devs) {
        for sign in [1.0, -1.0] {
            push_distinct(&mut atoms, exp_raw(p.mean.coords(), &(dir * (sign * sd))));
        }
    }
    Ok(atoms)
}

/// One dictionary per class (in sorted label order), built from PGA atoms of
/// each cluster of that class.
pub fn init_dictionary(
    shapes: &[ShapePoint],
    labels: &[String],
    sigma: f64,
    num_components: usize,
    lambda: f64,
) -> Result<Vec<Dictionary>> {
    init_dictionary_with(shapes, labels, sigma, num_components, lambda, &ClusterOptions::default())
}

pub fn init_dictionary_with(
    shapes: &[ShapePoint],
    labels: &[String],
    sigma: f64,
    num_components: usize,
    lambda: f64,
    opts: &ClusterOptions,
) -> Result<Vec<Dictionary>> {
    if shapes.len() != labels.len() {
        return Err(Error::dims(shapes.len(), labels.len()));
    }
    let mut classes: BTreeMap<&str, Vec<ShapePoint>> = BTreeMap::new();
    for (s, l) in shapes.iter().zip(labels) {
        classes.entry(l.as_str()).or_default().push(s.clone());
    }
    if classes.is_empty() {
        return Err(Error::InvalidInput("no training shapes".into()));
    }
    let classes: Vec<(&str, Vec<ShapePoint>)> = classes.into_iter().collect();
    classes
        .par_iter()
        .map(|(label, members)| {
            let clusters = if members.len() >= 2 {
                cluster_shapes_with(members, sigma, opts)?
            } else {
                ClusterAssignment {
                    labels: vec![0],
                    k: 1,
                    silhouette: 0.0,
                }
            };
            let mut atoms = Vec::new();
            for c in 0..clusters.k {
                let group: Vec<ShapePoint> = clusters.members(c).into_iter().map(|i| members[i].clone()).collect();
                for a in pga_atoms(&group, num_components)? {
                    push_distinct(&mut atoms, a);
                }
            }
            Dictionary::new(atoms, Some(label.to_string()), lambda).map_err(|e| {
                Error::InvalidDictionary(format!("class {label}: {e}"))
            })
        })
        .collect()
}

/// Flattened tangent coordinates, used by tests to compare PGA against PCA.
pub fn tangent_coordinates(base: &ShapePoint, shapes: &[ShapePoint]) -> Result<Vec<DVector<f64>>> {
    shapes
        .iter()
        .map(|s| log_map(base, s).map(|v| DVector::from_column_slice(v.coords().as_slice())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn silhouette_of_two_clean_blocks() {
        // two blocks of identical points, orthogonal in feature space
        let mut k = DMatrix::zeros(6, 6);
        for i in 0..6 {
            for j in 0..6 {
                if (i < 3) == (j < 3) {
                    k[(i, j)] = 1.0;
                }
            }
        }
        let labels = vec![0, 0, 0, 1, 1, 1];
        assert!((silhouette(&k, &labels, 2) - 1.0).abs() < 1e-12);
        let c = cluster_gram(&k, &ClusterOptions::default()).unwrap();
        assert_eq!(c.k, 2);
        assert_eq!(c.labels[0], c.labels[2]);
        assert_ne!(c.labels[0], c.labels[3]);
    }

    #[test]
    fn kmeans_is_deterministic() {
        let k = DMatrix::from_fn(9, 9, |i, j| (-((i as f64 - j as f64).powi(2)) / 8.0).exp());
        let a = kernel_kmeans(&k, 3, 7, 5).unwrap();
        let b = kernel_kmeans(&k, 3, 7, 5).unwrap();
        assert_eq!(a.0, b.0);
        assert!(kernel_kmeans(&k, 10, 7, 5).is_err());
    }

    #[test]
    fn representatives_are_distinct() {
        let k = DMatrix::from_fn(8, 8, |i, j| (-((i as f64 - j as f64).powi(2)) / 4.0).exp());
        let mut r = representatives(&k, 4, 1).unwrap();
        r.sort();
        r.dedup();
        assert_eq!(r.len(), 4);
    }
}
