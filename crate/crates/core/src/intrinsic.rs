//! Intrinsic sparse coding: each query is coded on its own tangent space.
//!
//! For a query `z` and atoms `d_1..d_N` the code minimizes
//! `|sum_i w_i log_z(d_i)|^2 + lambda |w|_1` subject to `sum_i w_i = 1`, which
//! is a [`QuadraticCodingProblem`] with the tangent Gram matrix
//! `G_ij = <log_z(d_i), log_z(d_j)>` and no linear or constant term.
//!
//! Dictionaries are learned by alternating coding and Riemannian gradient
//! steps on the atoms. The gradient differentiates the log maps exactly,
//! including the dependence of the optimal alignment rotation on the atom.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::shape::{
    align, exp_raw, geodesic_distance, log_map, project_horizontal, weighted_karcher_mean, ShapePoint,
    CUT_LOCUS_MARGIN, SMALL_ANGLE,
};
use crate::sparse::{solve_coding, QuadraticCodingProblem, SolverOptions, SparseCode};

/// Atoms closer than this are considered identical.
pub const DISTINCT_ATOMS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: Vec<ShapePoint>,
    class_label: Option<String>,
    lambda: f64,
}

impl Dictionary {
    pub fn new(atoms: Vec<ShapePoint>, class_label: Option<String>, lambda: f64) -> Result<Self> {
        if atoms.len() < 2 {
            return Err(Error::InvalidDictionary(format!(
                "a dictionary needs at least 2 atoms, got {}",
                atoms.len()
            )));
        }
        for a in &atoms[1..] {
            atoms[0]
                .same_space(a)
                .map_err(|e| Error::InvalidDictionary(e.to_string()))?;
        }
        for i in 0..atoms.len() {
            for j in 0..i {
                if geodesic_distance(&atoms[i], &atoms[j]) < DISTINCT_ATOMS {
                    return Err(Error::InvalidDictionary(format!("atoms {j} and {i} coincide")));
                }
            }
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidDictionary(format!("invalid lambda {lambda}")));
        }
        Ok(Self {
            atoms,
            class_label,
            lambda,
        })
    }

    pub fn atoms(&self) -> &[ShapePoint] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn class_label(&self) -> Option<&str> {
        self.class_label.as_deref()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `(n, m)` of the landmark configurations behind the atoms.
    pub fn landmark_shape(&self) -> (usize, usize) {
        (self.atoms[0].num_landmarks(), self.atoms[0].dim())
    }
}

/// Log maps of all atoms at `query`, flattened in ambient coordinates.
fn tangent_logs(query: &ShapePoint, atoms: &[ShapePoint]) -> Result<Vec<DMatrix<f64>>> {
    atoms
        .iter()
        .map(|a| log_map(query, a).map(|v| v.into_coords()))
        .collect()
}

fn gram_of(logs: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n = logs.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = logs[i].dot(&logs[j]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// The affine-constrained quadratic problem solved by [`code_shape`].
pub fn tangent_problem(query: &ShapePoint, dict: &Dictionary, lambda: f64) -> Result<QuadraticCodingProblem> {
    dict.atoms[0].same_space(query)?;
    let logs = tangent_logs(query, &dict.atoms)?;
    let n = logs.len();
    QuadraticCodingProblem::new(gram_of(&logs), DVector::zeros(n), 0.0, lambda, true)
}

pub fn code_shape(query: &ShapePoint, dict: &Dictionary, lambda: f64) -> Result<SparseCode> {
    code_shape_with(query, dict, lambda, &SolverOptions::default())
}

pub fn code_shape_with(
    query: &ShapePoint,
    dict: &Dictionary,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<SparseCode> {
    solve_coding(&tangent_problem(query, dict, lambda)?, opts)
}

/// `|sum_i w_i log_query(d_i)|^2 + lambda |w|_1` (the affine constraint is not checked).
pub fn coding_objective(query: &ShapePoint, dict: &Dictionary, weights: &DVector<f64>, lambda: f64) -> Result<f64> {
    if weights.len() != dict.len() {
        return Err(Error::dims(dict.len(), weights.len()));
    }
    dict.atoms[0].same_space(query)?;
    let (k, m) = query.coords().shape();
    let mut r = DMatrix::zeros(k, m);
    for (a, w) in dict.atoms.iter().zip(weights.iter()) {
        if *w != 0.0 {
            r += log_map(query, a)?.coords() * *w;
        }
    }
    Ok(r.norm_squared() + lambda * weights.lp_norm(1))
}

/// Weighted Karcher mean of the atoms; weights must sum to 1 within 1e-6.
pub fn reconstruct(dict: &Dictionary, weights: &DVector<f64>) -> Result<ShapePoint> {
    if weights.len() != dict.len() {
        return Err(Error::dims(dict.len(), weights.len()));
    }
    let total = weights.sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidInput(format!("code weights sum to {total}, expected 1")));
    }
    let w: Vec<f64> = weights.iter().map(|x| x / total).collect();
    weighted_karcher_mean(&dict.atoms, &w)
}

/// Per-sample reconstruction error plus penalty under fixed codes.
fn sample_objective(logs: &[DMatrix<f64>], w: &DVector<f64>, lambda: f64) -> f64 {
    let (k, m) = logs[0].shape();
    let mut r = DMatrix::zeros(k, m);
    for (l, wi) in logs.iter().zip(w.iter()) {
        if *wi != 0.0 {
            r += l * *wi;
        }
    }
    r.norm_squared() + lambda * w.lp_norm(1)
}

/// Total learning objective `sum_i |sum_j w_ij log_{y_i}(d_j)|^2 + lambda |w_i|_1`.
pub fn dictionary_objective(
    training: &[ShapePoint],
    atoms: &[ShapePoint],
    codes: &[DVector<f64>],
    lambda: f64,
) -> Result<f64> {
    if codes.len() != training.len() {
        return Err(Error::dims(training.len(), codes.len()));
    }
    training
        .iter()
        .zip(codes)
        .map(|(y, w)| {
            if w.len() != atoms.len() {
                return Err(Error::dims(atoms.len(), w.len()));
            }
            Ok(sample_objective(&tangent_logs(y, atoms)?, w, lambda))
        })
        .sum()
}

/// `(sin t - t cos t) / sin^3 t`, the derivative of `t / sin t` divided by `sin t`.
fn log_scale_derivative(theta: f64) -> f64 {
    if theta < 1e-3 {
        1.0 / 3.0 + 2.0 * theta * theta / 15.0
    } else {
        let s = theta.sin();
        (s - theta * theta.cos()) / (s * s * s)
    }
}

/// Euclidean gradient of `<r, log_y(d)>` with respect to the atom pre-shape `d`,
/// where `r` is a tangent vector at `y`.
fn log_pullback(y: &DMatrix<f64>, d: &DMatrix<f64>, r: &DMatrix<f64>) -> DMatrix<f64> {
    let al = align(y, d);
    let theta = al.theta;
    let a = &al.aligned;
    let (g, dg) = if theta < SMALL_ANGLE {
        (1.0, 1.0 / 3.0)
    } else {
        (theta / theta.sin(), log_scale_derivative(theta))
    };
    let radial = a - y * al.cos_theta;
    // d<r, log> = <e, da> with a = d O
    let e = r * g - y * (dg * r.dot(&radial));

    // O keeps a^T y symmetric; its variation solves Omega S + S Omega = Q - Q^T.
    let s = a.transpose() * y;
    let s = (&s + s.transpose()) * 0.5;
    let eig = s.clone().symmetric_eigen();
    let x = a.transpose() * &e;
    let skew = (&x - x.transpose()) * 0.5;
    let skew_t = eig.eigenvectors.transpose() * &skew * &eig.eigenvectors;
    let m = s.nrows();
    let scale = eig.eigenvalues.amax().max(1e-300);
    let b_t = DMatrix::from_fn(m, m, |i, j| {
        let denom = eig.eigenvalues[i] + eig.eigenvalues[j];
        if denom.abs() > 1e-12 * scale {
            skew_t[(i, j)] / denom
        } else {
            0.0
        }
    });
    let b = &eig.eigenvectors * b_t * eig.eigenvectors.transpose();
    (e + y * b.transpose() * 2.0) * al.rotation.transpose()
}

/// Riemannian gradient of [`dictionary_objective`] with respect to atom `j`,
/// a horizontal tangent vector at that atom's representative.
pub fn atom_gradient(
    training: &[ShapePoint],
    atoms: &[ShapePoint],
    codes: &[DVector<f64>],
    j: usize,
) -> Result<DMatrix<f64>> {
    if j >= atoms.len() {
        return Err(Error::InvalidInput(format!("atom index {j} out of range")));
    }
    let d = atoms[j].coords();
    let mut grad = DMatrix::zeros(d.nrows(), d.ncols());
    for (y, w) in training.iter().zip(codes) {
        let wj = w[j];
        if wj == 0.0 {
            continue;
        }
        let logs = tangent_logs(y, atoms)?;
        let mut r = DMatrix::zeros(d.nrows(), d.ncols());
        for (l, wi) in logs.iter().zip(w.iter()) {
            r += l * *wi;
        }
        grad += log_pullback(y.coords(), d, &r) * (2.0 * wj);
    }
    Ok(project_horizontal(&atoms[j], &grad))
}

#[derive(Debug, Clone, Copy)]
pub struct LearnOptions {
    pub outer_iters: usize,
    pub initial_step: f64,
    pub max_backtracks: usize,
    pub solver: SolverOptions,
}

impl Default for LearnOptions {
    fn default() -> Self {
        Self {
            outer_iters: 15,
            initial_step: 0.1,
            max_backtracks: 30,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LearnResult {
    pub dictionary: Dictionary,
    /// Objective after the initial coding sweep, then after every outer iteration.
    pub objective_trace: Vec<f64>,
    pub codes: Vec<DVector<f64>>,
    /// Atom updates rejected after exhausting the backtracking budget.
    pub frozen_updates: usize,
}

pub fn learn_dictionary(
    training: &[ShapePoint],
    init: &Dictionary,
    lambda: f64,
    outer_iters: usize,
) -> Result<LearnResult> {
    learn_dictionary_with(
        training,
        init,
        lambda,
        &LearnOptions {
            outer_iters,
            ..LearnOptions::default()
        },
    )
}

pub fn learn_dictionary_with(
    training: &[ShapePoint],
    init: &Dictionary,
    lambda: f64,
    opts: &LearnOptions,
) -> Result<LearnResult> {
    if training.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    for y in training {
        init.atoms[0].same_space(y)?;
    }
    let mut atoms = init.atoms.clone();
    let n_atoms = atoms.len();

    // logs[i][j] = log_{y_i}(d_j); kept in sync with `atoms`.
    let mut logs: Vec<Vec<DMatrix<f64>>> = training
        .par_iter()
        .map(|y| tangent_logs(y, &atoms))
        .collect::<Result<_>>()?;
    let code_sweep = |logs: &[Vec<DMatrix<f64>>]| -> Result<Vec<SparseCode>> {
        logs.par_iter()
            .map(|l| {
                let p = QuadraticCodingProblem::new(gram_of(l), DVector::zeros(n_atoms), 0.0, lambda, true)?;
                solve_coding(&p, &opts.solver)
            })
            .collect()
    };

    let mut codes: Vec<DVector<f64>> = code_sweep(&logs)?.into_iter().map(|c| c.weights).collect();
    let mut per_sample: Vec<f64> = logs
        .iter()
        .zip(&codes)
        .map(|(l, w)| sample_objective(l, w, lambda))
        .collect();
    let mut trace = vec![per_sample.iter().sum::<f64>()];
    let mut frozen = 0usize;

    for iter in 0..opts.outer_iters {
        if iter > 0 {
            // Recode, keeping the previous code where the solver does not improve on it.
            for (i, c) in code_sweep(&logs)?.into_iter().enumerate() {
                let obj = sample_objective(&logs[i], &c.weights, lambda);
                if obj < per_sample[i] {
                    per_sample[i] = obj;
                    codes[i] = c.weights;
                }
            }
        }

        for j in 0..n_atoms {
            let users: Vec<usize> = (0..training.len()).filter(|&i| codes[i][j] != 0.0).collect();
            if users.is_empty() {
                continue;
            }
            let d = atoms[j].coords().clone();
            let mut grad = DMatrix::zeros(d.nrows(), d.ncols());
            for &i in &users {
                let r = logs[i]
                    .iter()
                    .zip(codes[i].iter())
                    .fold(DMatrix::zeros(d.nrows(), d.ncols()), |acc, (l, w)| acc + l * *w);
                grad += log_pullback(training[i].coords(), &d, &r) * (2.0 * codes[i][j]);
            }
            let grad = project_horizontal(&atoms[j], &grad);
            let gnorm2 = grad.norm_squared();
            if !gnorm2.is_finite() {
                return Err(Error::NoConvergence {
                    what: "intrinsic dictionary learning",
                    iters: iter,
                    residual: gnorm2,
                });
            }
            if gnorm2 < 1e-24 {
                continue;
            }
            let current: f64 = users.iter().map(|&i| per_sample[i]).sum();
            let mut step = opts.initial_step;
            let mut accepted = false;
            for _ in 0..=opts.max_backtracks {
                let cand = exp_raw(&d, &(&grad * -step));
                // Every sample keeps a log of every atom, so the candidate must be
                // reachable from all of them.
                let new_logs: Option<Vec<DMatrix<f64>>> = training
                    .par_iter()
                    .map(|y| {
                        if geodesic_distance(y, &cand) >= std::f64::consts::FRAC_PI_2 - CUT_LOCUS_MARGIN {
                            return None;
                        }
                        log_map(y, &cand).ok().map(|v| v.into_coords())
                    })
                    .collect();
                if let Some(new_logs) = new_logs {
                    let objs: Vec<f64> = users
                        .iter()
                        .map(|&i| {
                            let mut row = logs[i].clone();
                            row[j] = new_logs[i].clone();
                            sample_objective(&row, &codes[i], lambda)
                        })
                        .collect();
                    let total: f64 = objs.iter().sum();
                    if total.is_finite() && total <= current - 1e-4 * step * gnorm2 {
                        for (&i, obj) in users.iter().zip(objs) {
                            per_sample[i] = obj;
                        }
                        for (row, l) in logs.iter_mut().zip(new_logs) {
                            row[j] = l;
                        }
                        atoms[j] = cand;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                frozen += 1;
            }
        }
        trace.push(per_sample.iter().sum());
        log::debug!("intrinsic dictionary iteration {iter}: objective {:e}", trace[trace.len() - 1]);
    }

    let dictionary = Dictionary::new(atoms, init.class_label.clone(), init.lambda)?;
    Ok(LearnResult {
        dictionary,
        objective_trace: trace,
        codes,
        frozen_updates: frozen,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::{exp_map, LandmarkConfiguration, TangentVector};

    fn shape(values: &[f64]) -> ShapePoint {
        ShapePoint::from_configuration(&LandmarkConfiguration::from_row_slice(values.len() / 2, 2, values).unwrap())
            .unwrap()
    }

    fn square_family() -> Vec<ShapePoint> {
        vec![
            shape(&[0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0]),
            shape(&[0.0, 0.0, 1.2, 0.0, 1.0, 1.0, 0.0, 1.0]),
            shape(&[0.0, 0.0, 1.0, 0.1, 1.0, 1.3, 0.0, 1.0]),
            shape(&[0.1, 0.0, 1.0, 0.0, 1.0, 1.0, -0.2, 0.9]),
        ]
    }

    #[test]
    fn dictionary_invariants() {
        let s = square_family();
        assert!(Dictionary::new(vec![s[0].clone()], None, 0.1).is_err());
        assert!(Dictionary::new(vec![s[0].clone(), s[0].clone()], None, 0.1).is_err());
        let d = Dictionary::new(s.clone(), Some("a".into()), 0.1).unwrap();
        assert_eq!(d.len(), 4);
        assert_eq!(d.class_label(), Some("a"));
        assert_eq!(d.landmark_shape(), (4, 2));
    }

    #[test]
    fn one_hot_reconstruction_is_the_atom() {
        let s = square_family();
        let d = Dictionary::new(s.clone(), None, 0.0).unwrap();
        let w = DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0]);
        assert!(geodesic_distance(&reconstruct(&d, &w).unwrap(), &s[2]) < 1e-8);
        assert!(reconstruct(&d, &DVector::from_vec(vec![0.5, 0.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn objective_paths_agree() {
        let s = square_family();
        let d = Dictionary::new(s[1..].to_vec(), None, 0.05).unwrap();
        let w = DVector::from_vec(vec![0.7, -0.2, 0.5]);
        let direct = coding_objective(&s[0], &d, &w, 0.05).unwrap();
        let p = tangent_problem(&s[0], &d, 0.05).unwrap();
        assert!((direct - p.objective(&w)).abs() < 1e-10);
    }

    #[test]
    fn pullback_matches_central_differences() {
        let s = square_family();
        let y = s[0].coords();
        let d = &s[2];
        let r = log_map(&s[0], &s[3]).unwrap().into_coords();
        let grad = project_horizontal(d, &log_pullback(y, d.coords(), &r));
        let dir = project_horizontal(d, &DMatrix::from_fn(3, 2, |i, j| ((i * 2 + j) as f64 * 0.7).sin()));
        let f = |t: f64| {
            let moved = exp_map(&TangentVector::new(d.clone(), &dir * t).unwrap());
            r.dot(log_map(&s[0], &moved).unwrap().coords())
        };
        let h = 1e-5;
        let fd = (f(h) - f(-h)) / (2.0 * h);
        let an = grad.dot(&dir);
        assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "fd {fd} analytic {an}");
    }
}
