//! l1-regularized quadratic coding.
//!
//! Every coding problem in this crate has the form
//!
//! ```text
//! minimize  c - 2 w^T b + w^T G w + lambda |w|_1      [subject to sum(w) = 1]
//! ```
//!
//! where `G` is a PSD Gram matrix of atoms, `b` the atom/query inner products
//! and `c` the query self inner product, so the smooth part is a squared
//! reconstruction error. The unconstrained problem is solved by ISTA with
//! backtracking; the affine one by ADMM splitting the quadratic + equality
//! block (a bordered linear solve) from the l1 block. Both finish with an
//! active-set polish on the identified support, which gives exact solutions
//! once the support and signs are right.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCodingProblem {
    gram: DMatrix<f64>,
    cross: DVector<f64>,
    constant: f64,
    lambda: f64,
    affine: bool,
}

impl QuadraticCodingProblem {
    pub fn new(
        gram: DMatrix<f64>,
        cross: DVector<f64>,
        constant: f64,
        lambda: f64,
        affine: bool,
    ) -> Result<Self> {
        let n = gram.nrows();
        if !gram.is_square() || n == 0 || cross.len() != n {
            return Err(Error::InvalidProblem(format!(
                "gram {:?} and cross {} are inconsistent",
                gram.shape(),
                cross.len()
            )));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidProblem(format!("lambda must be >= 0, got {lambda}")));
        }
        if gram.iter().chain(cross.iter()).any(|v| !v.is_finite()) || !constant.is_finite() {
            return Err(Error::InvalidProblem("non-finite problem data".into()));
        }
        let asym = (&gram - gram.transpose()).amax();
        if asym > 1e-10 * gram.amax().max(1.0) {
            return Err(Error::InvalidProblem(format!("gram is not symmetric ({asym:e})")));
        }
        let gram = (&gram + gram.transpose()) * 0.5;
        Ok(Self {
            gram,
            cross,
            constant,
            lambda,
            affine,
        })
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn cross(&self) -> &DVector<f64> {
        &self.cross
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn is_affine(&self) -> bool {
        self.affine
    }

    pub fn len(&self) -> usize {
        self.cross.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cross.is_empty()
    }

    /// `c - 2 w^T b + w^T G w`
    pub fn reconstruction(&self, w: &DVector<f64>) -> f64 {
        self.constant - 2.0 * w.dot(&self.cross) + w.dot(&(&self.gram * w))
    }

    pub fn objective(&self, w: &DVector<f64>) -> f64 {
        self.reconstruction(w) + self.lambda * w.lp_norm(1)
    }

    fn smooth_gradient(&self, w: &DVector<f64>) -> DVector<f64> {
        (&self.gram * w - &self.cross) * 2.0
    }

    /// Largest violation of the subgradient optimality conditions.
    ///
    /// For the affine problem the multiplier of `sum(w) = 1` is chosen to
    /// minimize the violation, and the constraint residual is included.
    pub fn kkt_residual(&self, w: &DVector<f64>) -> f64 {
        let g = self.smooth_gradient(w);
        let lambda = self.lambda;
        let violation = |nu: f64| -> f64 {
            g.iter()
                .zip(w.iter())
                .map(|(gi, wi)| {
                    let gi = gi + nu;
                    if *wi > 0.0 {
                        (gi + lambda).abs()
                    } else if *wi < 0.0 {
                        (gi - lambda).abs()
                    } else {
                        (gi.abs() - lambda).max(0.0)
                    }
                })
                .fold(0.0, f64::max)
        };
        if !self.affine {
            return violation(0.0);
        }
        // max of convex functions of nu: ternary search
        let bound = g.amax() + lambda + 1.0;
        let (mut lo, mut hi) = (-bound, bound);
        for _ in 0..200 {
            let a = lo + (hi - lo) / 3.0;
            let b = hi - (hi - lo) / 3.0;
            if violation(a) <= violation(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        violation(0.5 * (lo + hi)).max((w.sum() - 1.0).abs())
    }

    fn starting_point(&self) -> DVector<f64> {
        let n = self.len();
        if self.affine {
            DVector::from_element(n, 1.0 / n as f64)
        } else {
            DVector::zeros(n)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iters: usize,
    pub kkt_tol: f64,
    /// Relative objective change treated as stagnation.
    pub rel_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            kkt_tol: 1e-6,
            rel_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    pub weights: DVector<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl SparseCode {
    fn from_weights(problem: &QuadraticCodingProblem, weights: DVector<f64>, iterations: usize) -> Self {
        Self {
            objective: problem.objective(&weights),
            kkt_residual: problem.kkt_residual(&weights),
            weights,
            iterations,
        }
    }
}

/// How often (in iterations) the solvers attempt an active-set polish.
const POLISH_EVERY: usize = 10;
/// Minimum iterations before stagnation is allowed to stop a solve.
const MIN_ITERS_BEFORE_STALL: usize = 200;

pub fn solve_coding(problem: &QuadraticCodingProblem, opts: &SolverOptions) -> Result<SparseCode> {
    let (min_eig, max_eig) = crate::kernel::eigen_range(&problem.gram);
    let scale = problem.gram.norm().max(f64::MIN_POSITIVE);
    if min_eig < -1e-6 * scale {
        return Err(Error::InvalidProblem(format!(
            "gram has negative eigenvalue {min_eig:e}"
        )));
    }
    let start = problem.starting_point();
    let start_obj = problem.objective(&start);
    let code = if problem.affine {
        solve_affine_admm(problem, opts, max_eig.max(0.0))?
    } else {
        solve_ista(problem, opts, max_eig.max(0.0))?
    };
    if code.objective > start_obj {
        return Ok(SparseCode::from_weights(problem, start, code.iterations));
    }
    Ok(code)
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

fn solve_ista(problem: &QuadraticCodingProblem, opts: &SolverOptions, max_eig: f64) -> Result<SparseCode> {
    let lambda = problem.lambda;
    let mut w = problem.starting_point();
    let mut step = 1.0 / (2.0 * max_eig).max(1e-12);
    let mut smooth = problem.reconstruction(&w);
    let mut last_obj = problem.objective(&w);
    let mut best = w.clone();
    let mut best_obj = last_obj;

    for iter in 1..=opts.max_iters {
        let grad = problem.smooth_gradient(&w);
        // Backtracking on the quadratic upper bound.
        let mut tries = 0;
        let next = loop {
            let cand = (&w - &grad * step).map(|x| soft_threshold(x, step * lambda));
            let diff = &cand - &w;
            let cand_smooth = problem.reconstruction(&cand);
            let bound = smooth + grad.dot(&diff) + diff.norm_squared() / (2.0 * step);
            if cand_smooth <= bound + 1e-15 * smooth.abs().max(1.0) || tries >= 60 {
                break cand;
            }
            step *= 0.5;
            tries += 1;
        };
        w = next;
        smooth = problem.reconstruction(&w);
        let obj = smooth + lambda * w.lp_norm(1);
        if obj < best_obj {
            best_obj = obj;
            best = w.clone();
        }

        if iter % POLISH_EVERY == 0 || iter == opts.max_iters {
            if let Some(code) = polish(problem, &w, opts.kkt_tol, iter) {
                return Ok(code);
            }
            if problem.kkt_residual(&w) < opts.kkt_tol {
                return Ok(SparseCode::from_weights(problem, w, iter));
            }
            let rel = (last_obj - obj).abs() / obj.abs().max(1e-300);
            if iter >= MIN_ITERS_BEFORE_STALL && rel < opts.rel_tol {
                log::debug!("ista stalled at iteration {iter} (kkt {:e})", problem.kkt_residual(&best));
                return Ok(SparseCode::from_weights(problem, best, iter));
            }
            last_obj = obj;
        }
    }
    let residual = problem.kkt_residual(&best);
    Err(Error::NoConvergence {
        what: "ista",
        iters: opts.max_iters,
        residual,
    })
}

/// Solves `[2G + rho I, 1; 1^T, 0] [w; nu] = [r; 1]` through a cached
/// Cholesky factor of `2G + rho I`.
struct AffineBlockSolver {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    ainv_ones: DVector<f64>,
    ones_ainv_ones: f64,
}

impl AffineBlockSolver {
    fn new(gram: &DMatrix<f64>, rho: f64) -> Result<Self> {
        let n = gram.nrows();
        let a = gram * 2.0 + DMatrix::identity(n, n) * rho;
        let chol = a
            .cholesky()
            .ok_or_else(|| Error::InvalidProblem("ADMM system is not positive definite".into()))?;
        let ainv_ones = chol.solve(&DVector::from_element(n, 1.0));
        let ones_ainv_ones = ainv_ones.sum();
        Ok(Self {
            chol,
            ainv_ones,
            ones_ainv_ones,
        })
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let x = self.chol.solve(rhs);
        let nu = (x.sum() - 1.0) / self.ones_ainv_ones;
        x - &self.ainv_ones * nu
    }
}

fn solve_affine_admm(problem: &QuadraticCodingProblem, opts: &SolverOptions, max_eig: f64) -> Result<SparseCode> {
    let n = problem.len();
    let lambda = problem.lambda;
    let trace_mean = problem.gram.trace() / n as f64;
    let rho = (2.0 * trace_mean).max(1e-3 * 2.0 * max_eig).max(1e-8);
    let block = AffineBlockSolver::new(&problem.gram, rho)?;
    let two_b = &problem.cross * 2.0;

    let mut z = problem.starting_point();
    let mut u = DVector::zeros(n);
    let mut w = z.clone();
    let mut last_obj = problem.objective(&w);

    for iter in 1..=opts.max_iters {
        w = block.solve(&(&two_b + (&z - &u) * rho));
        let v = &w + &u;
        z = v.map(|x| soft_threshold(x, lambda / rho));
        u += &w - &z;

        if iter % POLISH_EVERY == 0 || iter == opts.max_iters {
            if let Some(code) = polish(problem, &z, opts.kkt_tol, iter) {
                return Ok(code);
            }
            let obj = problem.objective(&w);
            let rel = (last_obj - obj).abs() / obj.abs().max(1e-300);
            let primal = (&w - &z).norm();
            if iter >= MIN_ITERS_BEFORE_STALL && rel < opts.rel_tol && primal < 1e-9 {
                log::debug!("admm stalled at iteration {iter} (kkt {:e})", problem.kkt_residual(&w));
                return Ok(SparseCode::from_weights(problem, w, iter));
            }
            last_obj = obj;
        }
    }
    Err(Error::NoConvergence {
        what: "affine admm",
        iters: opts.max_iters,
        residual: problem.kkt_residual(&w),
    })
}

/// Active-set refinement from an approximate solution.
///
/// Keeps a sign-consistent point `x` and a sign pattern. Each step moves `x`
/// toward the minimizer of the quadratic restricted to the support (the l1
/// term is linear there), or, when that restricted quadratic is unbounded
/// below, along a null direction of decreasing cost. A coordinate that reaches
/// zero first leaves the support; at the restricted minimizer the worst KKT
/// violator joins it. Returns a code only if it satisfies the KKT conditions
/// to `tol`.
fn polish(problem: &QuadraticCodingProblem, guess: &DVector<f64>, tol: f64, iterations: usize) -> Option<SparseCode> {
    let n = problem.len();
    let lambda = problem.lambda;
    let scale = guess.amax();
    let mut signs: Vec<f64> = guess
        .iter()
        .map(|x| if x.abs() > 1e-12 * scale.max(1e-300) { x.signum() } else { 0.0 })
        .collect();
    if problem.affine && signs.iter().all(|s| *s == 0.0) {
        let j = guess.iamax();
        signs[j] = 1.0;
    }
    let mut x = DVector::from_fn(n, |i, _| if signs[i] != 0.0 { guess[i] } else { 0.0 });

    for _ in 0..(4 * n + 10) {
        let support: Vec<usize> = (0..n).filter(|&i| signs[i] != 0.0).collect();
        let (target, bounded) = solve_restricted(problem, &support, &signs, &x)?;
        let d = &target - &x;

        // Largest step keeping every support coordinate on its sign.
        let mut t = if bounded { 1.0 } else { f64::INFINITY };
        let mut blocking = None;
        for &i in &support {
            if signs[i] * d[i] < 0.0 {
                let ti = (x[i] / -d[i]).max(0.0);
                if ti < t {
                    t = ti;
                    blocking = Some(i);
                }
            }
        }
        if let Some(i) = blocking {
            x += &d * t;
            x[i] = 0.0;
            signs[i] = 0.0;
            if problem.affine && signs.iter().all(|s| *s == 0.0) {
                return None;
            }
            continue;
        }
        if !bounded {
            return None;
        }
        x = target;

        let kkt = problem.kkt_residual(&x);
        if kkt < tol {
            return Some(SparseCode {
                objective: problem.objective(&x),
                weights: x,
                kkt_residual: kkt,
                iterations,
            });
        }

        // Add the zero coordinate with the worst violation.
        let g = problem.smooth_gradient(&x);
        let nu = if problem.affine {
            multiplier(&g, &x, &signs, lambda)
        } else {
            0.0
        };
        let mut worst = None;
        let mut worst_val = tol;
        for i in 0..n {
            if signs[i] == 0.0 {
                let excess = (g[i] + nu).abs() - lambda;
                if excess > worst_val {
                    worst_val = excess;
                    worst = Some(i);
                }
            }
        }
        match worst {
            Some(i) => signs[i] = -(g[i] + nu).signum(),
            None => return None,
        }
    }
    None
}

/// Multiplier of the affine constraint implied by the support equations.
fn multiplier(g: &DVector<f64>, w: &DVector<f64>, signs: &[f64], lambda: f64) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..w.len() {
        if signs[i] != 0.0 {
            sum += -(g[i] + lambda * signs[i]);
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Minimizes the quadratic restricted to `support` with fixed signs
/// (the l1 term becomes linear), under `sum(w) = 1` if the problem is affine.
///
/// Returns the minimizer and `true` when it exists. Otherwise the restricted
/// cost decreases without bound along the least-squares residual of the
/// stationarity system, and the returned point is `from` shifted by that
/// residual direction, flagged `false`.
fn solve_restricted(
    problem: &QuadraticCodingProblem,
    support: &[usize],
    signs: &[f64],
    from: &DVector<f64>,
) -> Option<(DVector<f64>, bool)> {
    let n = problem.len();
    let k = support.len();
    let mut w = DVector::zeros(n);
    if k == 0 {
        return if problem.affine { None } else { Some((w, true)) };
    }
    let dim = if problem.affine { k + 1 } else { k };
    let mut a = DMatrix::zeros(dim, dim);
    let mut rhs = DVector::zeros(dim);
    for (r, &i) in support.iter().enumerate() {
        for (c, &j) in support.iter().enumerate() {
            a[(r, c)] = 2.0 * problem.gram[(i, j)];
        }
        rhs[r] = 2.0 * problem.cross[i] - problem.lambda * signs[i];
        if problem.affine {
            a[(r, k)] = 1.0;
            a[(k, r)] = 1.0;
        }
    }
    if problem.affine {
        rhs[k] = 1.0;
    }
    let eps = 1e-13 * a.amax().max(1e-300);
    let sol = a.clone().svd(true, true).solve(&rhs, eps).ok()?;
    let residual = &rhs - &a * &sol;
    let consistent = residual.norm() <= 1e-9 * rhs.norm().max(1.0);
    for (r, &i) in support.iter().enumerate() {
        w[i] = if consistent { sol[r] } else { from[i] + residual[r] };
    }
    if w.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((w, consistent))
}

/// A Euclidean dictionary: atoms are the columns of a `k x N` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EuclideanDictionary {
    pub atoms: DMatrix<f64>,
}

impl EuclideanDictionary {
    pub fn num_atoms(&self) -> usize {
        self.atoms.ncols()
    }

    /// l1 coding of `x` without the affine constraint.
    pub fn code(&self, x: &DVector<f64>, lambda: f64, opts: &SolverOptions) -> Result<SparseCode> {
        if x.len() != self.atoms.nrows() {
            return Err(Error::dims(self.atoms.nrows(), x.len()));
        }
        let problem = QuadraticCodingProblem::new(
            self.atoms.transpose() * &self.atoms,
            self.atoms.transpose() * x,
            x.norm_squared(),
            lambda,
            false,
        )?;
        solve_coding(&problem, opts)
    }
}

#[derive(Debug, Clone)]
pub struct EuclideanLearnResult {
    pub dictionary: EuclideanDictionary,
    /// `N x t` codes of the training samples used for the last atom update.
    pub codes: DMatrix<f64>,
    /// Total objective after each outer iteration.
    pub objective_trace: Vec<f64>,
}

/// Alternating minimization of `sum_i |x_i - D w_i|^2 + lambda |w_i|_1`.
///
/// Atoms start from the first `n_atoms` distinct samples (normalized) and are
/// updated column by column with the closed-form least-squares step,
/// projected onto the unit ball so the l1 penalty cannot be dodged by
/// rescaling.
pub fn learn_dictionary_euclidean(
    samples: &[DVector<f64>],
    n_atoms: usize,
    lambda: f64,
    iters: usize,
    opts: &SolverOptions,
) -> Result<EuclideanLearnResult> {
    if samples.is_empty() || n_atoms == 0 || n_atoms > samples.len() {
        return Err(Error::InvalidInput(format!(
            "cannot learn {n_atoms} atoms from {} samples",
            samples.len()
        )));
    }
    if iters == 0 {
        return Err(Error::InvalidInput("need at least one iteration".into()));
    }
    let k = samples[0].len();
    if samples.iter().any(|s| s.len() != k) {
        return Err(Error::InvalidInput("samples have different lengths".into()));
    }
    let x = DMatrix::from_columns(samples);

    let mut chosen: Vec<DVector<f64>> = Vec::with_capacity(n_atoms);
    for s in samples {
        let norm = s.norm();
        if norm < 1e-12 {
            continue;
        }
        let d = s / norm;
        if chosen.iter().all(|c| (c - &d).norm() > 1e-9) {
            chosen.push(d);
        }
        if chosen.len() == n_atoms {
            break;
        }
    }
    if chosen.len() < n_atoms {
        return Err(Error::InvalidInput("not enough distinct samples for initialization".into()));
    }
    let mut dict = EuclideanDictionary {
        atoms: DMatrix::from_columns(&chosen),
    };

    let code_all = |dict: &EuclideanDictionary| -> Result<(DMatrix<f64>, f64)> {
        use rayon::prelude::*;
        let codes: Vec<SparseCode> = samples
            .par_iter()
            .map(|s| dict.code(s, lambda, opts))
            .collect::<Result<_>>()?;
        let total = codes.iter().map(|c| c.objective).sum();
        let w = DMatrix::from_columns(&codes.into_iter().map(|c| c.weights).collect::<Vec<_>>());
        Ok((w, total))
    };
    let total_objective = |atoms: &DMatrix<f64>, w: &DMatrix<f64>| -> f64 {
        (&x - atoms * w).norm_squared() + lambda * w.iter().map(|v| v.abs()).sum::<f64>()
    };

    let mut trace = Vec::with_capacity(iters);
    let mut codes = DMatrix::zeros(n_atoms, samples.len());
    for _ in 0..iters {
        let (w, _) = code_all(&dict)?;
        codes = w;
        let a = &codes * codes.transpose();
        let b = &x * codes.transpose();
        for j in 0..n_atoms {
            if a[(j, j)] < 1e-12 {
                continue;
            }
            let residual = b.column(j) - &dict.atoms * a.column(j);
            let u = dict.atoms.column(j) + residual / a[(j, j)];
            let norm = u.norm();
            let d = if norm > 1.0 { u / norm } else { u };
            dict.atoms.set_column(j, &d);
        }
        let obj = total_objective(&dict.atoms, &codes);
        if !obj.is_finite() {
            return Err(Error::NoConvergence {
                what: "euclidean dictionary learning",
                iters: trace.len(),
                residual: obj,
            });
        }
        trace.push(obj);
    }
    Ok(EuclideanLearnResult {
        dictionary: dict,
        codes,
        objective_trace: trace,
    })
}
