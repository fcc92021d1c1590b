//! Extrinsic sparse coding in the RKHS of the Procrustes Gaussian kernel.
//!
//! Atoms are combinations of training shapes in feature space,
//! `phi(D) = phi(Y) V`. Coding a query `z` minimizes
//! `|phi(z) - phi(D) w|^2 + lambda |w|_1` with `sum(w) = 1`; expanding the norm
//! only needs the atom Gram `K_D = V^T K(Y, Y) V` and `k = V^T k(Y, z)`. The
//! eigendecomposition `K_D = U S U^T` turns this into the Euclidean problem
//! `|z~ - D~ w|^2` with `D~ = S^(1/2) U^T` and `z~ = S^(-1/2) U^T k`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{cross_kernel, eigen_range, gram_matrix};
use crate::shape::ShapePoint;
use crate::sparse::{solve_coding, QuadraticCodingProblem, SolverOptions, SparseCode};

/// Eigenvalues below this fraction of the largest are dropped from `S^(-1/2)`.
pub const EIGEN_CLAMP: f64 = 1e-10;

/// Atom Gram matrices with an eigenvalue below `-NOT_PSD_TOL` are rejected.
pub const NOT_PSD_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelDictionary {
    anchors: Vec<ShapePoint>,
    coefficients: DMatrix<f64>,
    sigma: f64,
    class_label: Option<String>,
    anchor_gram: DMatrix<f64>,
}

impl KernelDictionary {
    pub fn new(
        anchors: Vec<ShapePoint>,
        coefficients: DMatrix<f64>,
        sigma: f64,
        class_label: Option<String>,
    ) -> Result<Self> {
        if anchors.is_empty() {
            return Err(Error::InvalidDictionary("no anchor shapes".into()));
        }
        if coefficients.nrows() != anchors.len() {
            return Err(Error::dims(
                format!("{} coefficient rows", anchors.len()),
                coefficients.nrows(),
            ));
        }
        if coefficients.ncols() == 0 || coefficients.ncols() > anchors.len() {
            return Err(Error::InvalidDictionary(format!(
                "{} atoms over {} anchors",
                coefficients.ncols(),
                anchors.len()
            )));
        }
        if coefficients.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDictionary("non-finite coefficients".into()));
        }
        let anchor_gram = gram_matrix(&anchors, sigma)?.into_entries();
        let (min, _) = eigen_range(&anchor_gram);
        if min < -NOT_PSD_TOL {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
        Ok(Self {
            anchors,
            coefficients,
            sigma,
            class_label,
            anchor_gram,
        })
    }

    /// Atoms equal to the anchors themselves (`V = I`).
    pub fn from_anchors(anchors: Vec<ShapePoint>, sigma: f64, class_label: Option<String>) -> Result<Self> {
        let m = anchors.len();
        Self::new(anchors, DMatrix::identity(m, m), sigma, class_label)
    }

    pub fn anchors(&self) -> &[ShapePoint] {
        &self.anchors
    }

    /// The `M x N` matrix `V`.
    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn class_label(&self) -> Option<&str> {
        self.class_label.as_deref()
    }

    pub fn num_atoms(&self) -> usize {
        self.coefficients.ncols()
    }

    pub fn landmark_shape(&self) -> (usize, usize) {
        (self.anchors[0].num_landmarks(), self.anchors[0].dim())
    }

    /// `V^T K(Y, Y) V`
    pub fn atom_gram(&self) -> DMatrix<f64> {
        let g = self.coefficients.transpose() * &self.anchor_gram * &self.coefficients;
        (&g + g.transpose()) * 0.5
    }

    /// `V^T k(Y, z)`
    pub fn atom_kernel_vector(&self, query: &ShapePoint) -> Result<DVector<f64>> {
        let k = cross_kernel(&self.anchors, std::slice::from_ref(query), self.sigma)?;
        Ok(self.coefficients.transpose() * k.column(0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedProblem {
    /// `D~ = S^(1/2) U^T`
    pub reduced_design: DMatrix<f64>,
    /// `z~ = S^(-1/2) U^T k`
    pub reduced_target: DVector<f64>,
    /// `k(z, z) - k^T K^+ k`, so that `|z~ - D~ w|^2 + constant` is the feature-space error.
    pub constant: f64,
}

impl ReducedProblem {
    pub fn residual(&self, w: &DVector<f64>) -> f64 {
        (&self.reduced_target - &self.reduced_design * w).norm_squared() + self.constant
    }

    pub fn coding_problem(&self, lambda: f64) -> Result<QuadraticCodingProblem> {
        let dt = self.reduced_design.transpose();
        let gram = &dt * &self.reduced_design;
        QuadraticCodingProblem::new(
            (&gram + gram.transpose()) * 0.5,
            &dt * &self.reduced_target,
            self.reduced_target.norm_squared() + self.constant,
            lambda,
            true,
        )
    }
}

/// Factors the atom Gram matrix; `self_kernel` is `k(z, z)` (1 for the Gaussian kernel).
pub fn reduce(atom_gram: &DMatrix<f64>, kernel_vec: &DVector<f64>, self_kernel: f64) -> Result<ReducedProblem> {
    let n = atom_gram.nrows();
    if !atom_gram.is_square() || kernel_vec.len() != n || n == 0 {
        return Err(Error::dims(format!("{n}x{n} gram and vector"), kernel_vec.len()));
    }
    let sym = (atom_gram + atom_gram.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if min < -NOT_PSD_TOL {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    let cutoff = EIGEN_CLAMP * max.max(0.0);
    let ut_k = eig.eigenvectors.transpose() * kernel_vec;
    let mut design = eig.eigenvectors.transpose();
    let mut target = DVector::zeros(n);
    for i in 0..n {
        let s = eig.eigenvalues[i];
        if s > cutoff && s > 0.0 {
            let root = s.sqrt();
            design.row_mut(i).scale_mut(root);
            target[i] = ut_k[i] / root;
        } else {
            design.row_mut(i).fill(0.0);
        }
    }
    let constant = self_kernel - target.norm_squared();
    Ok(ReducedProblem {
        reduced_design: design,
        reduced_target: target,
        constant,
    })
}

pub fn code_shape_kernel(query: &ShapePoint, dict: &KernelDictionary, lambda: f64) -> Result<SparseCode> {
    code_shape_kernel_with(query, dict, lambda, &SolverOptions::default())
}

pub fn code_shape_kernel_with(
    query: &ShapePoint,
    dict: &KernelDictionary,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<SparseCode> {
    code_reduced(&dict.atom_gram(), &dict.atom_kernel_vector(query)?, lambda, opts)
}

fn code_reduced(atom_gram: &DMatrix<f64>, kvec: &DVector<f64>, lambda: f64, opts: &SolverOptions) -> Result<SparseCode> {
    let reduced = reduce(atom_gram, kvec, 1.0)?;
    solve_coding(&reduced.coding_problem(lambda)?, opts)
}

/// `k(z, z) - 2 w^T k + w^T K_D w + lambda |w|_1`, evaluated from kernels directly.
pub fn kernel_objective(query: &ShapePoint, dict: &KernelDictionary, weights: &DVector<f64>, lambda: f64) -> Result<f64> {
    if weights.len() != dict.num_atoms() {
        return Err(Error::dims(dict.num_atoms(), weights.len()));
    }
    let k = dict.atom_kernel_vector(query)?;
    let g = dict.atom_gram();
    Ok(1.0 - 2.0 * weights.dot(&k) + weights.dot(&(&g * weights)) + lambda * weights.lp_norm(1))
}

#[derive(Debug, Clone)]
pub struct KernelLearnResult {
    pub dictionary: KernelDictionary,
    /// `Tr(K (I - V W)(I - V W)^T)` for every iterate, the initial one first.
    pub objective_trace: Vec<f64>,
    /// Index into `objective_trace` of the returned dictionary.
    pub best_iteration: usize,
    /// Set when some code matrix had rank below the atom count.
    pub rank_collapse: Option<usize>,
}

/// Feature-space reconstruction error of the training set: `Tr(K (I - VW)(I - VW)^T)`.
pub fn rkhs_reconstruction(gram: &DMatrix<f64>, v: &DMatrix<f64>, w: &DMatrix<f64>) -> f64 {
    let m = gram.nrows();
    let r = DMatrix::identity(m, m) - v * w;
    (gram * &r * r.transpose()).trace()
}

/// Learns `N = anchor_indices.len()` atoms from `training`, starting from the
/// training shapes at `anchor_indices` (`V` = the matching identity columns).
pub fn learn_dictionary_kernel_from(
    training: &[ShapePoint],
    anchor_indices: &[usize],
    lambda: f64,
    sigma: f64,
    outer_iters: usize,
    class_label: Option<String>,
) -> Result<KernelLearnResult> {
    let m = training.len();
    let n = anchor_indices.len();
    if n == 0 || n > m {
        return Err(Error::InvalidInput(format!("cannot learn {n} atoms from {m} shapes")));
    }
    if anchor_indices.iter().any(|&i| i >= m) {
        return Err(Error::InvalidInput("anchor index out of range".into()));
    }
    let mut v = DMatrix::zeros(m, n);
    for (col, &i) in anchor_indices.iter().enumerate() {
        v[(i, col)] = 1.0;
    }
    let mut dict = KernelDictionary::new(training.to_vec(), v, sigma, class_label)?;
    let opts = SolverOptions::default();
    let gram = dict.anchor_gram.clone();

    let code_all = |dict: &KernelDictionary| -> Result<DMatrix<f64>> {
        let atom_gram = dict.atom_gram();
        let codes: Vec<DVector<f64>> = (0..m)
            .into_par_iter()
            .map(|i| {
                let kvec = dict.coefficients.transpose() * gram.column(i);
                code_reduced(&atom_gram, &kvec, lambda, &opts).map(|c| c.weights)
            })
            .collect::<Result<_>>()?;
        Ok(DMatrix::from_columns(&codes))
    };

    let mut w = code_all(&dict)?;
    let mut trace = vec![rkhs_reconstruction(&gram, &dict.coefficients, &w)];
    let mut best = (trace[0], 0, dict.clone());
    let mut rank_collapse = None;
    for iter in 1..=outer_iters {
        let rank = w.rank(1e-10 * w.amax().max(1e-300));
        if rank < n {
            log::warn!("code matrix rank {rank} is below the atom count {n}");
            rank_collapse = Some(rank);
        }
        let v = w
            .clone()
            .pseudo_inverse(1e-12)
            .map_err(|e| Error::InvalidProblem(e.to_string()))?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NoConvergence {
                what: "kernel dictionary learning",
                iters: iter,
                residual: f64::NAN,
            });
        }
        dict.coefficients = v;
        w = code_all(&dict)?;
        let obj = rkhs_reconstruction(&gram, &dict.coefficients, &w);
        trace.push(obj);
        if obj < best.0 {
            best = (obj, iter, dict.clone());
        }
    }
    Ok(KernelLearnResult {
        dictionary: best.2,
        objective_trace: trace,
        best_iteration: best.1,
        rank_collapse,
    })
}

/// Learns `n_atoms` atoms, picking the initial anchors as kernel k-means
/// representatives of the training set.
pub fn learn_dictionary_kernel(
    training: &[ShapePoint],
    n_atoms: usize,
    lambda: f64,
    sigma: f64,
    outer_iters: usize,
) -> Result<KernelLearnResult> {
    if n_atoms == 0 || n_atoms > training.len() {
        return Err(Error::InvalidInput(format!(
            "cannot learn {n_atoms} atoms from {} shapes",
            training.len()
        )));
    }
    let gram = gram_matrix(training, sigma)?;
    let anchors = crate::init::representatives(gram.entries(), n_atoms, crate::init::DEFAULT_SEED)?;
    learn_dictionary_kernel_from(training, &anchors, lambda, sigma, outer_iters, None)
}
