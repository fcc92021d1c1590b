//! Kendall shape space of 2D and 3D landmark configurations.
//!
//! A configuration `Z` (n landmarks in R^m) is centered with the Helmert
//! sub-matrix and scaled to unit Frobenius norm, giving a pre-shape on the unit
//! sphere of R^{(n-1) x m}. A [`ShapePoint`] stores one pre-shape as the
//! representative of its rotation orbit; every binary operation aligns the
//! second argument onto the first with the optimal rotation before comparing.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Margin below pi/2 inside which the log map is considered well defined.
pub const CUT_LOCUS_MARGIN: f64 = 1e-6;

/// Below this angle two shapes are treated as the same point.
pub(crate) const SMALL_ANGLE: f64 = 1e-8;

/// Raw landmark coordinates of one frame: `n` landmarks by `m` spatial dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkConfiguration {
    coords: DMatrix<f64>,
}

impl LandmarkConfiguration {
    pub fn new(coords: DMatrix<f64>) -> Result<Self> {
        let (n, m) = coords.shape();
        if m != 2 && m != 3 {
            return Err(Error::UnsupportedDim(m));
        }
        if n < 3 || n < m + 1 {
            return Err(Error::InvalidConfiguration(format!(
                "{n} landmarks cannot span {m} dimensions"
            )));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfiguration(
                "non-finite landmark coordinate".into(),
            ));
        }
        Ok(Self { coords })
    }

    /// Builds a configuration from landmark-major values `x1 y1 [z1] x2 y2 ...`.
    pub fn from_row_slice(n: usize, m: usize, values: &[f64]) -> Result<Self> {
        if values.len() != n * m {
            return Err(Error::dims(n * m, values.len()));
        }
        Self::new(DMatrix::from_row_slice(n, m, values))
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    pub fn num_landmarks(&self) -> usize {
        self.coords.nrows()
    }

    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    /// Landmark-major flattening, the inverse of [`Self::from_row_slice`].
    pub fn to_row_vec(&self) -> Vec<f64> {
        let (n, m) = self.coords.shape();
        let mut out = Vec::with_capacity(n * m);
        for i in 0..n {
            for j in 0..m {
                out.push(self.coords[(i, j)]);
            }
        }
        out
    }

    /// Applies `x -> scale * x * rotation + translation` to every landmark.
    pub fn similarity_transform(
        &self,
        rotation: &DMatrix<f64>,
        scale: f64,
        translation: &[f64],
    ) -> Result<Self> {
        let m = self.dim();
        if rotation.shape() != (m, m) || translation.len() != m {
            return Err(Error::dims(m, translation.len()));
        }
        let mut coords = &self.coords * rotation * scale;
        for mut row in coords.row_iter_mut() {
            for (v, t) in row.iter_mut().zip(translation) {
                *v += t;
            }
        }
        Self::new(coords)
    }
}

/// The `(n-1) x n` Helmert sub-matrix. Row `j` (1-based) is
/// `(1, ..., 1, -j, 0, ..., 0) / sqrt(j (j + 1))` with `j` leading ones.
pub fn helmert(n: usize) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(n.saturating_sub(1), n);
    for j in 1..n {
        let scale = 1.0 / ((j * (j + 1)) as f64).sqrt();
        for k in 0..j {
            h[(j - 1, k)] = scale;
        }
        h[(j - 1, j)] = -(j as f64) * scale;
    }
    h
}

/// A centered, unit-norm configuration with `n-1` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PreShape {
    coords: DMatrix<f64>,
}

impl PreShape {
    /// Normalizes an arbitrary `(n-1) x m` matrix onto the pre-shape sphere.
    pub fn from_centered(coords: DMatrix<f64>) -> Result<Self> {
        let norm = coords.norm();
        if !(norm >= 1e-12) {
            return Err(Error::DegenerateConfiguration { norm });
        }
        Ok(Self {
            coords: coords / norm,
        })
    }

    /// Wraps a matrix that is already a pre-shape, keeping its values bit for bit.
    pub fn from_unit(coords: DMatrix<f64>) -> Result<Self> {
        let norm = coords.norm();
        if !((norm - 1.0).abs() < 1e-9) || coords.nrows() < 2 {
            return Err(Error::InvalidConfiguration(format!(
                "pre-shape must have unit norm, got {norm}"
            )));
        }
        if coords.ncols() != 2 && coords.ncols() != 3 {
            return Err(Error::UnsupportedDim(coords.ncols()));
        }
        Ok(Self { coords })
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    pub fn num_landmarks(&self) -> usize {
        self.coords.nrows() + 1
    }

    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    pub fn norm(&self) -> f64 {
        self.coords.norm()
    }

    /// Lifts back to landmark space (centered at the origin, unit size).
    pub fn to_configuration(&self) -> Result<LandmarkConfiguration> {
        let h = helmert(self.num_landmarks());
        LandmarkConfiguration::new(h.transpose() * &self.coords)
    }
}

/// Projects a landmark configuration onto the pre-shape sphere: `HZ / |HZ|`.
pub fn to_preshape(config: &LandmarkConfiguration) -> Result<PreShape> {
    let h = helmert(config.num_landmarks());
    PreShape::from_centered(h * config.coords())
}

/// A point of Kendall's shape space, stored through one pre-shape representative.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapePoint {
    representative: PreShape,
}

impl ShapePoint {
    pub fn new(representative: PreShape) -> Self {
        Self { representative }
    }

    pub fn from_configuration(config: &LandmarkConfiguration) -> Result<Self> {
        Ok(Self::new(to_preshape(config)?))
    }

    pub fn representative(&self) -> &PreShape {
        &self.representative
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.representative.coords
    }

    pub fn num_landmarks(&self) -> usize {
        self.representative.num_landmarks()
    }

    pub fn dim(&self) -> usize {
        self.representative.dim()
    }

    /// Dimension of the shape space (and of its tangent spaces).
    pub fn manifold_dim(&self) -> usize {
        let (k, m) = self.coords().shape();
        k * m - 1 - m * (m - 1) / 2
    }

    /// Shape equality: geodesic distance below 1e-9.
    pub fn approx_eq(&self, other: &ShapePoint) -> bool {
        self.same_space(other).is_ok() && geodesic_distance(self, other) < 1e-9
    }

    pub(crate) fn same_space(&self, other: &ShapePoint) -> Result<()> {
        let a = self.coords().shape();
        let b = other.coords().shape();
        if a != b {
            return Err(Error::dims(
                format!("{}x{}", a.0 + 1, a.1),
                format!("{}x{}", b.0 + 1, b.1),
            ));
        }
        Ok(())
    }
}

/// A tangent vector at `base`, in the ambient `(n-1) x m` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: ShapePoint,
    coords: DMatrix<f64>,
}

impl TangentVector {
    pub fn new(base: ShapePoint, coords: DMatrix<f64>) -> Result<Self> {
        if base.coords().shape() != coords.shape() {
            return Err(Error::dims(
                format!("{:?}", base.coords().shape()),
                format!("{:?}", coords.shape()),
            ));
        }
        Ok(Self { base, coords })
    }

    pub fn zero(base: ShapePoint) -> Self {
        let (k, m) = base.coords().shape();
        Self {
            base,
            coords: DMatrix::zeros(k, m),
        }
    }

    pub fn base(&self) -> &ShapePoint {
        &self.base
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    pub fn into_coords(self) -> DMatrix<f64> {
        self.coords
    }

    pub fn norm(&self) -> f64 {
        self.coords.norm()
    }

    pub fn inner(&self, other: &TangentVector) -> f64 {
        self.coords.dot(&other.coords)
    }

    pub fn scaled(&self, factor: f64) -> TangentVector {
        Self {
            base: self.base.clone(),
            coords: &self.coords * factor,
        }
    }
}

/// Basis of the m x m skew-symmetric matrices (rotation generators).
pub fn skew_basis(m: usize) -> Vec<DMatrix<f64>> {
    let mut basis = Vec::new();
    for a in 0..m {
        for b in (a + 1)..m {
            let mut u = DMatrix::zeros(m, m);
            u[(a, b)] = 1.0;
            u[(b, a)] = -1.0;
            basis.push(u);
        }
    }
    basis
}

/// Projects an ambient matrix onto the horizontal tangent space at `base`:
/// orthogonal to the base pre-shape and to its rotation orbit.
pub fn project_horizontal(base: &ShapePoint, v: &DMatrix<f64>) -> DMatrix<f64> {
    let z = base.coords();
    let mut out = v - z * v.dot(z);
    let vertical: Vec<DMatrix<f64>> = skew_basis(z.ncols()).iter().map(|u| z * u).collect();
    let k = vertical.len();
    let gram = DMatrix::from_fn(k, k, |i, j| vertical[i].dot(&vertical[j]));
    let rhs = nalgebra::DVector::from_fn(k, |i, _| vertical[i].dot(&out));
    // The orbit directions may be linearly dependent for degenerate shapes.
    let coef = gram
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .unwrap_or_else(|_| nalgebra::DVector::zeros(k));
    for (dir, c) in vertical.iter().zip(coef.iter()) {
        out -= dir * *c;
    }
    out
}

/// Rotation `O*` in SO(m) minimizing `|z1 - z2 O|_F`.
///
/// Computed from the SVD `z2^T z1 = U S V^T` as `U diag(1, .., det(U V^T)) V^T`.
/// When `z2^T z1` is rank deficient the minimizer is not unique and the one
/// produced by the SVD is returned.
pub fn optimal_rotation(z1: &PreShape, z2: &PreShape) -> DMatrix<f64> {
    optimal_rotation_raw(z1.coords(), z2.coords())
}

pub(crate) fn optimal_rotation_raw(z1: &DMatrix<f64>, z2: &DMatrix<f64>) -> DMatrix<f64> {
    let m = z1.ncols();
    let a = z2.transpose() * z1;
    let svd = a.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let det = (&u * &v_t).determinant();
    let mut d = DMatrix::identity(m, m);
    if det < 0.0 {
        d[(m - 1, m - 1)] = -1.0;
    }
    u * d * v_t
}

/// Target aligned onto a base by the optimal rotation, with the angle between them.
pub(crate) struct Alignment {
    /// `Z2 O*`
    pub aligned: DMatrix<f64>,
    pub rotation: DMatrix<f64>,
    pub theta: f64,
    pub cos_theta: f64,
}

pub(crate) fn align(base: &DMatrix<f64>, target: &DMatrix<f64>) -> Alignment {
    let rotation = optimal_rotation_raw(base, target);
    let aligned = target * &rotation;
    // The chord formula keeps full relative precision for small angles.
    let chord = (base - &aligned).norm();
    let theta = 2.0 * (chord / 2.0).min(1.0).asin();
    let theta = theta.min(std::f64::consts::FRAC_PI_2);
    Alignment {
        aligned,
        rotation,
        theta,
        cos_theta: theta.cos(),
    }
}

/// Geodesic distance `theta = acos <Z1, Z2 O*>` in `[0, pi/2]`.
pub fn geodesic_distance(s1: &ShapePoint, s2: &ShapePoint) -> f64 {
    align(s1.coords(), s2.coords()).theta
}

/// Log map at `base`: `theta / sin(theta) * (Z2 O* - cos(theta) Z1)`.
pub fn log_map(base: &ShapePoint, target: &ShapePoint) -> Result<TangentVector> {
    base.same_space(target)?;
    let al = align(base.coords(), target.coords());
    if al.theta >= std::f64::consts::FRAC_PI_2 - CUT_LOCUS_MARGIN {
        return Err(Error::NearCutLocus { theta: al.theta });
    }
    if al.theta < SMALL_ANGLE {
        return Ok(TangentVector::zero(base.clone()));
    }
    let factor = al.theta / al.theta.sin();
    let coords = (al.aligned - base.coords() * al.cos_theta) * factor;
    Ok(TangentVector {
        base: base.clone(),
        coords,
    })
}

/// Exp map: `cos(|v|) Z + sin(|v|) / |v| * V`.
pub fn exp_map(v: &TangentVector) -> ShapePoint {
    exp_raw(v.base().coords(), v.coords())
}

pub(crate) fn exp_raw(base: &DMatrix<f64>, v: &DMatrix<f64>) -> ShapePoint {
    let t = v.norm();
    if t < SMALL_ANGLE {
        return ShapePoint::new(PreShape {
            coords: base.clone(),
        });
    }
    let p = base * t.cos() + v * (t.sin() / t);
    let norm = p.norm();
    ShapePoint::new(PreShape { coords: p / norm })
}

/// Point at parameter `t` on the geodesic from `s1` (t = 0) to `s2` (t = 1).
pub fn geodesic_point(s1: &ShapePoint, s2: &ShapePoint, t: f64) -> Result<ShapePoint> {
    s1.same_space(s2)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidInput(format!(
            "geodesic parameter {t} outside [0, 1]"
        )));
    }
    let al = align(s1.coords(), s2.coords());
    if al.theta < SMALL_ANGLE {
        return Ok(s1.clone());
    }
    let s = al.theta.sin();
    let p = s1.coords() * (((1.0 - t) * al.theta).sin() / s) + &al.aligned * ((t * al.theta).sin() / s);
    let norm = p.norm();
    Ok(ShapePoint::new(PreShape { coords: p / norm }))
}

/// Full Procrustes distance.
///
/// Planar shapes use the complex form `(1 - |<z1, z2>|^2)^(1/2)`, evaluated as
/// the norm of the residual of projecting `z2` onto the complex line of `z1`.
/// 3D shapes use `sin(theta)`.
pub fn full_procrustes_distance(s1: &ShapePoint, s2: &ShapePoint) -> f64 {
    if s1.dim() == 2 {
        let a = s1.coords();
        let b = s2.coords();
        // <z1, z2> = sum conj(z1_k) z2_k with z = x + i y
        let mut re = 0.0;
        let mut im = 0.0;
        for k in 0..a.nrows() {
            let (x1, y1) = (a[(k, 0)], a[(k, 1)]);
            let (x2, y2) = (b[(k, 0)], b[(k, 1)]);
            re += x1 * x2 + y1 * y2;
            im += x1 * y2 - y1 * x2;
        }
        // residual z2 - z1 <z1, z2>
        let mut sq = 0.0;
        for k in 0..a.nrows() {
            let (x1, y1) = (a[(k, 0)], a[(k, 1)]);
            let rx = b[(k, 0)] - (x1 * re - y1 * im);
            let ry = b[(k, 1)] - (x1 * im + y1 * re);
            sq += rx * rx + ry * ry;
        }
        sq.sqrt().min(1.0)
    } else {
        geodesic_distance(s1, s2).sin()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KarcherOptions {
    pub max_iters: usize,
    /// Stop once the weighted tangent mean has norm below this value.
    pub tol: f64,
}

impl Default for KarcherOptions {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KarcherResult {
    pub mean: ShapePoint,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// `sum_i w_i d(mu, s_i)^2` at the start and after every iteration.
    pub costs: Vec<f64>,
}

/// Weighted Karcher mean via `mu <- exp_mu(sum_i w_i log_mu(s_i))`.
///
/// Weights must sum to one; negative weights are accepted and used as-is in
/// the tangent average.
pub fn weighted_karcher_mean(shapes: &[ShapePoint], weights: &[f64]) -> Result<ShapePoint> {
    Ok(weighted_karcher_mean_with(shapes, weights, KarcherOptions::default())?.mean)
}

pub fn weighted_karcher_mean_with(
    shapes: &[ShapePoint],
    weights: &[f64],
    opts: KarcherOptions,
) -> Result<KarcherResult> {
    if shapes.is_empty() {
        return Err(Error::InvalidInput("Karcher mean of an empty set".into()));
    }
    if weights.len() != shapes.len() {
        return Err(Error::dims(shapes.len(), weights.len()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 || weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "Karcher weights must sum to 1 (got {total})"
        )));
    }
    for s in &shapes[1..] {
        shapes[0].same_space(s)?;
    }

    // Start from the most heavily weighted shape.
    let start = weights
        .iter()
        .enumerate()
        .fold(0, |best, (i, w)| if *w > weights[best] { i } else { best });
    let mut mu = shapes[start].clone();
    let cost = |mu: &ShapePoint| -> f64 {
        shapes
            .iter()
            .zip(weights)
            .map(|(s, w)| w * geodesic_distance(mu, s).powi(2))
            .sum()
    };
    let mut costs = vec![cost(&mu)];
    for iter in 0..=opts.max_iters {
        let (k, m) = mu.coords().shape();
        let mut step = DMatrix::zeros(k, m);
        for (s, w) in shapes.iter().zip(weights) {
            if *w != 0.0 {
                step += log_map(&mu, s)?.coords * *w;
            }
        }
        let gradient_norm = step.norm();
        if gradient_norm < opts.tol {
            return Ok(KarcherResult {
                mean: mu,
                iterations: iter,
                gradient_norm,
                costs,
            });
        }
        if iter == opts.max_iters {
            return Err(Error::NoConvergence {
                what: "weighted Karcher mean",
                iters: iter,
                residual: gradient_norm,
            });
        }
        mu = exp_raw(mu.coords(), &step);
        costs.push(cost(&mu));
    }
    unreachable!()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> LandmarkConfiguration {
        LandmarkConfiguration::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn helmert_rows_are_orthonormal_contrasts() {
        let h = helmert(5);
        let hht = &h * h.transpose();
        assert!((hht - DMatrix::<f64>::identity(4, 4)).norm() < 1e-14);
        for row in h.row_iter() {
            assert!(row.sum().abs() < 1e-14);
        }
    }

    #[test]
    fn triangle_preshape_matches_hand_computation() {
        // H Z with rows (1,-1,0)/sqrt2 and (1,1,-2)/sqrt6
        let s2 = 2f64.sqrt();
        let s6 = 6f64.sqrt();
        let hz = [[-1.0 / s2, 0.0], [1.0 / s6, -2.0 / s6]];
        let norm = (0.5 + 1.0 / 6.0 + 4.0 / 6.0f64).sqrt();
        let p = to_preshape(&triangle()).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((p.coords()[(i, j)] - hz[i][j] / norm).abs() < 1e-15);
            }
        }
        assert!((p.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn translation_and_scale_do_not_change_preshape() {
        let z = triangle();
        let moved = z
            .similarity_transform(&DMatrix::identity(2, 2), 3.0, &[0.7, 0.7])
            .unwrap();
        let a = to_preshape(&z).unwrap();
        let b = to_preshape(&moved).unwrap();
        assert!((a.coords() - b.coords()).norm() < 1e-12);
    }

    #[test]
    fn coincident_landmarks_are_degenerate() {
        let z = LandmarkConfiguration::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]).unwrap();
        assert!(matches!(
            to_preshape(&z),
            Err(Error::DegenerateConfiguration { .. })
        ));
    }

    #[test]
    fn invalid_configurations_are_rejected() {
        assert!(matches!(
            LandmarkConfiguration::new(DMatrix::zeros(5, 4)),
            Err(Error::UnsupportedDim(4))
        ));
        assert!(LandmarkConfiguration::new(DMatrix::zeros(3, 3)).is_err());
        let mut bad = DMatrix::zeros(4, 2);
        bad[(0, 0)] = f64::NAN;
        assert!(LandmarkConfiguration::new(bad).is_err());
    }

    #[test]
    fn identical_shapes_have_identity_rotation_and_zero_distance() {
        let s = ShapePoint::from_configuration(&triangle()).unwrap();
        let o = optimal_rotation(s.representative(), s.representative());
        assert!((o - DMatrix::<f64>::identity(2, 2)).norm() < 1e-12);
        assert!(geodesic_distance(&s, &s) < 1e-12);
        assert!(full_procrustes_distance(&s, &s) < 1e-15);
        assert!(log_map(&s, &s).unwrap().norm() < 1e-12);
    }

    #[test]
    fn orthogonal_planar_shapes_are_at_maximal_distance() {
        // z2^T z1 = 0, so no rotation brings the two closer than pi/2.
        let z1 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let z2 = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        let a = ShapePoint::new(PreShape::from_centered(z1).unwrap());
        let b = ShapePoint::new(PreShape::from_centered(z2).unwrap());
        let theta = geodesic_distance(&a, &b);
        assert!((theta - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!((full_procrustes_distance(&a, &b) - 1.0).abs() < 1e-12);
        assert!(matches!(log_map(&a, &b), Err(Error::NearCutLocus { .. })));
    }

    #[test]
    fn karcher_rejects_bad_weights() {
        let s = ShapePoint::from_configuration(&triangle()).unwrap();
        assert!(weighted_karcher_mean(&[s.clone()], &[0.5]).is_err());
        assert!(weighted_karcher_mean(&[], &[]).is_err());
        let m = weighted_karcher_mean(&[s.clone()], &[1.0]).unwrap();
        assert!(m.approx_eq(&s));
    }

    #[test]
    fn horizontal_projection_is_idempotent_and_horizontal() {
        let z = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, -0.3, 0.1, 0.9, 0.4, -0.5, 0.3, 0.7]);
        let s = ShapePoint::new(PreShape::from_centered(z).unwrap());
        let v = DMatrix::from_row_slice(3, 3, &[0.3, -0.1, 0.2, 0.5, 0.0, -0.4, 0.1, 0.8, 0.6]);
        let p = project_horizontal(&s, &v);
        assert!(p.dot(s.coords()).abs() < 1e-12);
        for u in skew_basis(3) {
            assert!(p.dot(&(s.coords() * u)).abs() < 1e-12);
        }
        let pp = project_horizontal(&s, &p);
        assert!((pp - &p).norm() < 1e-12);
    }
}
