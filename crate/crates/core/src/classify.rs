//! One-vs-rest linear SVM (L2-regularized hinge loss) trained by dual
//! coordinate descent, with per-feature standardization.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_C: f64 = 1.0;
pub const GAP_TOL: f64 = 1e-4;
/// Relative gap target; [`GAP_TOL`] caps it for large objectives.
const REL_GAP: f64 = 1e-10;
const MAX_PASSES: usize = 200_000;

/// Solution of one binary problem on bias-augmented features.
#[derive(Debug, Clone)]
pub struct BinarySolution {
    /// Weights followed by the bias.
    pub weights: DVector<f64>,
    pub primal: f64,
    pub dual: f64,
    pub passes: usize,
}

fn augmented_dot(w: &DVector<f64>, x: &DVector<f64>) -> f64 {
    let d = x.len();
    w.rows(0, d).dot(x) + w[d]
}

/// `0.5 |w|^2 + C sum_i max(0, 1 - y_i (w^T x_i + b))`, bias included in `|w|`.
pub fn primal_objective(w: &DVector<f64>, x: &[DVector<f64>], y: &[f64], c: f64) -> f64 {
    let hinge: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (1.0 - yi * augmented_dot(w, xi)).max(0.0))
        .sum();
    0.5 * w.norm_squared() + c * hinge
}

/// Dual coordinate descent in a fixed sample order until the duality gap
/// drops below `REL_GAP * max(primal, 1)`, never more than [`GAP_TOL`]. Targets must be +-1.
pub fn train_binary(x: &[DVector<f64>], y: &[f64], c: f64) -> Result<BinarySolution> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::dims(x.len(), y.len()));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidInput(format!("C must be positive, got {c}")));
    }
    let d = x[0].len();
    let n = x.len();
    let q: Vec<f64> = x.iter().map(|xi| xi.norm_squared() + 1.0).collect();
    let mut alpha = vec![0.0; n];
    let mut w = DVector::zeros(d + 1);
    let mut primal = f64::INFINITY;
    let mut dual = 0.0;
    for pass in 1..=MAX_PASSES {
        for i in 0..n {
            let g = y[i] * augmented_dot(&w, &x[i]) - 1.0;
            let pg = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= c {
                g.max(0.0)
            } else {
                g
            };
            if pg.abs() > 1e-14 {
                let old = alpha[i];
                alpha[i] = (old - g / q[i]).clamp(0.0, c);
                let delta = (alpha[i] - old) * y[i];
                if delta != 0.0 {
                    let mut head = w.rows_mut(0, d);
                    head.axpy(delta, &x[i], 1.0);
                    w[d] += delta;
                }
            }
        }
        primal = primal_objective(&w, x, y, c);
        dual = alpha.iter().sum::<f64>() - 0.5 * w.norm_squared();
        if primal - dual < GAP_TOL.min(REL_GAP * primal.max(1.0)) {
            return Ok(BinarySolution {
                weights: w,
                primal,
                dual,
                passes: pass,
            });
        }
    }
    log::warn!("SVM stopped with duality gap {:e}", primal - dual);
    Ok(BinarySolution {
        weights: w,
        primal,
        dual,
        passes: MAX_PASSES,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl BinaryModel {
    pub fn decision(&self, x: &DVector<f64>) -> f64 {
        let mut s = self.bias;
        for j in 0..x.len() {
            s += self.weights[j] * (x[j] - self.mean[j]) / self.scale[j];
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub c: f64,
    pub feature_dim: usize,
    /// One binary classifier per class, in class-index order.
    pub classes: Vec<BinaryModel>,
}

/// Per-dimension mean and (population) standard deviation; zero spread maps to 1.
pub fn standardization(features: &[DVector<f64>]) -> (Vec<f64>, Vec<f64>) {
    let d = features[0].len();
    let n = features.len() as f64;
    let mut mean = vec![0.0; d];
    for f in features {
        for j in 0..d {
            mean[j] += f[j];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for f in features {
        for j in 0..d {
            var[j] += (f[j] - mean[j]).powi(2);
        }
    }
    let scale = var
        .iter()
        .map(|v| {
            let s = (v / n).sqrt();
            if s > 1e-12 {
                s
            } else {
                1.0
            }
        })
        .collect();
    (mean, scale)
}

fn check_features(features: &[DVector<f64>], labels: &[usize]) -> Result<(usize, usize)> {
    if features.is_empty() {
        return Err(Error::InvalidInput("no training features".into()));
    }
    if features.len() != labels.len() {
        return Err(Error::dims(features.len(), labels.len()));
    }
    let d = features[0].len();
    if let Some(f) = features.iter().find(|f| f.len() != d) {
        return Err(Error::dims(d, f.len()));
    }
    if features.iter().any(|f| f.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidInput("non-finite feature value".into()));
    }
    let q = labels.iter().max().unwrap() + 1;
    if q < 2 {
        return Err(Error::DegenerateLabels("need at least 2 classes".into()));
    }
    for c in 0..q {
        let count = labels.iter().filter(|&&l| l == c).count();
        if count == 0 || count == labels.len() {
            return Err(Error::DegenerateLabels(format!(
                "class {c} has {count} of {} samples",
                labels.len()
            )));
        }
    }
    Ok((q, d))
}

fn train_one(features: &[DVector<f64>], labels: &[usize], class: usize, c: f64) -> Result<BinaryModel> {
    let (mean, scale) = standardization(features);
    let x: Vec<DVector<f64>> = features
        .iter()
        .map(|f| DVector::from_fn(f.len(), |j, _| (f[j] - mean[j]) / scale[j]))
        .collect();
    let y: Vec<f64> = labels.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect();
    let sol = train_binary(&x, &y, c)?;
    let d = mean.len();
    Ok(BinaryModel {
        weights: sol.weights.rows(0, d).iter().copied().collect(),
        bias: sol.weights[d],
        mean,
        scale,
    })
}

/// Labels are class indices `0..q`.
pub fn train(features: &[DVector<f64>], labels: &[usize], c: f64) -> Result<LinearModel> {
    let (q, d) = check_features(features, labels)?;
    let classes = (0..q)
        .into_par_iter()
        .map(|k| train_one(features, labels, k, c))
        .collect::<Result<_>>()?;
    Ok(LinearModel {
        c,
        feature_dim: d,
        classes,
    })
}

/// Like [`train`], but classifier `k` sees `views[k]` (one feature list per class).
pub fn train_views(views: &[Vec<DVector<f64>>], labels: &[usize], c: f64) -> Result<LinearModel> {
    let (q, d) = check_features(views.first().map(|v| v.as_slice()).unwrap_or(&[]), labels)?;
    if views.len() != q {
        return Err(Error::dims(format!("{q} views"), views.len()));
    }
    for v in views {
        check_features(v, labels)?;
        if v[0].len() != d {
            return Err(Error::dims(d, v[0].len()));
        }
    }
    let classes = (0..q)
        .into_par_iter()
        .map(|k| train_one(&views[k], labels, k, c))
        .collect::<Result<_>>()?;
    Ok(LinearModel {
        c,
        feature_dim: d,
        classes,
    })
}

impl LinearModel {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Predicted class and per-class decision values; ties go to the smallest index.
    pub fn predict(&self, feature: &DVector<f64>) -> Result<(usize, Vec<f64>)> {
        if feature.len() != self.feature_dim {
            return Err(Error::dims(self.feature_dim, feature.len()));
        }
        let scores: Vec<f64> = self.classes.iter().map(|m| m.decision(feature)).collect();
        Ok((argmax(&scores), scores))
    }

    /// Prediction when classifier `k` reads `views[k]`.
    pub fn predict_views(&self, views: &[DVector<f64>]) -> Result<(usize, Vec<f64>)> {
        if views.len() != self.classes.len() {
            return Err(Error::dims(self.classes.len(), views.len()));
        }
        let mut scores = Vec::with_capacity(views.len());
        for (m, v) in self.classes.iter().zip(views) {
            if v.len() != self.feature_dim {
                return Err(Error::dims(self.feature_dim, v.len()));
            }
            scores.push(m.decision(v));
        }
        Ok((argmax(&scores), scores))
    }
}

pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// Rows are actual classes, columns predicted ones.
    pub confusion: Vec<Vec<usize>>,
}

impl Evaluation {
    pub fn from_predictions(actual: &[usize], predicted: &[usize], num_classes: usize) -> Result<Self> {
        if actual.is_empty() || actual.len() != predicted.len() {
            return Err(Error::dims(actual.len(), predicted.len()));
        }
        let mut confusion = vec![vec![0usize; num_classes]; num_classes];
        let mut correct = 0;
        for (a, p) in actual.iter().zip(predicted) {
            if *a >= num_classes || *p >= num_classes {
                return Err(Error::InvalidInput(format!("class index out of range ({a}, {p})")));
            }
            confusion[*a][*p] += 1;
            if a == p {
                correct += 1;
            }
        }
        Ok(Self {
            accuracy: correct as f64 / actual.len() as f64,
            confusion,
        })
    }

    /// Confusion rows as percentages of each actual class.
    pub fn row_percentages(&self) -> Vec<Vec<f64>> {
        self.confusion
            .iter()
            .map(|row| {
                let total: usize = row.iter().sum();
                row.iter()
                    .map(|v| if total == 0 { 0.0 } else { 100.0 * *v as f64 / total as f64 })
                    .collect()
            })
            .collect()
    }
}

pub fn evaluate(model: &LinearModel, features: &[DVector<f64>], labels: &[usize]) -> Result<Evaluation> {
    let predicted = features
        .iter()
        .map(|f| model.predict(f).map(|p| p.0))
        .collect::<Result<Vec<_>>>()?;
    Evaluation::from_predictions(labels, &predicted, model.num_classes())
}

/// `k` folds of a seeded permutation of `0..n`, as `(train, test)` index lists.
pub fn k_fold(n: usize, k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 || k > n {
        return Err(Error::InvalidInput(format!("cannot split {n} samples into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok((0..k)
        .map(|f| {
            let test: Vec<usize> = order.iter().copied().skip(f).step_by(k).collect();
            let train = order.iter().copied().filter(|i| !test.contains(i)).collect();
            (train, test)
        })
        .collect())
}

/// One split per distinct group (in sorted order): that group is the test set.
pub fn leave_one_group_out(groups: &[String]) -> Vec<(String, Vec<usize>, Vec<usize>)> {
    let mut names: Vec<&String> = groups.iter().collect();
    names.sort();
    names.dedup();
    names
        .into_iter()
        .map(|g| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..groups.len()).partition(|&i| &groups[i] == g);
            (g.clone(), train, test)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_go_to_the_first_class() {
        assert_eq!(argmax(&[0.0, 0.0, 0.0]), 0);
        assert_eq!(argmax(&[-1.0, 2.0, 2.0]), 1);
    }

    #[test]
    fn separable_points_are_learned() {
        let features: Vec<DVector<f64>> = vec![
            DVector::from_vec(vec![1.0, 0.1]),
            DVector::from_vec(vec![1.1, -0.1]),
            DVector::from_vec(vec![-1.0, 0.05]),
            DVector::from_vec(vec![-0.9, -0.1]),
        ];
        let labels = vec![0, 0, 1, 1];
        let model = train(&features, &labels, 1.0).unwrap();
        let eval = evaluate(&model, &features, &labels).unwrap();
        assert_eq!(eval.accuracy, 1.0);
        assert!(model.predict(&DVector::zeros(3)).is_err());
    }

    #[test]
    fn degenerate_labels_are_rejected() {
        let f = vec![DVector::from_vec(vec![1.0]), DVector::from_vec(vec![2.0])];
        assert!(matches!(train(&f, &[0, 0], 1.0), Err(Error::DegenerateLabels(_))));
        assert!(matches!(train(&f, &[0, 2], 1.0), Err(Error::DegenerateLabels(_))));
    }

    #[test]
    fn splitters_cover_every_sample_once() {
        let folds = k_fold(10, 3, 1).unwrap();
        let mut seen: Vec<usize> = folds.iter().flat_map(|f| f.1.clone()).collect();
        seen.sort();
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
        let groups: Vec<String> = ["b", "a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let splits = leave_one_group_out(&groups);
        assert_eq!(splits.len(), 3);
        assert_eq!(splits[1].2, vec![0, 2]);
    }
}
