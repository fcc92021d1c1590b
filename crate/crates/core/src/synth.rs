//! Synthetic labelled landmark sequences.
//!
//! Every class owns a base shape and a smooth closed curve of tangent vectors
//! at that base (a few random Fourier harmonics). A trajectory samples the
//! curve through a random monotone time warp, perturbs each frame with tangent
//! noise and finally applies one random similarity transform to all of its
//! landmark frames, so only shape carries class information.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{write_manifest, write_sequence, ManifestEntry, SequenceFile};
use crate::shape::{exp_raw, project_horizontal, PreShape, ShapePoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub per_class: usize,
    pub min_length: usize,
    pub max_length: usize,
    pub landmarks: usize,
    pub dim: usize,
    /// Standard deviation of the per-coordinate tangent noise added to every frame.
    pub noise: f64,
    /// Time-warp strength in `[0, 0.9]`.
    pub warp: f64,
    /// Geodesic distance of each class base from the common template.
    pub class_spread: f64,
    /// Tangent norm of each Fourier harmonic of the class curve.
    pub curve_amplitude: f64,
    pub harmonics: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_classes: 4,
            per_class: 20,
            min_length: 30,
            max_length: 50,
            landmarks: 15,
            dim: 3,
            noise: 0.03,
            warp: 0.5,
            class_spread: 0.4,
            curve_amplitude: 0.2,
            harmonics: 2,
            seed: 42,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return Err(Error::UnsupportedDim(self.dim));
        }
        if self.landmarks < self.dim + 1 || self.landmarks < 3 {
            return Err(Error::InvalidInput(format!(
                "{} landmarks are too few for dimension {}",
                self.landmarks, self.dim
            )));
        }
        if self.num_classes == 0 || self.per_class == 0 {
            return Err(Error::InvalidInput("need at least one class and one trajectory".into()));
        }
        if self.min_length < 2 || self.max_length < self.min_length {
            return Err(Error::InvalidInput(format!(
                "invalid length range {}..={}",
                self.min_length, self.max_length
            )));
        }
        if !(0.0..=0.9).contains(&self.warp) {
            return Err(Error::InvalidInput(format!("warp must lie in [0, 0.9], got {}", self.warp)));
        }
        if !(self.noise >= 0.0) || !(self.class_spread >= 0.0) || !(self.curve_amplitude >= 0.0) {
            return Err(Error::InvalidInput("noise and amplitudes must be non-negative".into()));
        }
        Ok(())
    }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Random horizontal tangent vector at `base` with the given norm.
fn random_tangent(rng: &mut ChaCha8Rng, base: &ShapePoint, norm: f64) -> DMatrix<f64> {
    let (r, c) = base.coords().shape();
    let v = project_horizontal(base, &gaussian_matrix(rng, r, c));
    let n = v.norm();
    if n < 1e-12 {
        v
    } else {
        v * (norm / n)
    }
}

/// Haar-distributed rotation in SO(m).
pub fn random_rotation(rng: &mut ChaCha8Rng, m: usize) -> DMatrix<f64> {
    let qr = gaussian_matrix(rng, m, m).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..m {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    q
}

struct ClassModel {
    base: ShapePoint,
    /// `(sin, cos)` tangent coefficients per harmonic.
    harmonics: Vec<(DMatrix<f64>, DMatrix<f64>)>,
}

impl ClassModel {
    fn tangent(&self, u: f64) -> DMatrix<f64> {
        let (r, c) = self.base.coords().shape();
        let mut v = DMatrix::zeros(r, c);
        for (k, (a, b)) in self.harmonics.iter().enumerate() {
            let w = 2.0 * PI * (k + 1) as f64 * u;
            v += a * w.sin() + b * (w.cos() - 1.0);
        }
        v
    }
}

/// Generates `num_classes * per_class` sequences, class by class. Labels are
/// `c0, c1, ...`; source ids `c{class}_t{index}`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<SequenceFile>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let template = ShapePoint::new(PreShape::from_centered(gaussian_matrix(
        &mut rng,
        spec.landmarks - 1,
        spec.dim,
    ))?);
    let classes: Vec<ClassModel> = (0..spec.num_classes)
        .map(|_| {
            let v = random_tangent(&mut rng, &template, spec.class_spread);
            let base = exp_raw(template.coords(), &v);
            let harmonics = (0..spec.harmonics)
                .map(|_| {
                    (
                        random_tangent(&mut rng, &base, spec.curve_amplitude),
                        random_tangent(&mut rng, &base, spec.curve_amplitude),
                    )
                })
                .collect();
            ClassModel { base, harmonics }
        })
        .collect();

    let mut out = Vec::with_capacity(spec.num_classes * spec.per_class);
    for (c, class) in classes.iter().enumerate() {
        for t in 0..spec.per_class {
            let len = rng.random_range(spec.min_length..=spec.max_length);
            let a = spec.warp * rng.random_range(-1.0..=1.0);
            let rotation = random_rotation(&mut rng, spec.dim);
            let scale = rng.random_range(0.5..=2.0);
            let translation: Vec<f64> = (0..spec.dim).map(|_| rng.random_range(-5.0..=5.0)).collect();
            let mut frames = Vec::with_capacity(len);
            for f in 0..len {
                let u = f as f64 / (len - 1) as f64;
                let tau = u + a * (2.0 * PI * u).sin() / (2.0 * PI);
                let clean = exp_raw(class.base.coords(), &class.tangent(tau));
                let (r, cc) = clean.coords().shape();
                let noise = project_horizontal(&clean, &(gaussian_matrix(&mut rng, r, cc) * spec.noise));
                let shape = exp_raw(clean.coords(), &noise);
                frames.push(
                    shape
                        .representative()
                        .to_configuration()?
                        .similarity_transform(&rotation, scale, &translation)?,
                );
            }
            out.push(SequenceFile {
                frames,
                label: Some(format!("c{c}")),
                source_id: Some(format!("c{c}_t{t:03}")),
            });
        }
    }
    Ok(out)
}

/// First half of each class (in generation order) for training, the rest for testing.
pub fn split_half(sequences: &[SequenceFile]) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut labels: Vec<&Option<String>> = sequences.iter().map(|s| &s.label).collect();
    labels.dedup();
    for label in labels {
        let idx: Vec<usize> = (0..sequences.len()).filter(|&i| &sequences[i].label == label).collect();
        let half = idx.len().div_ceil(2);
        train.extend_from_slice(&idx[..half]);
        test.extend_from_slice(&idx[half..]);
    }
    (train, test)
}

/// Writes one `.seq` file per trajectory and `all.txt`, `train.txt`, `test.txt`
/// manifests into `dir`.
pub fn write_synthetic(dir: &Path, spec: &SyntheticSpec) -> Result<Vec<SequenceFile>> {
    std::fs::create_dir_all(dir)?;
    let sequences = generate_synthetic(spec)?;
    let mut entries = Vec::with_capacity(sequences.len());
    for seq in &sequences {
        let id = seq.source_id.clone().unwrap_or_default();
        let path = dir.join(format!("{id}.seq"));
        write_sequence(&path, seq)?;
        entries.push(ManifestEntry {
            path,
            label: seq.label.clone().unwrap_or_default(),
            group: id,
        });
    }
    let (train, test) = split_half(&sequences);
    let pick = |idx: &[usize]| idx.iter().map(|&i| entries[i].clone()).collect::<Vec<_>>();
    write_manifest(&dir.join("all.txt"), &entries)?;
    write_manifest(&dir.join("train.txt"), &pick(&train))?;
    write_manifest(&dir.join("test.txt"), &pick(&test))?;
    Ok(sequences)
}
