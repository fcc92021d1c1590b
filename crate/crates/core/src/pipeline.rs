//! End-to-end training and prediction.
//!
//! Training builds one dictionary per class from that class's frames, codes
//! every frame against all dictionaries, aligns each code series by DTW to one
//! reference series per class, turns the aligned series into Fourier
//! temporal pyramid features and trains a one-vs-rest linear SVM. Classifier
//! `k` sees the series aligned to the class-`k` reference.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{train_views, Evaluation, LinearModel};
use crate::error::{Error, Result};
use crate::extrinsic::{learn_dictionary_kernel_from, KernelDictionary};
use crate::init::{init_dictionary_with, ClusterOptions};
use crate::intrinsic::{learn_dictionary, Dictionary};
use crate::io::{check_version, load_manifest, load_sequence, read_json, write_json};
use crate::kernel::{select_sigma, SIGMA_GRID};
use crate::shape::{geodesic_distance, PreShape, ShapePoint};
use crate::sparse::{learn_dictionary_euclidean, EuclideanDictionary, SolverOptions};
use crate::temporal::{
    apply_displacement, choose_reference, ftp_features, warp_to_reference, DictionarySet, DisplacementMode,
    SparseSeries, Trajectory,
};

pub const BUNDLE_VERSION: &str = "1.0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodingMode {
    Intrinsic,
    Extrinsic,
    /// Euclidean coding of centered, unit-size landmark coordinates (no
    /// rotation removal); the ablation baseline.
    Linear,
}

impl std::str::FromStr for CodingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "intrinsic" => Ok(Self::Intrinsic),
            "extrinsic" => Ok(Self::Extrinsic),
            "linear" => Ok(Self::Linear),
            _ => Err(Error::InvalidInput(format!("unknown mode '{s}'"))),
        }
    }
}

impl std::fmt::Display for CodingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Intrinsic => "intrinsic",
            Self::Extrinsic => "extrinsic",
            Self::Linear => "linear",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub mode: CodingMode,
    pub lambda: f64,
    /// Kernel bandwidth; `None` picks the largest PSD-validated grid value.
    pub sigma: Option<f64>,
    pub ftp_levels: usize,
    pub ftp_coeffs: usize,
    pub displacement: DisplacementMode,
    /// PGA directions per cluster.
    pub num_components: usize,
    pub svm_c: f64,
    pub seed: u64,
    /// Dictionary-learning iterations; `None` uses the mode default
    /// (0 for intrinsic and extrinsic, 10 for linear).
    pub dict_iters: Option<usize>,
    /// Frames per class used to build dictionaries (evenly subsampled).
    pub max_frames_per_class: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mode: CodingMode::Intrinsic,
            lambda: 0.01,
            sigma: None,
            ftp_levels: 6,
            ftp_coeffs: 4,
            displacement: DisplacementMode::Off,
            num_components: 2,
            svm_c: 1.0,
            seed: crate::init::DEFAULT_SEED,
            dict_iters: None,
            max_frames_per_class: 200,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    fn dict_iters(&self) -> usize {
        self.dict_iters.unwrap_or(match self.mode {
            CodingMode::Linear => 10,
            _ => 0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidInput(format!("sigma must be positive, got {s}")));
            }
        }
        if self.ftp_levels == 0 || self.ftp_levels > 16 || self.ftp_coeffs == 0 {
            return Err(Error::InvalidInput("invalid FTP settings".into()));
        }
        if !(self.svm_c > 0.0) || self.max_frames_per_class < 2 {
            return Err(Error::InvalidInput("invalid SVM C or frame budget".into()));
        }
        Ok(())
    }
}

/// Evenly spaced subset of `0..n` of size at most `max`.
pub fn subsample(n: usize, max: usize) -> Vec<usize> {
    if n <= max {
        (0..n).collect()
    } else {
        (0..max).map(|i| i * n / max).collect()
    }
}

/// Flattened centered, unit-size landmark coordinates of a shape representative.
pub fn linear_features(shape: &ShapePoint) -> Result<DVector<f64>> {
    let config = shape.representative().to_configuration()?;
    Ok(DVector::from_vec(config.to_row_vec()))
}

/// Per-class coders of one mode.
#[derive(Debug, Clone, PartialEq)]
pub enum Coder {
    Shape(DictionarySet),
    Linear(Vec<EuclideanDictionary>),
}

impl Coder {
    fn block_widths(&self) -> Vec<usize> {
        match self {
            Coder::Shape(d) => d.block_widths(),
            Coder::Linear(d) => d.iter().map(|x| x.num_atoms()).collect(),
        }
    }

    /// Per-frame concatenated codes (before any displacement transform).
    pub fn encode(&self, traj: &Trajectory, lambda: f64, classes: &[String]) -> Result<SparseSeries> {
        match self {
            Coder::Shape(d) => crate::temporal::encode_trajectory(traj, d, lambda),
            Coder::Linear(dicts) => {
                let opts = SolverOptions::default();
                let rows: Vec<Vec<f64>> = traj
                    .frames()
                    .par_iter()
                    .enumerate()
                    .map(|(t, f)| {
                        let x = linear_features(f)?;
                        let mut row = Vec::new();
                        for (c, d) in dicts.iter().enumerate() {
                            let code = d.code(&x, lambda, &opts).map_err(|e| Error::Coding {
                                frame: t,
                                class: c,
                                source: Box::new(e),
                            })?;
                            row.extend(code.weights.iter());
                        }
                        Ok(row)
                    })
                    .collect::<Result<_>>()?;
                let codes = DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
                SparseSeries::new(codes, self.block_widths(), classes.to_vec())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: PipelineConfig,
    pub classes: Vec<String>,
    /// `(n, m)` of the training landmarks.
    pub landmarks: (usize, usize),
    /// Kernel bandwidth actually used (0 for the linear mode).
    pub sigma: f64,
    pub coder: Coder,
    /// One reference series per class (after the displacement transform).
    pub references: Vec<SparseSeries>,
    pub classifier: LinearModel,
}

/// Everything needed to rebuild dictionaries for a set of labelled trajectories.
pub struct DictionaryTraining {
    pub classes: Vec<String>,
    pub sigma: f64,
    pub coder: Coder,
}

fn class_index(classes: &[String], label: &Option<String>) -> Result<usize> {
    let l = label
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("trajectory without a label".into()))?;
    classes
        .iter()
        .position(|c| c == l)
        .ok_or_else(|| Error::InvalidInput(format!("unknown label '{l}'")))
}

/// Bandwidth from the config, or the largest grid value whose Gram matrix
/// over (at most 200) of `shapes` is PSD.
pub fn resolve_sigma(config: &PipelineConfig, shapes: &[ShapePoint]) -> Result<f64> {
    if let Some(s) = config.sigma {
        return Ok(s);
    }
    let idx = subsample(shapes.len(), 200);
    let sample: Vec<ShapePoint> = idx.iter().map(|&i| shapes[i].clone()).collect();
    let (best, reports) = select_sigma(&sample, &SIGMA_GRID)?;
    for (s, r) in &reports {
        log::info!("sigma {s}: min eigenvalue {:e}", r.min_eigenvalue);
    }
    best.ok_or_else(|| Error::NotPsd {
        min_eigenvalue: reports
            .iter()
            .map(|r| r.1.min_eigenvalue)
            .fold(f64::INFINITY, f64::min),
    })
}

/// Builds the per-class coders from labelled training trajectories.
pub fn train_dictionaries(train: &[Trajectory], config: &PipelineConfig) -> Result<DictionaryTraining> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidInput("no training trajectories".into()));
    }
    let classes: Vec<String> = train
        .iter()
        .map(|t| t.label.clone().ok_or_else(|| Error::InvalidInput("trajectory without a label".into())))
        .collect::<Result<BTreeSet<_>>>()?
        .into_iter()
        .collect();
    let shape0 = train[0].landmark_shape();
    if let Some(t) = train.iter().find(|t| t.landmark_shape() != shape0) {
        return Err(Error::dims(format!("{shape0:?}"), format!("{:?}", t.landmark_shape())));
    }

    // Frames per class, evenly subsampled.
    let per_class: Vec<Vec<ShapePoint>> = classes
        .iter()
        .map(|c| {
            let frames: Vec<&ShapePoint> = train
                .iter()
                .filter(|t| t.label.as_deref() == Some(c.as_str()))
                .flat_map(|t| t.frames())
                .collect();
            subsample(frames.len(), config.max_frames_per_class)
                .into_iter()
                .map(|i| frames[i].clone())
                .collect()
        })
        .collect();
    let iters = config.dict_iters();

    if config.mode == CodingMode::Linear {
        let n_atoms = 2 * config.num_components + 1;
        let opts = SolverOptions::default();
        let dicts = per_class
            .iter()
            .map(|frames| {
                let samples = frames.iter().map(linear_features).collect::<Result<Vec<_>>>()?;
                let n = n_atoms.min(samples.len());
                Ok(learn_dictionary_euclidean(&samples, n, config.lambda, iters.max(1), &opts)?.dictionary)
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(DictionaryTraining {
            classes,
            sigma: 0.0,
            coder: Coder::Linear(dicts),
        });
    }

    let all: Vec<ShapePoint> = per_class.iter().flatten().cloned().collect();
    let sigma = resolve_sigma(config, &all)?;
    let cluster_opts = ClusterOptions {
        seed: config.seed,
        ..ClusterOptions::default()
    };
    let labels: Vec<String> = per_class
        .iter()
        .zip(&classes)
        .flat_map(|(f, c)| std::iter::repeat_n(c.clone(), f.len()))
        .collect();
    let init = init_dictionary_with(&all, &labels, sigma, config.num_components, config.lambda, &cluster_opts)?;

    let coder = match config.mode {
        CodingMode::Intrinsic => {
            let dicts = if iters == 0 {
                init
            } else {
                init.iter()
                    .zip(&per_class)
                    .map(|(d, frames)| Ok(learn_dictionary(frames, d, config.lambda, iters)?.dictionary))
                    .collect::<Result<Vec<Dictionary>>>()?
            };
            Coder::Shape(DictionarySet::Intrinsic(dicts))
        }
        CodingMode::Extrinsic => {
            let dicts = init
                .iter()
                .zip(&per_class)
                .zip(&classes)
                .map(|((d, frames), c)| {
                    // Anchor each initial atom at its nearest training frame.
                    let mut anchors: Vec<usize> = Vec::new();
                    for atom in d.atoms() {
                        let nearest = (0..frames.len())
                            .min_by(|&a, &b| {
                                geodesic_distance(atom, &frames[a]).total_cmp(&geodesic_distance(atom, &frames[b]))
                            })
                            .unwrap();
                        if !anchors.contains(&nearest) {
                            anchors.push(nearest);
                        }
                    }
                    Ok(learn_dictionary_kernel_from(frames, &anchors, config.lambda, sigma, iters, Some(c.clone()))?
                        .dictionary)
                })
                .collect::<Result<Vec<KernelDictionary>>>()?;
            Coder::Shape(DictionarySet::Extrinsic(dicts))
        }
        CodingMode::Linear => unreachable!(),
    };
    Ok(DictionaryTraining { classes, sigma, coder })
}

/// Code series of every trajectory against the coder, displacement applied.
fn encode_all(coder: &Coder, trajs: &[Trajectory], config: &PipelineConfig, classes: &[String]) -> Result<Vec<SparseSeries>> {
    trajs
        .iter()
        .map(|t| apply_displacement(&coder.encode(t, config.lambda, classes)?, config.displacement))
        .collect()
}

fn views_of(series: &SparseSeries, references: &[SparseSeries], config: &PipelineConfig) -> Result<Vec<DVector<f64>>> {
    references
        .iter()
        .map(|r| {
            let warped = warp_to_reference(series, r)?;
            Ok(ftp_features(&warped, config.ftp_levels, config.ftp_coeffs)?.values)
        })
        .collect()
}

pub fn fit(train: &[Trajectory], config: &PipelineConfig) -> Result<Model> {
    let dicts = train_dictionaries(train, config)?;
    fit_with_dictionaries(train, config, dicts)
}

pub fn fit_with_dictionaries(train: &[Trajectory], config: &PipelineConfig, dicts: DictionaryTraining) -> Result<Model> {
    let DictionaryTraining { classes, sigma, coder } = dicts;
    let labels: Vec<usize> = train
        .iter()
        .map(|t| class_index(&classes, &t.label))
        .collect::<Result<_>>()?;
    let series = encode_all(&coder, train, config, &classes)?;
    let references = (0..classes.len())
        .map(|c| {
            let members: Vec<SparseSeries> = (0..train.len())
                .filter(|&i| labels[i] == c)
                .map(|i| series[i].clone())
                .collect();
            Ok(members[choose_reference(&members)?].clone())
        })
        .collect::<Result<Vec<_>>>()?;
    let per_sample: Vec<Vec<DVector<f64>>> = series
        .par_iter()
        .map(|s| views_of(s, &references, config))
        .collect::<Result<_>>()?;
    let views: Vec<Vec<DVector<f64>>> = (0..classes.len())
        .map(|c| per_sample.iter().map(|v| v[c].clone()).collect())
        .collect();
    let classifier = train_views(&views, &labels, config.svm_c)?;
    Ok(Model {
        config: config.clone(),
        classes,
        landmarks: train[0].landmark_shape(),
        sigma,
        coder,
        references,
        classifier,
    })
}

impl Model {
    /// Per-frame codes of one trajectory (no displacement transform).
    pub fn encode(&self, traj: &Trajectory) -> Result<SparseSeries> {
        if traj.landmark_shape() != self.landmarks {
            return Err(Error::dims(format!("{:?}", self.landmarks), format!("{:?}", traj.landmark_shape())));
        }
        self.coder.encode(traj, self.config.lambda, &self.classes)
    }

    /// Per-class feature views of one trajectory.
    pub fn features(&self, traj: &Trajectory) -> Result<Vec<DVector<f64>>> {
        let series = apply_displacement(&self.encode(traj)?, self.config.displacement)?;
        views_of(&series, &self.references, &self.config)
    }

    /// Predicted class index and per-class scores.
    pub fn predict(&self, traj: &Trajectory) -> Result<(usize, Vec<f64>)> {
        self.classifier.predict_views(&self.features(traj)?)
    }

    pub fn evaluate(&self, test: &[Trajectory]) -> Result<Evaluation> {
        let actual: Vec<usize> = test
            .iter()
            .map(|t| class_index(&self.classes, &t.label))
            .collect::<Result<_>>()?;
        let predicted: Vec<usize> = test
            .par_iter()
            .map(|t| self.predict(t).map(|p| p.0))
            .collect::<Result<_>>()?;
        Evaluation::from_predictions(&actual, &predicted, self.classes.len())
    }

    pub fn to_bundle(&self) -> ModelBundle {
        ModelBundle {
            version: BUNDLE_VERSION.to_string(),
            config: self.config.clone(),
            classes: self.classes.clone(),
            landmarks: [self.landmarks.0, self.landmarks.1],
            sigma: self.sigma,
            dictionaries: store_coder(&self.coder),
            references: self.references.iter().map(StoredSeries::from_series).collect(),
            classifier: self.classifier.clone(),
        }
    }

    pub fn from_bundle(bundle: ModelBundle) -> Result<Self> {
        check_version(&bundle.version, BUNDLE_VERSION)?;
        let coder = restore_coder(&bundle.dictionaries)?;
        let references = bundle
            .references
            .iter()
            .map(StoredSeries::to_series)
            .collect::<Result<Vec<_>>>()?;
        if references.len() != bundle.classes.len() || bundle.classifier.num_classes() != bundle.classes.len() {
            return Err(Error::InvalidInput("bundle class counts disagree".into()));
        }
        Ok(Self {
            config: bundle.config,
            classes: bundle.classes,
            landmarks: (bundle.landmarks[0], bundle.landmarks[1]),
            sigma: bundle.sigma,
            coder,
            references,
            classifier: bundle.classifier,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, &self.to_bundle())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bundle(ModelBundle::load(path)?)
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl StoredMatrix {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::dims(self.rows * self.cols, self.data.len()));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredSeries {
    pub codes: StoredMatrix,
    pub blocks: Vec<usize>,
    pub meta: Vec<String>,
}

impl StoredSeries {
    fn from_series(s: &SparseSeries) -> Self {
        Self {
            codes: StoredMatrix::from_matrix(&s.codes),
            blocks: s.blocks.clone(),
            meta: s.meta.clone(),
        }
    }

    fn to_series(&self) -> Result<SparseSeries> {
        SparseSeries::new(self.codes.to_matrix()?, self.blocks.clone(), self.meta.clone())
    }
}

/// Dictionaries as stored in a bundle. Shapes are stored as their pre-shape
/// representatives (`(n-1) x m` Helmert coordinates), so reloading is exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StoredDictionary {
    Intrinsic {
        label: Option<String>,
        lambda: f64,
        atoms: Vec<StoredMatrix>,
    },
    Extrinsic {
        label: Option<String>,
        sigma: f64,
        anchors: Vec<StoredMatrix>,
        coefficients: StoredMatrix,
    },
    Linear {
        atoms: StoredMatrix,
    },
}

fn store_shape(s: &ShapePoint) -> StoredMatrix {
    StoredMatrix::from_matrix(s.coords())
}

fn restore_shape(m: &StoredMatrix) -> Result<ShapePoint> {
    Ok(ShapePoint::new(PreShape::from_unit(m.to_matrix()?)?))
}

pub fn store_coder(coder: &Coder) -> Vec<StoredDictionary> {
    match coder {
        Coder::Shape(DictionarySet::Intrinsic(d)) => d
            .iter()
            .map(|x| StoredDictionary::Intrinsic {
                label: x.class_label().map(str::to_string),
                lambda: x.lambda(),
                atoms: x.atoms().iter().map(store_shape).collect(),
            })
            .collect(),
        Coder::Shape(DictionarySet::Extrinsic(d)) => d
            .iter()
            .map(|x| StoredDictionary::Extrinsic {
                label: x.class_label().map(str::to_string),
                sigma: x.sigma(),
                anchors: x.anchors().iter().map(store_shape).collect(),
                coefficients: StoredMatrix::from_matrix(x.coefficients()),
            })
            .collect(),
        Coder::Linear(d) => d
            .iter()
            .map(|x| StoredDictionary::Linear {
                atoms: StoredMatrix::from_matrix(&x.atoms),
            })
            .collect(),
    }
}

pub fn restore_coder(stored: &[StoredDictionary]) -> Result<Coder> {
    let first = stored
        .first()
        .ok_or_else(|| Error::InvalidDictionary("bundle has no dictionaries".into()))?;
    match first {
        StoredDictionary::Intrinsic { .. } => {
            let dicts = stored
                .iter()
                .map(|s| match s {
                    StoredDictionary::Intrinsic { label, lambda, atoms } => Dictionary::new(
                        atoms.iter().map(restore_shape).collect::<Result<_>>()?,
                        label.clone(),
                        *lambda,
                    ),
                    _ => Err(Error::InvalidDictionary("mixed dictionary kinds".into())),
                })
                .collect::<Result<_>>()?;
            Ok(Coder::Shape(DictionarySet::Intrinsic(dicts)))
        }
        StoredDictionary::Extrinsic { .. } => {
            let dicts = stored
                .iter()
                .map(|s| match s {
                    StoredDictionary::Extrinsic {
                        label,
                        sigma,
                        anchors,
                        coefficients,
                    } => KernelDictionary::new(
                        anchors.iter().map(restore_shape).collect::<Result<_>>()?,
                        coefficients.to_matrix()?,
                        *sigma,
                        label.clone(),
                    ),
                    _ => Err(Error::InvalidDictionary("mixed dictionary kinds".into())),
                })
                .collect::<Result<_>>()?;
            Ok(Coder::Shape(DictionarySet::Extrinsic(dicts)))
        }
        StoredDictionary::Linear { .. } => {
            let dicts = stored
                .iter()
                .map(|s| match s {
                    StoredDictionary::Linear { atoms } => Ok(EuclideanDictionary {
                        atoms: atoms.to_matrix()?,
                    }),
                    _ => Err(Error::InvalidDictionary("mixed dictionary kinds".into())),
                })
                .collect::<Result<_>>()?;
            Ok(Coder::Linear(dicts))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub version: String,
    pub config: PipelineConfig,
    pub classes: Vec<String>,
    pub landmarks: [usize; 2],
    pub sigma: f64,
    pub dictionaries: Vec<StoredDictionary>,
    pub references: Vec<StoredSeries>,
    pub classifier: LinearModel,
}

#[derive(Deserialize)]
struct VersionProbe {
    version: String,
}

impl ModelBundle {
    /// Reads a bundle, checking the format version before anything else.
    pub fn load(path: &Path) -> Result<Self> {
        let probe: VersionProbe = read_json(path)?;
        check_version(&probe.version, BUNDLE_VERSION)?;
        read_json(path)
    }
}

/// Dictionaries without a classifier, as written by `train-dict`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryBundle {
    pub version: String,
    pub config: PipelineConfig,
    pub classes: Vec<String>,
    pub sigma: f64,
    pub dictionaries: Vec<StoredDictionary>,
}

impl DictionaryBundle {
    pub fn new(config: &PipelineConfig, dicts: &DictionaryTraining) -> Self {
        Self {
            version: BUNDLE_VERSION.to_string(),
            config: config.clone(),
            classes: dicts.classes.clone(),
            sigma: dicts.sigma,
            dictionaries: store_coder(&dicts.coder),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let probe: VersionProbe = read_json(path)?;
        check_version(&probe.version, BUNDLE_VERSION)?;
        read_json(path)
    }

    pub fn into_training(self) -> Result<DictionaryTraining> {
        Ok(DictionaryTraining {
            classes: self.classes,
            sigma: self.sigma,
            coder: restore_coder(&self.dictionaries)?,
        })
    }
}

/// Loads the trajectories of a manifest; manifest labels override file labels
/// and the manifest group becomes the source id when the file has none.
pub fn load_trajectories(manifest: &Path) -> Result<Vec<Trajectory>> {
    load_manifest(manifest)?
        .into_par_iter()
        .map(|e| {
            let seq = load_sequence(&e.path)?;
            let mut traj = seq.to_trajectory()?;
            traj.label = Some(e.label.clone());
            if traj.source_id.is_empty() {
                traj.source_id = e.group.clone();
            }
            Ok(traj)
        })
        .collect()
}
