//! Trajectory features: per-frame codes against every class dictionary,
//! displacement series, DTW alignment and the Fourier temporal pyramid.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extrinsic::{code_shape_kernel, KernelDictionary};
use crate::intrinsic::{code_shape, Dictionary};
use crate::shape::ShapePoint;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    frames: Vec<ShapePoint>,
    pub label: Option<String>,
    pub source_id: String,
}

impl Trajectory {
    pub fn new(frames: Vec<ShapePoint>, label: Option<String>, source_id: impl Into<String>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a trajectory needs at least 2 frames, got {}",
                frames.len()
            )));
        }
        for f in &frames[1..] {
            frames[0].same_space(f)?;
        }
        Ok(Self {
            frames,
            label,
            source_id: source_id.into(),
        })
    }

    pub fn frames(&self) -> &[ShapePoint] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn landmark_shape(&self) -> (usize, usize) {
        (self.frames[0].num_landmarks(), self.frames[0].dim())
    }
}

/// Rows are time steps; columns are the concatenated per-dictionary codes.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSeries {
    pub codes: DMatrix<f64>,
    /// Width of each dictionary block, in column order.
    pub blocks: Vec<usize>,
    /// Identifier of the dictionary behind each block.
    pub meta: Vec<String>,
}

impl SparseSeries {
    pub fn new(codes: DMatrix<f64>, blocks: Vec<usize>, meta: Vec<String>) -> Result<Self> {
        if blocks.iter().sum::<usize>() != codes.ncols() {
            return Err(Error::dims(codes.ncols(), blocks.iter().sum::<usize>()));
        }
        if meta.len() != blocks.len() {
            return Err(Error::dims(blocks.len(), meta.len()));
        }
        Ok(Self { codes, blocks, meta })
    }

    pub fn len(&self) -> usize {
        self.codes.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.nrows() == 0
    }

    pub fn width(&self) -> usize {
        self.codes.ncols()
    }

    /// Sum of every block of every row (`len x blocks`).
    pub fn block_sums(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.len(), self.blocks.len());
        for t in 0..self.len() {
            let mut start = 0;
            for (b, w) in self.blocks.iter().enumerate() {
                out[(t, b)] = self.codes.row(t).columns(start, *w).sum();
                start += w;
            }
        }
        out
    }
}

/// Class dictionaries of one coding mode, in class order.
#[derive(Debug, Clone, PartialEq)]
pub enum DictionarySet {
    Intrinsic(Vec<Dictionary>),
    Extrinsic(Vec<KernelDictionary>),
}

impl DictionarySet {
    pub fn len(&self) -> usize {
        match self {
            DictionarySet::Intrinsic(d) => d.len(),
            DictionarySet::Extrinsic(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn block_widths(&self) -> Vec<usize> {
        match self {
            DictionarySet::Intrinsic(d) => d.iter().map(|x| x.len()).collect(),
            DictionarySet::Extrinsic(d) => d.iter().map(|x| x.num_atoms()).collect(),
        }
    }

    pub fn labels(&self) -> Vec<String> {
        let label = |i: usize, l: Option<&str>| l.map(str::to_string).unwrap_or_else(|| format!("dict{i}"));
        match self {
            DictionarySet::Intrinsic(d) => d.iter().enumerate().map(|(i, x)| label(i, x.class_label())).collect(),
            DictionarySet::Extrinsic(d) => d.iter().enumerate().map(|(i, x)| label(i, x.class_label())).collect(),
        }
    }

    pub fn landmark_shape(&self) -> Option<(usize, usize)> {
        match self {
            DictionarySet::Intrinsic(d) => d.first().map(|x| x.landmark_shape()),
            DictionarySet::Extrinsic(d) => d.first().map(|x| x.landmark_shape()),
        }
    }

    fn check(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::InvalidDictionary("no dictionaries".into()));
        }
        let shapes: Vec<(usize, usize)> = match self {
            DictionarySet::Intrinsic(d) => d.iter().map(|x| x.landmark_shape()).collect(),
            DictionarySet::Extrinsic(d) => d.iter().map(|x| x.landmark_shape()).collect(),
        };
        if shapes.iter().any(|s| *s != shapes[0]) {
            return Err(Error::InvalidDictionary("dictionaries disagree on (n, m)".into()));
        }
        Ok(())
    }

    /// Concatenated codes of one shape against every dictionary.
    pub fn code_frame(&self, frame: &ShapePoint, lambda: f64, frame_index: usize) -> Result<Vec<f64>> {
        let wrap = |class: usize| move |e: Error| Error::Coding {
            frame: frame_index,
            class,
            source: Box::new(e),
        };
        let mut row = Vec::new();
        match self {
            DictionarySet::Intrinsic(d) => {
                for (c, dict) in d.iter().enumerate() {
                    row.extend(code_shape(frame, dict, lambda).map_err(wrap(c))?.weights.iter());
                }
            }
            DictionarySet::Extrinsic(d) => {
                for (c, dict) in d.iter().enumerate() {
                    row.extend(code_shape_kernel(frame, dict, lambda).map_err(wrap(c))?.weights.iter());
                }
            }
        }
        Ok(row)
    }
}

/// Row `t` is the concatenation of the codes of frame `t` against every dictionary.
pub fn encode_trajectory(traj: &Trajectory, dicts: &DictionarySet, lambda: f64) -> Result<SparseSeries> {
    dicts.check()?;
    if let Some(shape) = dicts.landmark_shape() {
        if shape != traj.landmark_shape() {
            return Err(Error::dims(format!("{shape:?}"), format!("{:?}", traj.landmark_shape())));
        }
    }
    let rows: Vec<Vec<f64>> = traj
        .frames
        .par_iter()
        .enumerate()
        .map(|(t, f)| dicts.code_frame(f, lambda, t))
        .collect::<Result<_>>()?;
    let width = rows[0].len();
    let codes = DMatrix::from_fn(rows.len(), width, |i, j| rows[i][j]);
    SparseSeries::new(codes, dicts.block_widths(), dicts.labels())
}

/// How code differences between successive frames enter the features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisplacementMode {
    /// Codes only.
    #[default]
    Off,
    /// Differences only.
    Replace,
    /// Codes of frames `1..L` next to the differences.
    Fuse,
}

impl std::str::FromStr for DisplacementMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(Self::Off),
            "replace" => Ok(Self::Replace),
            "fuse" => Ok(Self::Fuse),
            _ => Err(Error::InvalidInput(format!("unknown displacement mode '{s}'"))),
        }
    }
}

impl std::fmt::Display for DisplacementMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Off => "off",
            Self::Replace => "replace",
            Self::Fuse => "fuse",
        })
    }
}

/// Row `t` is `codes[t + 1] - codes[t]`.
pub fn displacement_series(series: &SparseSeries) -> Result<SparseSeries> {
    let l = series.len();
    if l < 2 {
        return Err(Error::InvalidInput("displacements need at least 2 rows".into()));
    }
    let codes = series.codes.rows(1, l - 1) - series.codes.rows(0, l - 1);
    SparseSeries::new(codes, series.blocks.clone(), series.meta.clone())
}

/// Row `t` is `[codes[t + 1], codes[t + 1] - codes[t]]`.
pub fn fuse_displacement(series: &SparseSeries) -> Result<SparseSeries> {
    let diff = displacement_series(series)?;
    let l = diff.len();
    let w = series.width();
    let mut codes = DMatrix::zeros(l, 2 * w);
    codes.columns_mut(0, w).copy_from(&series.codes.rows(1, l));
    codes.columns_mut(w, w).copy_from(&diff.codes);
    let mut blocks = series.blocks.clone();
    blocks.extend(series.blocks.iter().copied());
    let mut meta = series.meta.clone();
    meta.extend(series.meta.iter().map(|m| format!("{m}:displacement")));
    SparseSeries::new(codes, blocks, meta)
}

pub fn apply_displacement(series: &SparseSeries, mode: DisplacementMode) -> Result<SparseSeries> {
    match mode {
        DisplacementMode::Off => Ok(series.clone()),
        DisplacementMode::Replace => displacement_series(series),
        DisplacementMode::Fuse => fuse_displacement(series),
    }
}

fn row_distance(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    let mut s = 0.0;
    for c in 0..a.ncols() {
        let d = a[(i, c)] - b[(j, c)];
        s += d * d;
    }
    s.sqrt()
}

/// Dynamic time warping with Euclidean row distances and steps (1,0), (0,1), (1,1).
///
/// Returns the minimal cumulative cost and a path from `(0, 0)` to the last
/// rows achieving it.
pub fn dtw_align(a: &SparseSeries, b: &SparseSeries) -> Result<(f64, Vec<(usize, usize)>)> {
    dtw_matrices(&a.codes, &b.codes)
}

pub fn dtw_matrices(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(f64, Vec<(usize, usize)>)> {
    if a.ncols() != b.ncols() {
        return Err(Error::dims(a.ncols(), b.ncols()));
    }
    let (n, m) = (a.nrows(), b.nrows());
    if n == 0 || m == 0 {
        return Err(Error::InvalidInput("DTW of an empty series".into()));
    }
    let mut acc = DMatrix::from_element(n, m, f64::INFINITY);
    for i in 0..n {
        for j in 0..m {
            let prev = if i == 0 && j == 0 {
                0.0
            } else {
                let mut p = f64::INFINITY;
                if i > 0 && j > 0 {
                    p = p.min(acc[(i - 1, j - 1)]);
                }
                if i > 0 {
                    p = p.min(acc[(i - 1, j)]);
                }
                if j > 0 {
                    p = p.min(acc[(i, j - 1)]);
                }
                p
            };
            acc[(i, j)] = prev + row_distance(a, i, b, j);
        }
    }
    let mut path = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while i > 0 || j > 0 {
        let step = if i == 0 {
            (0, j - 1)
        } else if j == 0 {
            (i - 1, 0)
        } else {
            let diag = acc[(i - 1, j - 1)];
            let up = acc[(i - 1, j)];
            let left = acc[(i, j - 1)];
            if diag <= up && diag <= left {
                (i - 1, j - 1)
            } else if up <= left {
                (i - 1, j)
            } else {
                (i, j - 1)
            }
        };
        (i, j) = step;
        path.push(step);
    }
    path.reverse();
    Ok((acc[(n - 1, m - 1)], path))
}

/// Resamples `series` onto the time axis of `reference`: row `j` of the result
/// is the mean of the series rows DTW-matched to reference row `j`.
pub fn warp_to_reference(series: &SparseSeries, reference: &SparseSeries) -> Result<SparseSeries> {
    let (_, path) = dtw_align(reference, series)?;
    let l = reference.len();
    let w = series.width();
    let mut codes = DMatrix::zeros(l, w);
    let mut counts = vec![0usize; l];
    for (r, s) in path {
        let mut row = codes.row_mut(r);
        row += series.codes.row(s);
        counts[r] += 1;
    }
    for (r, c) in counts.iter().enumerate() {
        codes.row_mut(r).scale_mut(1.0 / *c as f64);
    }
    SparseSeries::new(codes, series.blocks.clone(), series.meta.clone())
}

/// Index of the series with the smallest summed DTW cost to all others.
pub fn choose_reference(series: &[SparseSeries]) -> Result<usize> {
    if series.is_empty() {
        return Err(Error::InvalidInput("no series to choose a reference from".into()));
    }
    let n = series.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    let costs: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| dtw_align(&series[i], &series[j]).map(|r| r.0))
        .collect::<Result<_>>()?;
    let mut total = vec![0.0; n];
    for ((i, j), c) in pairs.iter().zip(costs) {
        total[*i] += c;
        total[*j] += c;
    }
    Ok((0..n).fold(0, |best, i| if total[i] < total[best] { i } else { best }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FtpFeature {
    pub values: DVector<f64>,
    pub levels: usize,
    pub coeffs_per_segment: usize,
}

/// `dim * (2^levels - 1) * coeffs`
pub fn ftp_length(dim: usize, levels: usize, coeffs: usize) -> usize {
    dim * ((1usize << levels) - 1) * coeffs
}

/// Fourier temporal pyramid: for each level `l`, `2^l` segments; for each
/// segment and column the magnitudes of the first `coeffs` DFT coefficients
/// (segment zero-padded to at least `coeffs` samples, divided by the segment
/// length). Ordered by level, segment, column, coefficient.
pub fn ftp_features(series: &SparseSeries, levels: usize, coeffs: usize) -> Result<FtpFeature> {
    ftp_matrix(&series.codes, levels, coeffs)
}

pub fn ftp_matrix(codes: &DMatrix<f64>, levels: usize, coeffs: usize) -> Result<FtpFeature> {
    let l = codes.nrows();
    if l == 0 {
        return Err(Error::InvalidInput("FTP of an empty series".into()));
    }
    if levels == 0 || levels > 16 || coeffs == 0 {
        return Err(Error::InvalidInput(format!("invalid FTP levels {levels} / coefficients {coeffs}")));
    }
    let dim = codes.ncols();
    let mut values = Vec::with_capacity(ftp_length(dim, levels, coeffs));
    for level in 0..levels {
        let parts = 1usize << level;
        for s in 0..parts {
            let start = s * l / parts;
            let end = (s + 1) * l / parts;
            let len = end - start;
            let padded = len.max(coeffs);
            for c in 0..dim {
                for k in 0..coeffs {
                    if len == 0 {
                        values.push(0.0);
                        continue;
                    }
                    let (mut re, mut im) = (0.0, 0.0);
                    for t in 0..len {
                        let angle = -2.0 * std::f64::consts::PI * (k * t) as f64 / padded as f64;
                        let x = codes[(start + t, c)];
                        re += x * angle.cos();
                        im += x * angle.sin();
                    }
                    values.push(re.hypot(im) / len as f64);
                }
            }
        }
    }
    Ok(FtpFeature {
        values: DVector::from_vec(values),
        levels,
        coeffs_per_segment: coeffs,
    })
}
