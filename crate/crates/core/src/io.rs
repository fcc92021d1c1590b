//! File formats.
//!
//! Sequence file: a JSON header line `{"n":..,"m":..,"L":..,"label":..,"source_id":..}`
//! followed by `L` rows of `n * m` whitespace-separated numbers, landmark-major
//! (`x1 y1 [z1] x2 y2 ...`). Code series use the same layout with `m = 1`,
//! `n` equal to the row width, and extra `blocks` / `meta` header fields.
//!
//! Manifest: one `path label group_id` triple per line, `#` starts a comment,
//! relative paths are resolved against the manifest's directory.
//!
//! JSON documents (model bundles, reports) write every float as
//! `{:.16e}`, which round-trips exactly.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shape::{LandmarkConfiguration, ShapePoint};
use crate::temporal::{SparseSeries, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    n: usize,
    m: usize,
    #[serde(rename = "L")]
    l: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    blocks: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceFile {
    pub frames: Vec<LandmarkConfiguration>,
    pub label: Option<String>,
    pub source_id: Option<String>,
}

impl SequenceFile {
    pub fn num_landmarks(&self) -> usize {
        self.frames.first().map_or(0, |f| f.num_landmarks())
    }

    pub fn dim(&self) -> usize {
        self.frames.first().map_or(0, |f| f.dim())
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Projects every frame to shape space.
    pub fn to_trajectory(&self) -> Result<Trajectory> {
        let frames = self
            .frames
            .iter()
            .map(ShapePoint::from_configuration)
            .collect::<Result<Vec<_>>>()?;
        Trajectory::new(
            frames,
            self.label.clone(),
            self.source_id.clone().unwrap_or_default(),
        )
    }
}

fn parse_error(path: &Path, line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message: message.into(),
    }
}

/// Header plus numeric rows; row lengths are checked against `n * m`.
fn parse_table(text: &str, path: &Path) -> Result<(Header, Vec<Vec<f64>>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hline, htext) = lines
        .next()
        .ok_or_else(|| parse_error(path, 1, 1, "missing header"))?;
    let header: Header = serde_json::from_str(htext.trim())
        .map_err(|e| parse_error(path, hline + 1, e.column().max(1), format!("bad header: {e}")))?;
    let width = header.n * header.m;
    let mut rows = Vec::with_capacity(header.l);
    for (idx, line) in lines {
        let mut row = Vec::with_capacity(width);
        let mut offset = 0;
        for token in line.split_whitespace() {
            let column = line[offset..].find(token).map_or(offset, |p| p + offset) + 1;
            offset = column - 1 + token.len();
            let value: f64 = token
                .parse()
                .map_err(|_| parse_error(path, idx + 1, column, format!("'{token}' is not a number")))?;
            if !value.is_finite() {
                return Err(parse_error(path, idx + 1, column, format!("non-finite value '{token}'")));
            }
            row.push(value);
        }
        if row.len() != width {
            return Err(Error::ShapeMismatch {
                frame: rows.len(),
                expected: width,
                found: row.len(),
            });
        }
        rows.push(row);
    }
    if rows.len() != header.l {
        return Err(parse_error(
            path,
            text.lines().count().max(1),
            1,
            format!("header declares {} rows, found {}", header.l, rows.len()),
        ));
    }
    Ok((header, rows))
}

pub fn parse_sequence(text: &str, path: &Path) -> Result<SequenceFile> {
    let (header, rows) = parse_table(text, path)?;
    if header.m != 2 && header.m != 3 {
        return Err(Error::UnsupportedDim(header.m));
    }
    let frames = rows
        .iter()
        .map(|r| LandmarkConfiguration::from_row_slice(header.n, header.m, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(SequenceFile {
        frames,
        label: header.label,
        source_id: header.source_id,
    })
}

pub fn load_sequence(path: &Path) -> Result<SequenceFile> {
    parse_sequence(&fs::read_to_string(path)?, path)
}

fn format_row(out: &mut String, values: impl IntoIterator<Item = f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(' ');
        }
        first = false;
        out.push_str(&format!("{v:.16e}"));
    }
    out.push('\n');
}

pub fn format_sequence(seq: &SequenceFile) -> Result<String> {
    let header = Header {
        n: seq.num_landmarks(),
        m: seq.dim(),
        l: seq.len(),
        label: seq.label.clone(),
        source_id: seq.source_id.clone(),
        blocks: None,
        meta: None,
    };
    let mut out = serde_json::to_string(&header)?;
    out.push('\n');
    for f in &seq.frames {
        if f.num_landmarks() != header.n || f.dim() != header.m {
            return Err(Error::dims(format!("{}x{}", header.n, header.m), format!("{}x{}", f.num_landmarks(), f.dim())));
        }
        format_row(&mut out, f.to_row_vec());
    }
    Ok(out)
}

pub fn write_sequence(path: &Path, seq: &SequenceFile) -> Result<()> {
    atomic_write(path, format_sequence(seq)?.as_bytes())
}

pub fn format_series(series: &SparseSeries, label: Option<&str>, source_id: Option<&str>) -> Result<String> {
    let header = Header {
        n: series.width(),
        m: 1,
        l: series.len(),
        label: label.map(str::to_string),
        source_id: source_id.map(str::to_string),
        blocks: Some(series.blocks.clone()),
        meta: Some(series.meta.clone()),
    };
    let mut out = serde_json::to_string(&header)?;
    out.push('\n');
    for row in series.codes.row_iter() {
        format_row(&mut out, row.iter().copied());
    }
    Ok(out)
}

pub fn write_series(path: &Path, series: &SparseSeries, label: Option<&str>, source_id: Option<&str>) -> Result<()> {
    atomic_write(path, format_series(series, label, source_id)?.as_bytes())
}

pub fn load_series(path: &Path) -> Result<SparseSeries> {
    let (header, rows) = parse_table(&fs::read_to_string(path)?, path)?;
    if header.m != 1 {
        return Err(parse_error(path, 1, 1, format!("code series must have m = 1, got {}", header.m)));
    }
    let codes = DMatrix::from_fn(rows.len(), header.n, |i, j| rows[i][j]);
    let blocks = header.blocks.unwrap_or_else(|| vec![header.n]);
    let meta = header
        .meta
        .unwrap_or_else(|| (0..blocks.len()).map(|i| format!("dict{i}")).collect());
    SparseSeries::new(codes, blocks, meta)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: String,
    pub group: String,
}

pub fn parse_manifest(text: &str, path: &Path) -> Result<Vec<ManifestEntry>> {
    let base = path.parent().unwrap_or(Path::new(""));
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_error(
                path,
                idx + 1,
                1,
                format!("expected 'path label group_id', found {} fields", fields.len()),
            ));
        }
        let p = Path::new(fields[0]);
        entries.push(ManifestEntry {
            path: if p.is_absolute() { p.to_path_buf() } else { base.join(p) },
            label: fields[1].to_string(),
            group: fields[2].to_string(),
        });
    }
    Ok(entries)
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    parse_manifest(&fs::read_to_string(path)?, path)
}

/// Writes entries with paths relative to the manifest's directory where possible.
pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let base = path.parent().unwrap_or(Path::new(""));
    let mut out = String::new();
    for e in entries {
        let p = e.path.strip_prefix(base).unwrap_or(&e.path);
        out.push_str(&format!("{} {} {}\n", p.display(), e.label, e.group));
    }
    atomic_write(path, out.as_bytes())
}

/// Loads every sequence of a manifest, in manifest order.
pub fn load_dataset(manifest: &Path) -> Result<Vec<(ManifestEntry, SequenceFile)>> {
    load_manifest(manifest)?
        .into_iter()
        .map(|e| {
            let seq = load_sequence(&e.path)?;
            Ok((e, seq))
        })
        .collect()
}

/// Writes through a temporary file in the target directory, then renames.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// JSON with floats written as `{:.16e}`. Non-finite values still come out as
/// `null` and are rejected when read back into an `f64`.
struct ExactFloats;

impl serde_json::ser::Formatter for ExactFloats {
    fn write_f64<W: ?Sized + std::io::Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + std::io::Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, ExactFloats);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes utf-8"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    atomic_write(path, to_json(value)?.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| parse_error(path, e.line(), e.column(), e.to_string()))
}

/// Accepts `found` if its major component equals that of `expected`.
pub fn check_version(found: &str, expected: &str) -> Result<()> {
    let major = |v: &str| v.split('.').next().unwrap_or("").to_string();
    if major(found) != major(expected) || major(found).is_empty() {
        return Err(Error::VersionMismatch {
            found: found.to_string(),
            expected: expected.to_string(),
        });
    }
    Ok(())
}
