//! Points, weighted samples and the CSV/JSON interchange formats.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single point of the feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("a point needs at least one coordinate"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite { index: 0 });
        }
        Ok(Self { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.coords
    }
}

/// A weighted sample of points sharing one dimension.
///
/// Coordinates are stored row-major in a single buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
    sample_id: String,
}

impl Dataset {
    /// Unit-weight dataset from row-major coordinates.
    pub fn from_flat(dim: usize, coords: Vec<f64>, sample_id: impl Into<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "{} coordinates do not divide into rows of {dim}",
                coords.len()
            )));
        }
        let n = coords.len() / dim;
        Self::with_weights(dim, coords, vec![1.0; n], sample_id)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], sample_id: impl Into<String>) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyDataset)?;
        let dim = first.as_ref().len();
        let mut coords = Vec::with_capacity(dim * rows.len());
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            coords.extend_from_slice(row);
        }
        Self::from_flat(dim, coords, sample_id)
    }

    pub fn with_weights(
        dim: usize,
        coords: Vec<f64>,
        weights: Vec<f64>,
        sample_id: impl Into<String>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if coords.len() != dim * weights.len() {
            return Err(Error::invalid(format!(
                "{} coordinates for {} weights of dimension {dim}",
                coords.len(),
                weights.len()
            )));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite { index: i / dim });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights must be finite and non-negative"));
        }
        if !weights.is_empty() && !weights.iter().any(|w| *w > 0.0) {
            return Err(Error::ZeroWeight);
        }
        Ok(Self {
            dim,
            coords,
            weights,
            sample_id: sample_id.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn sample_id(&self) -> &str {
        &self.sample_id
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Subset of points by index, preserving weights and sample id.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        let mut weights = Vec::with_capacity(indices.len());
        for &i in indices {
            coords.extend_from_slice(self.point(i));
            weights.push(self.weights[i]);
        }
        Dataset {
            dim: self.dim,
            coords,
            weights,
            sample_id: self.sample_id.clone(),
        }
    }

    /// Same points, weights multiplied by `factor`.
    pub fn scaled_weights(&self, factor: f64) -> Result<Dataset> {
        Dataset::with_weights(
            self.dim,
            self.coords.clone(),
            self.weights.iter().map(|w| w * factor).collect(),
            self.sample_id.clone(),
        )
    }

    /// Concatenate datasets of equal dimension. The result takes the first
    /// dataset's sample id.
    pub fn concat(parts: &[&Dataset]) -> Result<Dataset> {
        let first = parts.first().ok_or(Error::EmptyDataset)?;
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        for p in parts {
            if p.dim != first.dim {
                return Err(Error::DimensionMismatch {
                    expected: first.dim,
                    found: p.dim,
                });
            }
            coords.extend_from_slice(&p.coords);
            weights.extend_from_slice(&p.weights);
        }
        Ok(Dataset {
            dim: first.dim,
            coords,
            weights,
            sample_id: first.sample_id.clone(),
        })
    }

    pub fn with_sample_id(mut self, sample_id: impl Into<String>) -> Self {
        self.sample_id = sample_id.into();
        self
    }
}

/// A dataset whose points carry ground-truth component labels (0-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub data: Dataset,
    pub labels: Vec<usize>,
}

impl LabeledDataset {
    pub fn new(data: Dataset, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != data.len() {
            return Err(Error::invalid(format!(
                "{} labels for {} points",
                labels.len(),
                data.len()
            )));
        }
        Ok(Self { data, labels })
    }
}

/// Weighted mean `Σ wᵢ xᵢ / Σ wᵢ`.
pub fn weighted_mean(d: &Dataset) -> Result<Point> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let total = d.total_weight();
    if total <= 0.0 {
        return Err(Error::ZeroWeight);
    }
    let mut acc = vec![0.0; d.dim()];
    for (row, w) in d.rows().zip(d.weights()) {
        if *w == 0.0 {
            continue;
        }
        for (a, x) in acc.iter_mut().zip(row) {
            *a += w * x;
        }
    }
    for a in &mut acc {
        *a /= total;
    }
    Ok(Point { coords: acc })
}

/// Sidecar metadata stored next to a CSV dataset as `<stem>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub sample_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<usize>>,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Read a CSV of real numbers, one point per row. A single leading header
/// line is skipped when any of its cells fails to parse as a number.
pub fn load_dataset(path: impl AsRef<Path>, sample_id: impl Into<String>) -> Result<Dataset> {
    let path = path.as_ref();
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;

    let mut dim = 0usize;
    let mut coords = Vec::new();
    let mut rows = 0usize;
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(idx as u64 + 1, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let parsed: Vec<Option<f64>> = record.iter().map(|c| c.parse::<f64>().ok()).collect();
        if idx == 0 && parsed.iter().any(Option::is_none) {
            // header
            continue;
        }
        if rows == 0 {
            dim = record.len();
        } else if record.len() != dim {
            return Err(parse_err(format!(
                "row {line} has {} column{}, expected {dim}",
                record.len(),
                if record.len() == 1 { "" } else { "s" }
            )));
        }
        for (col, (cell, value)) in record.iter().zip(&parsed).enumerate() {
            match value {
                Some(v) if v.is_finite() => coords.push(*v),
                Some(_) => {
                    return Err(parse_err(format!(
                        "row {line}, column {}: non-finite value '{cell}'",
                        col + 1
                    )))
                }
                None => {
                    return Err(parse_err(format!(
                        "row {line}, column {}: cannot parse '{cell}' as a number",
                        col + 1
                    )))
                }
            }
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    Dataset::from_flat(dim, coords, sample_id)
}

/// Load a dataset together with its sidecar, if one exists. The sidecar's
/// sample id wins over the file stem.
pub fn load_with_sidecar(path: impl AsRef<Path>) -> Result<(Dataset, Option<Vec<usize>>)> {
    let path = path.as_ref();
    let side = sidecar_path(path);
    let (sample_id, labels) = if side.exists() {
        let sc: Sidecar = serde_json::from_str(&fs::read_to_string(&side)?)?;
        (sc.sample_id, sc.labels)
    } else {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        (stem, None)
    };
    let d = load_dataset(path, sample_id)?;
    if let Some(l) = &labels {
        if l.len() != d.len() {
            return Err(Error::Parse {
                path: side,
                message: format!("{} labels for {} points", l.len(), d.len()),
            });
        }
    }
    Ok((d, labels))
}

/// Write points as CSV without a header. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn save_dataset(path: impl AsRef<Path>, d: &Dataset) -> Result<()> {
    let mut out = String::with_capacity(d.coords().len() * 12);
    for row in d.rows() {
        for (j, x) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format_f64(*x));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn save_sidecar(csv_path: impl AsRef<Path>, sidecar: &Sidecar) -> Result<()> {
    let mut s = serde_json::to_string_pretty(sidecar)?;
    s.push('\n');
    fs::write(sidecar_path(csv_path.as_ref()), s)?;
    Ok(())
}

pub(crate) fn format_f64(x: f64) -> String {
    format!("{x}")
}
