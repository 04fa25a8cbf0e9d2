//! Tabular dataset ingestion.
//!
//! A dataset is a dense feature matrix plus one class label per row. Labels
//! are mapped to dense integer ids in order of first appearance; features are
//! z-scored by default since squared-distance costs are scale-sensitive.

use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::Real;

/// Per-feature z-scoring transform captured at ingestion time, so points
/// arriving later can be mapped into the same space.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScaling<R> {
    pub mean: Vec<R>,
    pub std: Vec<R>,
}

impl<R: Real> FeatureScaling<R> {
    /// Apply the transform to one point in place. Features that were
    /// constant at fit time (zero std) map to zero.
    pub fn apply(&self, point: &mut [R]) {
        for (f, x) in point.iter_mut().enumerate() {
            *x = if self.std[f] > R::zero() {
                (*x - self.mean[f]) / self.std[f]
            } else {
                R::zero()
            };
        }
    }
}

/// A named point cloud with ground-truth classes.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    /// `n x d`, row per point.
    pub features: Array2<f64>,
    /// Dense class ids, one per row.
    pub labels: Vec<usize>,
    /// Original label strings, indexed by class id.
    pub class_names: Vec<String>,
    /// The z-scoring applied at load time, when standardization was on.
    pub scaling: Option<FeatureScaling<f64>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Points per class, indexed by class id.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }
}

/// Ingestion options.
#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    /// Z-score each feature over the full dataset (default on).
    pub standardize: bool,
    pub delimiter: u8,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            standardize: true,
            delimiter: b',',
        }
    }
}

/// Z-score each column in place using the population mean and standard
/// deviation, returning the fitted transform. A constant column has no scale
/// and is left at zero.
pub fn standardize(features: &mut Array2<f64>) -> FeatureScaling<f64> {
    let n = features.nrows() as f64;
    let mut scaling = FeatureScaling {
        mean: Vec::with_capacity(features.ncols()),
        std: Vec::with_capacity(features.ncols()),
    };
    for mut column in features.columns_mut() {
        let mean = column.sum() / n;
        let var = column.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        if std > 0.0 {
            column.mapv_inplace(|x| (x - mean) / std);
        } else {
            column.fill(0.0);
        }
        scaling.mean.push(mean);
        scaling.std.push(std);
    }
    scaling
}

/// Load a delimited table with a header row. Every column except
/// `label_column` must be numeric; rows with missing or unparsable cells are
/// rejected with their coordinates. Datasets need at least two classes.
pub fn load_csv(path: &Path, label_column: &str, options: &LoadOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::Dataset(format!("label column `{label_column}` not found")))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();
    let dim = feature_names.len();
    if dim == 0 {
        return Err(Error::Dataset("no feature columns".into()));
    }

    let mut flat = Vec::new();
    let mut labels = Vec::new();
    let mut class_names: Vec<String> = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::Dataset(format!(
                "data row {} has {} fields, expected {}",
                row + 1,
                record.len(),
                headers.len()
            )));
        }
        for (col, field) in record.iter().enumerate() {
            if col == label_idx {
                let name = field.trim();
                if name.is_empty() {
                    return Err(Error::BadCell {
                        row: row + 1,
                        column: label_column.to_string(),
                        message: "empty label".into(),
                    });
                }
                let id = match class_names.iter().position(|c| c == name) {
                    Some(id) => id,
                    None => {
                        class_names.push(name.to_string());
                        class_names.len() - 1
                    }
                };
                labels.push(id);
            } else {
                let value: f64 = field.trim().parse().map_err(|_| Error::BadCell {
                    row: row + 1,
                    column: headers[col].to_string(),
                    message: format!("not numeric: `{field}`"),
                })?;
                if !value.is_finite() {
                    return Err(Error::BadCell {
                        row: row + 1,
                        column: headers[col].to_string(),
                        message: format!("non-finite value: `{field}`"),
                    });
                }
                flat.push(value);
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::Dataset("no data rows".into()));
    }
    if class_names.len() < 2 {
        return Err(Error::Dataset(format!(
            "need at least 2 classes, found {}",
            class_names.len()
        )));
    }
    let mut features = Array2::from_shape_vec((labels.len(), dim), flat)
        .expect("row-major buffer matches shape");
    let scaling = options.standardize.then(|| standardize(&mut features));
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    Ok(Dataset {
        name,
        features,
        labels,
        class_names,
        scaling,
    })
}

/// Stack selected rows of a feature matrix into a dense matrix.
pub fn gather_rows(features: ArrayView2<f64>, indices: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((indices.len(), features.ncols()));
    for (row, &idx) in indices.iter().enumerate() {
        out.row_mut(row).assign(&features.index_axis(Axis(0), idx));
    }
    out
}
