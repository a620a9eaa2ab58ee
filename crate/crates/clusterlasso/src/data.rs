//! Dataset parsing, label encoding, standardization, and sub-matrix views.
//!
//! A [`Dataset`] couples an ordinal response column (tumor state, encoded
//! `1..=L`) with an `n x p` expression matrix and the feature names. Datasets
//! are immutable once constructed; every operation returns a new value.

use nalgebra::DMatrix;
use thiserror::Error;

/// The ordered tumor-state levels used when no explicit level order is given.
pub const DEFAULT_LEVELS: [&str; 4] = ["Ta", "T1a", "T1b", ">T1"];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("input has no header row")]
    MissingHeader,
    #[error("label column `{0}` not found in header")]
    UnknownLabelColumn(String),
    #[error("cell at data row {row}, column {col} is not a finite number")]
    NonNumericCell { row: usize, col: usize },
    #[error("label `{0}` is not in the level order")]
    UnknownLevel(String),
    #[error("file contains a header but no data rows")]
    EmptyFile,
    #[error("column {0} has zero sample variance")]
    ZeroVarianceColumn(usize),
    #[error("index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("index {0} selected more than once")]
    DuplicateIndex(usize),
    #[error("empty index selection")]
    EmptySelection,
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// An ordinal-response expression dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Ordinal levels in `1..=L`, one per row.
    pub labels: Vec<usize>,
    /// The `L` level names, in encoding order.
    pub level_names: Vec<String>,
    /// `n x p` expression matrix.
    pub x: DMatrix<f64>,
    /// One name per column of `x`.
    pub feature_names: Vec<String>,
}

impl Dataset {
    /// Build a dataset, checking the structural invariants.
    pub fn new(
        labels: Vec<usize>,
        level_names: Vec<String>,
        x: DMatrix<f64>,
        feature_names: Vec<String>,
    ) -> Result<Self, DataError> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(DataError::Invalid("matrix must be at least 1 x 1".into()));
        }
        if labels.len() != x.nrows() {
            return Err(DataError::Invalid(format!(
                "{} labels for {} rows",
                labels.len(),
                x.nrows()
            )));
        }
        if feature_names.len() != x.ncols() {
            return Err(DataError::Invalid(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                x.ncols()
            )));
        }
        if level_names.is_empty() {
            return Err(DataError::Invalid("need at least one level".into()));
        }
        let l = level_names.len();
        if let Some(bad) = labels.iter().find(|&&v| v < 1 || v > l) {
            return Err(DataError::Invalid(format!(
                "label {bad} outside 1..={l}"
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(DataError::Invalid("matrix contains non-finite values".into()));
        }
        Ok(Self {
            labels,
            level_names,
            x,
            feature_names,
        })
    }

    /// Number of rows (patients).
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Number of feature columns (genes).
    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Number of ordinal levels.
    pub fn levels(&self) -> usize {
        self.level_names.len()
    }

    /// Labels as a float vector, for use as a regression response.
    pub fn labels_f64(&self) -> Vec<f64> {
        self.labels.iter().map(|&v| v as f64).collect()
    }

    /// Serialize back to CSV with the given label column name. The output
    /// parses back to an identical dataset under the same level order.
    pub fn to_csv(&self, label_col: &str) -> String {
        let mut out = String::new();
        out.push_str(label_col);
        for name in &self.feature_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for i in 0..self.n() {
            out.push_str(&self.level_names[self.labels[i] - 1]);
            for j in 0..self.p() {
                out.push(',');
                out.push_str(&format!("{}", self.x[(i, j)]));
            }
            out.push('\n');
        }
        out
    }
}

/// Encode raw label strings as ordinal integers `1..=L` by their position in
/// `level_order`.
pub fn encode_states(raw: &[String], level_order: &[String]) -> Result<Vec<usize>, DataError> {
    raw.iter()
        .map(|s| {
            level_order
                .iter()
                .position(|l| l == s)
                .map(|idx| idx + 1)
                .ok_or_else(|| DataError::UnknownLevel(s.clone()))
        })
        .collect()
}

/// Parse a CSV dataset using the default tumor-state level order.
///
/// The first row must be a header; `label_column` names the ordinal response
/// column and every other column must parse as a finite real.
pub fn parse_dataset(csv_text: &str, label_column: &str) -> Result<Dataset, DataError> {
    let levels: Vec<String> = DEFAULT_LEVELS.iter().map(|s| s.to_string()).collect();
    parse_dataset_with_levels(csv_text, label_column, &levels)
}

/// Parse a CSV dataset with an explicit ordered list of label levels.
pub fn parse_dataset_with_levels(
    csv_text: &str,
    label_column: &str,
    level_order: &[String],
) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());

    let headers: Vec<String> = match reader.headers() {
        Ok(h) if !h.is_empty() && h.iter().any(|c| !c.is_empty()) => {
            h.iter().map(|c| c.to_string()).collect()
        }
        _ => return Err(DataError::MissingHeader),
    };
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| DataError::UnknownLabelColumn(label_column.to_string()))?;

    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let p = feature_names.len();
    if p == 0 {
        return Err(DataError::Invalid("no feature columns".into()));
    }

    let mut raw_labels = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(DataError::Invalid(format!(
                "data row {} has {} cells, header has {}",
                i + 1,
                record.len(),
                headers.len()
            )));
        }
        for (j, cell) in record.iter().enumerate() {
            if j == label_idx {
                raw_labels.push(cell.to_string());
            } else {
                let v: f64 = cell.parse().map_err(|_| DataError::NonNumericCell {
                    row: i + 1,
                    col: j + 1,
                })?;
                if !v.is_finite() {
                    return Err(DataError::NonNumericCell {
                        row: i + 1,
                        col: j + 1,
                    });
                }
                values.push(v);
            }
        }
    }
    if raw_labels.is_empty() {
        return Err(DataError::EmptyFile);
    }

    let labels = encode_states(&raw_labels, level_order)?;
    let n = raw_labels.len();
    let x = DMatrix::from_row_slice(n, p, &values);
    Dataset::new(labels, level_order.to_vec(), x, feature_names)
}

/// Column means and scales removed by [`standardize`].
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizationRecord {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl StandardizationRecord {
    /// Invert the transform: `x_std * diag(scales) + means`.
    pub fn unstandardize(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x.clone();
        for j in 0..out.ncols() {
            for i in 0..out.nrows() {
                out[(i, j)] = out[(i, j)] * self.scales[j] + self.means[j];
            }
        }
        out
    }
}

/// Center each column and scale it to sample standard deviation one
/// (divisor `n - 1`).
pub fn standardize(x: &DMatrix<f64>) -> Result<(DMatrix<f64>, StandardizationRecord), DataError> {
    let n = x.nrows();
    assert!(n >= 2, "standardize needs at least two rows");
    let mut out = x.clone();
    let mut means = Vec::with_capacity(x.ncols());
    let mut scales = Vec::with_capacity(x.ncols());
    for j in 0..x.ncols() {
        let col = x.column(j);
        let mean = col.sum() / n as f64;
        let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
        let sd = (ss / (n as f64 - 1.0)).sqrt();
        if sd == 0.0 {
            return Err(DataError::ZeroVarianceColumn(j));
        }
        for i in 0..n {
            out[(i, j)] = (x[(i, j)] - mean) / sd;
        }
        means.push(mean);
        scales.push(sd);
    }
    Ok((out, StandardizationRecord { means, scales }))
}

fn check_indices(idx: &[usize], bound: usize) -> Result<(), DataError> {
    if idx.is_empty() {
        return Err(DataError::EmptySelection);
    }
    let mut seen = vec![false; bound];
    for &i in idx {
        if i >= bound {
            return Err(DataError::IndexOutOfRange(i));
        }
        if seen[i] {
            return Err(DataError::DuplicateIndex(i));
        }
        seen[i] = true;
    }
    Ok(())
}

/// Sub-dataset of the given rows (0-based indices, order preserved).
pub fn select_rows(d: &Dataset, idx: &[usize]) -> Result<Dataset, DataError> {
    check_indices(idx, d.n())?;
    let labels = idx.iter().map(|&i| d.labels[i]).collect();
    let x = DMatrix::from_fn(idx.len(), d.p(), |i, j| d.x[(idx[i], j)]);
    Dataset::new(labels, d.level_names.clone(), x, d.feature_names.clone())
}

/// Sub-dataset of the given columns (0-based indices, order preserved).
pub fn select_columns(d: &Dataset, idx: &[usize]) -> Result<Dataset, DataError> {
    check_indices(idx, d.p())?;
    let names = idx.iter().map(|&j| d.feature_names[j].clone()).collect();
    let x = DMatrix::from_fn(d.n(), idx.len(), |i, j| d.x[(i, idx[j])]);
    Dataset::new(d.labels.clone(), d.level_names.clone(), x, names)
}
