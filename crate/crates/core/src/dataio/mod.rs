// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dataset ingestion and persistence.
//!
//! Rows are timestamps and columns are metrics. Timestamps are implicit row
//! indices; observations are assumed equally spaced.

mod model_file;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

pub use model_file::{
    decode_model, encode_model, load_model, save_model, ModelBundle, MODEL_FILE_VERSION,
    MODEL_MAGIC,
};

/// Name of the label column in CSV input.
pub const LABEL_COLUMN: &str = "label";

/// A `T x m` matrix of observations with optional per-timestamp labels.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricDataset<T> {
    name: String,
    values: Matrix<T>,
    metric_names: Vec<String>,
    labels: Option<Vec<bool>>,
}

impl<T: Scalar> MetricDataset<T> {
    pub fn new(
        name: impl Into<String>,
        values: Matrix<T>,
        metric_names: Vec<String>,
        labels: Option<Vec<bool>>,
    ) -> Result<Self> {
        let (rows, cols) = values.shape();
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyInput(format!(
                "dataset must have at least one row and one metric, got {rows}x{cols}"
            )));
        }
        if metric_names.len() != cols {
            return Err(Error::DimensionMismatch {
                what: "metric names",
                expected: cols,
                found: metric_names.len(),
            });
        }
        if let Some(pos) = values.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols + 1,
                col: pos % cols + 1,
            });
        }
        if let Some(labels) = &labels {
            if labels.len() != rows {
                return Err(Error::LabelLength {
                    expected: rows,
                    found: labels.len(),
                });
            }
        }
        Ok(Self {
            name: name.into(),
            values,
            metric_names,
            labels,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn values(&self) -> &Matrix<T> {
        &self.values
    }

    pub fn metric_names(&self) -> &[String] {
        &self.metric_names
    }

    pub fn labels(&self) -> Option<&[bool]> {
        self.labels.as_deref()
    }

    /// Number of timestamps.
    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }

    /// Number of metrics.
    pub fn metrics(&self) -> usize {
        self.values.cols()
    }

    /// Same metadata with replaced values; used by normalization.
    pub(crate) fn with_values(&self, values: Matrix<T>) -> Self {
        Self {
            name: self.name.clone(),
            values,
            metric_names: self.metric_names.clone(),
            labels: self.labels.clone(),
        }
    }

    pub fn with_labels(mut self, labels: Option<Vec<bool>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != self.len() {
                return Err(Error::LabelLength {
                    expected: self.len(),
                    found: l.len(),
                });
            }
        }
        self.labels = labels;
        Ok(self)
    }

    /// Splits into rows `[0, at)` and `[at, T)`.
    pub fn split_at(&self, at: usize) -> Result<(Self, Self)> {
        if at == 0 || at >= self.len() {
            return Err(Error::InvalidArgument(format!(
                "split point {at} must lie strictly inside 0..{}",
                self.len()
            )));
        }
        let head = self.values.slice_rows(0, at);
        let tail = self.values.slice_rows(at, self.len() - at);
        let (lh, lt) = match &self.labels {
            Some(l) => (Some(l[..at].to_vec()), Some(l[at..].to_vec())),
            None => (None, None),
        };
        Ok((
            Self::new(
                format!("{}-head", self.name),
                head,
                self.metric_names.clone(),
                lh,
            )?,
            Self::new(
                format!("{}-tail", self.name),
                tail,
                self.metric_names.clone(),
                lt,
            )?,
        ))
    }
}

/// Training and test data for one entity.
#[derive(Clone, Debug)]
pub struct DatasetSplit<T> {
    pub train: MetricDataset<T>,
    pub test: MetricDataset<T>,
}

impl<T: Scalar> DatasetSplit<T> {
    pub fn new(train: MetricDataset<T>, test: MetricDataset<T>) -> Result<Self> {
        if train.metrics() != test.metrics() {
            return Err(Error::DimensionMismatch {
                what: "test metric count",
                expected: train.metrics(),
                found: test.metrics(),
            });
        }
        if train.metric_names() != test.metric_names() {
            return Err(Error::InvalidArgument(
                "train and test metric names differ or are ordered differently".into(),
            ));
        }
        if test.labels().is_none() {
            return Err(Error::InvalidArgument("test data must carry labels".into()));
        }
        Ok(Self { train, test })
    }
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_owned())
}

fn parse_value<T: Scalar>(field: &str, row: usize, col: usize) -> Result<T> {
    let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
        row,
        message: format!("column {col}: {field:?} is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::NonFinite { row, col });
    }
    Ok(T::of(v))
}

fn parse_label(field: &str, row: usize) -> Result<bool> {
    match field.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::InvalidLabel {
            row,
            value: other.to_owned(),
        }),
    }
}

/// Returns true when the CSV header's last column is the label column.
pub fn csv_has_label_column(path: impl AsRef<Path>) -> Result<bool> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?;
    Ok(headers.iter().next_back().map(str::trim) == Some(LABEL_COLUMN))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Parse {
            row,
            message: format!("{other:?}"),
        },
    }
}

/// Loads a CSV with a header row. With `has_labels` the last column must be
/// named `label` and hold 0/1 values.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, has_labels: bool) -> Result<MetricDataset<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    if file.metadata().map_err(|e| Error::io(path, e))?.len() == 0 {
        return Err(Error::EmptyInput(path.display().to_string()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(BufReader::new(file));
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(|h| h.trim().to_owned())
        .collect();
    let width = header.len();
    let metric_count = if has_labels {
        if header.last().map(String::as_str) != Some(LABEL_COLUMN) {
            return Err(Error::Parse {
                row: 0,
                message: format!("expected last header column to be {LABEL_COLUMN:?}"),
            });
        }
        width - 1
    } else {
        width
    };
    if metric_count == 0 {
        return Err(Error::EmptyInput(format!(
            "{}: no metric columns",
            path.display()
        )));
    }

    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut rows = 0usize;
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() != width {
            return Err(Error::Parse {
                row,
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        for (c, field) in record.iter().take(metric_count).enumerate() {
            data.push(parse_value::<T>(field, row, c + 1)?);
        }
        if has_labels {
            labels.push(parse_label(&record[width - 1], row)?);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::EmptyInput(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    let values = Matrix::from_vec(rows, metric_count, data)?;
    let names = header[..metric_count].to_vec();
    MetricDataset::new(
        dataset_name(path),
        values,
        names,
        has_labels.then_some(labels),
    )
}

/// Writes a dataset as CSV; values use the shortest representation that
/// parses back to the identical float.
pub fn save_csv<T: Scalar>(path: impl AsRef<Path>, d: &MetricDataset<T>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut header = d.metric_names().join(",");
    if d.labels().is_some() {
        header.push(',');
        header.push_str(LABEL_COLUMN);
    }
    let io = |e| Error::io(path, e);
    writeln!(out, "{header}").map_err(io)?;
    for r in 0..d.len() {
        let mut line = d
            .values()
            .row(r)
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",");
        if let Some(labels) = d.labels() {
            line.push_str(if labels[r] { ",1" } else { ",0" });
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Reads a file of one 0/1 integer per line.
pub fn load_label_file(path: impl AsRef<Path>) -> Result<Vec<bool>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut labels = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        labels.push(parse_label(&line, idx + 1)?);
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput(path.display().to_string()));
    }
    Ok(labels)
}

/// Loads one SMD-style entity: headerless comma-separated rows, metrics
/// named `m0..m{k-1}`, plus an optional label file.
pub fn load_smd_entity<T: Scalar>(
    data_path: impl AsRef<Path>,
    label_path: Option<&Path>,
) -> Result<MetricDataset<T>> {
    let path = data_path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut width = None;
    let mut data = Vec::new();
    let mut rows = 0usize;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let row = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let fields: Vec<&str> = line.split(',').collect();
        let w = *width.get_or_insert(fields.len());
        if fields.len() != w {
            return Err(Error::Parse {
                row,
                message: format!("expected {w} values, found {}", fields.len()),
            });
        }
        for (c, f) in fields.iter().enumerate() {
            data.push(parse_value::<T>(f, row, c + 1)?);
        }
        rows += 1;
    }
    let Some(width) = width else {
        return Err(Error::EmptyInput(path.display().to_string()));
    };
    let labels = match label_path {
        Some(lp) => {
            let labels = load_label_file(lp)?;
            if labels.len() != rows {
                return Err(Error::LabelLength {
                    expected: rows,
                    found: labels.len(),
                });
            }
            Some(labels)
        }
        None => None,
    };
    let names = (0..width).map(|k| format!("m{k}")).collect();
    MetricDataset::new(
        dataset_name(path),
        Matrix::from_vec(rows, width, data)?,
        names,
        labels,
    )
}
