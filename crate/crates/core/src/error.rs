// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    /// `row` is 1-based and counts data rows (the header is not row 1).
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    /// `row` and `col` are 1-based.
    #[error("non-finite value at (row {row}, col {col})")]
    NonFinite { row: usize, col: usize },

    #[error("invalid label {value:?} at row {row}: labels must be 0 or 1")]
    InvalidLabel { row: usize, value: String },

    #[error("label length {found} does not match {expected} observations")]
    LabelLength { expected: usize, found: usize },

    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("insufficient data: need at least {needed} rows, have {found}")]
    InsufficientData { needed: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model file format error: {0}")]
    Format(String),

    #[error("unsupported model file version {found} (this build reads version {supported})")]
    Version { found: u32, supported: u32 },

    #[error("model file checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    Checksum { stored: u32, computed: u32 },

    #[error("non-finite gradient in parameter {param}")]
    NonFiniteGradient { param: String },

    #[error("training diverged at epoch {epoch}: {message}")]
    Diverged { epoch: usize, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by bad inputs (files, shapes, arguments) as
    /// opposed to numeric failures during a run.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::NonFiniteGradient { .. } | Error::Diverged { .. }
        )
    }
}
