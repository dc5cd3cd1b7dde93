use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("row {row}: expected {expected} fields, found {found}")]
    MalformedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("row {row}, field {field}: {msg}")]
    Data {
        row: usize,
        field: usize,
        msg: String,
    },

    #[error("label {label} out of range for {num_classes} classes (row {row})")]
    LabelRange {
        row: usize,
        label: usize,
        num_classes: usize,
    },

    #[error("stratification: {0}")]
    Stratification(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    Shape {
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training state: {0}")]
    TrainingState(String),

    #[error("training diverged at step {step}: loss = {loss}")]
    Divergence { step: usize, loss: f64 },

    #[error("format: {0}")]
    Format(String),

    #[error("image encoding: {0}")]
    Image(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(expected: &[usize], got: &[usize]) -> Self {
        Error::Shape {
            expected: expected.to_vec(),
            got: got.to_vec(),
        }
    }
}
