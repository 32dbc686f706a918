use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LcfError {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("attribute value {0} is outside the declared attribute domain")]
    AttributeOutOfDomain(f64),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("argument {value} is outside the valid domain of {what}")]
    OutsideDomain { what: &'static str, value: f64 },

    #[error("missing predictor input: {0}")]
    MissingInput(&'static str),

    #[error("operation not supported: {0}")]
    Unsupported(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error(
        "singular design matrix ({rows} rows, {cols} columns, condition number {condition:.3e})"
    )]
    SingularDesign {
        rows: usize,
        cols: usize,
        condition: f64,
    },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, LcfError>;

impl LcfError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LcfError::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(LcfError::DimensionMismatch {
            context,
            expected,
            got,
        });
    }
    Ok(())
}
