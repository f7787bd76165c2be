use std::path::PathBuf;

use num_complex::Complex64;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Evaluation hit a pole or an essential singularity.
    #[error("pole at {point}: {what}")]
    Pole { point: Complex64, what: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Level-curve tracing or decomposition failed; carries a diagnostic.
    #[error("geometry failure: {0}")]
    Geometry(String),

    #[error("symbol is not a map: {0}")]
    NotAMap(String),

    /// Iterative solver or quadrature did not converge.
    #[error("numeric failure in {context}: {detail}")]
    Numeric { context: String, detail: String },

    #[error("root oracle inconclusive at {point}: {detail}")]
    OracleInconclusive { point: Complex64, detail: String },

    #[error("measure is not binned on this decomposition")]
    BinningMismatch,

    #[error("unsupported domain: {0}")]
    UnsupportedDomain(String),

    #[error("index {index} out of range 1..={len}")]
    Index { index: usize, len: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn numeric(context: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Numeric {
            context: context.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
