use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A scalar argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index {index} out of range 1..={len}")]
    Index { index: usize, len: usize },

    #[error("lag {lag} must be smaller than series length {len}")]
    Lag { lag: usize, len: usize },

    /// Not enough (observed) data to compute a loss, a window or a fit.
    #[error("empty data: {0}")]
    EmptyData(String),

    #[error("series has zero variance")]
    ZeroVariance,

    #[error("AR(1) coefficient {0} is not stable (|beta| must be < 1)")]
    Unstable(f64),

    #[error("query time {query} outside prediction range [{first}, {last}]")]
    Extrapolation { query: f64, first: f64, last: f64 },

    #[error("unsupported layer: {0}")]
    UnsupportedLayer(String),

    #[error("warp factor gamma = 1 has no defined shift sign")]
    UndefinedSign,

    #[error("inconsistent equilibria: wetting {e_w} exceeds drying {e_d}")]
    InconsistentEquilibria { e_d: f64, e_w: f64 },

    #[error("parse error in {path:?} at row {row}: {msg}")]
    Parse { path: PathBuf, row: usize, msg: String },

    #[error("failed to load weights: {0}")]
    Load(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn empty(msg: impl Into<String>) -> Self {
        Error::EmptyData(msg.into())
    }

    /// Process exit status for the command-line front end.
    ///
    /// Parse, domain and empty-data failures get distinct codes so scripts can
    /// tell bad input files from bad parameters from unusable data.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Load(_) | Error::Json(_) | Error::Csv(_) | Error::Config(_) => 2,
            Error::Domain(_)
            | Error::Index { .. }
            | Error::Lag { .. }
            | Error::ZeroVariance
            | Error::Unstable(_)
            | Error::Extrapolation { .. }
            | Error::UndefinedSign
            | Error::InconsistentEquilibria { .. } => 3,
            Error::EmptyData(_) => 4,
            Error::Shape(_) | Error::UnsupportedLayer(_) => 5,
            Error::Io(_) => 1,
        }
    }
}
