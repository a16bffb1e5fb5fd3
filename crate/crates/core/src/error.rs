use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected} values, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("hermitian symmetry broken: max asymmetry {asymmetry:e} exceeds tolerance {tolerance:e}")]
    HermitianViolation { asymmetry: f64, tolerance: f64 },

    #[error("solver diverged at t = {time}: non-finite coefficients")]
    Diverged { time: f64 },

    #[error("invalid configuration at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("perturbation draw degenerate: all raw amplitudes are zero")]
    DegenerateDraw,

    #[error("empty ensemble: no samples accumulated")]
    EmptyEnsemble,

    #[error("ensemble aborted: {failed} of {total} samples diverged (first failing seed index {first_failure})")]
    EnsembleAborted {
        failed: usize,
        total: usize,
        first_failure: u64,
    },

    #[error("sample count mismatch: {0} vs {1}")]
    SampleCountMismatch(usize, usize),

    #[error("window [{start}, {end}] is not covered by the series")]
    WindowOutsideData { start: f64, end: f64 },

    #[error("variance bound violated at t = {time}: value {value} exceeds {bound}")]
    BoundViolated { time: f64, value: f64, bound: f64 },

    #[error("bad magic in field file")]
    BadMagic,

    #[error("malformed field header: {0}")]
    BadHeader(String),

    #[error("unknown field kind `{0}`")]
    UnknownKind(String),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("csv parse error at line {line}: {reason}")]
    Csv { line: usize, reason: String },

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidGrid(_)
                | Error::DimensionMismatch { .. }
                | Error::GridMismatch(_)
                | Error::Config { .. }
                | Error::SampleCountMismatch(..)
                | Error::WindowOutsideData { .. }
                | Error::BadMagic
                | Error::BadHeader(_)
                | Error::UnknownKind(_)
                | Error::Truncated { .. }
                | Error::Csv { .. }
                | Error::Manifest(_)
                | Error::Json(_)
        )
    }
}
