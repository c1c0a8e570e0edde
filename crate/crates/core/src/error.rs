use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{0}")]
    Domain(String),

    #[error("amplitude too large: |dy/ds| = {slope:.6} >= 1 at frame {frame}, s = {s:.6e} m")]
    Inextensible { frame: usize, s: f64, slope: f64 },

    #[error("degenerate centerline tangent at frame {frame}, sample {sample}")]
    DegenerateFrame { frame: usize, sample: usize },

    #[error("non-uniform time grid: step {index} is {step:.9e} s, expected {expected:.9e} s")]
    NonUniformTime { index: usize, step: f64, expected: f64 },

    #[error("non-finite value in {field} at frame {frame}, sample {sample}")]
    NonFinite {
        field: &'static str,
        frame: usize,
        sample: usize,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("{what}: need at least {need}, got {got}")]
    TooShort {
        what: &'static str,
        need: usize,
        got: usize,
    },

    #[error("singular calibration fit: {0}")]
    SingularFit(String),

    #[error("unreachable tolerance: {0}")]
    Unreachable(String),

    #[error("{path}: {err}")]
    Io { path: PathBuf, err: std::io::Error },

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error("{path}: file is locked by another writer")]
    Locked { path: PathBuf },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, err: std::io::Error) -> Self {
        Error::Io { path: path.into(), err }
    }
}
