use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by spectrum recovery and its supporting routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An eigenvalue below the numerical-zero tolerance.
    #[error("negative eigenvalue {value} at index {index}")]
    NegativeEigenvalue { index: usize, value: f64 },

    /// NaN or infinite input.
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("spectrum is empty")]
    EmptySpectrum,

    #[error("invalid parameters: {0}")]
    BadParams(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// Two sample eigenvalues too close for the correction sum.
    #[error("degenerate denominator between sample eigenvalues {i} and {j}")]
    DegenerateDenominator { i: usize, j: usize },

    #[error("eigendecomposition did not converge")]
    EigenDecompositionFailure,

    /// Marchenko-Pastur ratio outside (0, 1].
    #[error("ratio {0} outside (0, 1]")]
    BadRatio(f64),

    #[error("invalid scale factor {factor} for dimension {p}")]
    BadFactor { factor: usize, p: usize },

    #[error("invalid dimensions: {0}")]
    BadDimensions(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse error category, stable across releases for scripting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numerical,
    Io,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Validation => 2,
            ErrorClass::Numerical => 3,
            ErrorClass::Io => 4,
        }
    }
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::DegenerateDenominator { .. } | Error::EigenDecompositionFailure => ErrorClass::Numerical,
            Error::Io { .. } | Error::Parse { .. } | Error::Json(_) => ErrorClass::Io,
            _ => ErrorClass::Validation,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
