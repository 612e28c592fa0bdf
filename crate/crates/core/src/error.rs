use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error(
        "not positive definite: min eigenvalue {min_eig:e} below floor {floor:e} (1e-12 * max eigenvalue {max_eig:e})"
    )]
    NotPositiveDefinite { min_eig: f64, max_eig: f64, floor: f64 },

    #[error("{op}: eigenvalue {eigenvalue:e} outside the domain ({requirement})")]
    Domain {
        op: &'static str,
        eigenvalue: f64,
        requirement: &'static str,
    },

    #[error("symmetric eigensolver did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate plane: denominator {denominator:e} below floor {floor:e}")]
    DegeneratePlane { denominator: f64, floor: f64 },

    #[error("finite-difference stencil left the positive-definite cone at offset {offset:e}")]
    StencilFailure { offset: f64 },

    #[error("rank deficient: effective rank {rank} of {dim}")]
    RankDeficient { rank: usize, dim: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors that come from numerical domain violations rather than
    /// malformed input or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::Domain { .. }
                | Error::NoConvergence { .. }
                | Error::DegeneratePlane { .. }
                | Error::StencilFailure { .. }
                | Error::RankDeficient { .. }
                | Error::DimensionMismatch { .. }
                | Error::NonFinite { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
