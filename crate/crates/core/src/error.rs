use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the geometry, propagation and fusion routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("projection is singular: denominator magnitude {0:e}")]
    ProjectionSingular(f64),

    #[error("affine fit failed: {0}")]
    FitFailed(String),

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("refinement did not converge after {iterations} iterations (last step {last_step:e} m)")]
    RefinementNotConverged {
        iterations: usize,
        last_step: f64,
        last: [f64; 3],
    },

    #[error("covariance error: {0}")]
    Covariance(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what} in {path}: {reason}")]
    Format {
        what: &'static str,
        path: PathBuf,
        reason: String,
    },
}

impl Error {
    /// True for file-system and file-format failures, as opposed to numerical
    /// or domain failures.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Format { .. })
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(what: &'static str, path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Error::Format {
            what,
            path: path.into(),
            reason: reason.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
