//! Error type shared by all modules of the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {format} header: {reason}")]
    MalformedHeader { format: &'static str, reason: String },

    #[error("unsupported maxval {0}: only 8-bit (maxval 255) images are supported")]
    UnsupportedMaxval(u32),

    #[error("truncated payload: expected {expected} bytes, found {actual}")]
    TruncatedPayload { expected: usize, actual: usize },

    #[error("invalid raster dimensions {height}x{width}")]
    InvalidDimensions { height: usize, width: usize },

    #[error("dimension mismatch in {context}: {a:?} vs {b:?}")]
    DimensionMismatch {
        context: &'static str,
        a: (usize, usize),
        b: (usize, usize),
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("affine transform is numerically singular (det = {det:e})")]
    SingularAffine { det: f64 },

    #[error("zero variance in {0}: correlation undefined")]
    ZeroVariance(&'static str),

    #[error("degenerate mask: {selected} pixels selected, at least {required} required")]
    DegenerateMask { selected: usize, required: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors arising from numerical degeneracy rather than bad
    /// input data; the CLI maps these to a distinct exit code.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularAffine { .. } | Error::ZeroVariance(_) | Error::DegenerateMask { .. }
        )
    }
}
