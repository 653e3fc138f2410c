//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

/// Errors produced by any rigkit operation.
#[derive(Debug, Error)]
pub enum Error {
    /// The file does not exist.
    #[error("file not found: {0}")]
    MissingFile(PathBuf),

    /// An I/O failure other than a missing file.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The byte stream could not be decoded (corrupt or truncated PNG).
    #[error("failed to decode {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    /// The file decoded fine but is not an 8-bit 1- or 3-channel raster.
    #[error("unsupported raster format in {path}: {detail}")]
    UnsupportedFormat { path: PathBuf, detail: String },

    /// A buffer was constructed with the wrong number of samples.
    #[error("buffer length {got} does not match dimensions (expected {expected})")]
    BufferSize { expected: usize, got: usize },

    /// Two rasters that must share dimensions do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A linear system had no unique solution.
    #[error("singular system: {0}")]
    Singular(&'static str),

    /// A point projected to infinity (zero homogeneous denominator).
    #[error("point at infinity under homography")]
    PointAtInfinity,

    /// The inverse-distortion iteration failed to converge.
    #[error("undistortion did not converge after {iterations} iterations (last step {last_step:.3e})")]
    UndistortDiverged { iterations: u32, last_step: f64 },

    /// A parameter violated its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// A label value exceeded the class table.
    #[error("class id {id} out of range (table has {count} classes)")]
    ClassOutOfRange { id: u8, count: usize },

    /// Metrics were requested from a matrix with no counted pixels.
    #[error("confusion matrix is empty")]
    EmptyConfusion,

    /// A rig, policy, class or manifest file failed validation.
    #[error("config error in {path}: {reason}")]
    Config { path: PathBuf, reason: String },

    /// The camera rig and the supplied frames do not line up.
    #[error("rig/frame mismatch: {0}")]
    RigMismatch(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
