use std::path::PathBuf;

use crate::grid::Shape;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {left} vs {right}")]
    ShapeMismatch { left: Shape, right: Shape },

    #[error("layout mismatch: scales {left:?} vs {right:?}")]
    LayoutMismatch { left: Vec<u32>, right: Vec<u32> },

    #[error("scale mismatch: weights carry scales {weights:?}, field carries {field:?}")]
    ScaleMismatch { weights: Vec<u32>, field: Vec<u32> },

    #[error("invalid scale {0}: window sizes must be odd and at least 3")]
    InvalidScale(u32),

    #[error("invalid scale list {0:?}: scales must be strictly ascending and nonempty")]
    InvalidScaleList(Vec<u32>),

    #[error("invalid contrast ratio {0}: ratios must be finite and > 0")]
    InvalidRatio(f64),

    #[error("canvas {width}x{height} is too small (minimum 32x32)")]
    CanvasTooSmall { width: usize, height: usize },

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("corrupt file: {0}")]
    CorruptFile(String),

    #[error("unsupported container version {found} (expected {expected})")]
    VersionMismatch { found: u16, expected: u16 },

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("dataset mismatch: {0}")]
    UnpairedFiles(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors raised while touching the filesystem or decoding file
    /// contents, as opposed to rejected arguments.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::UnsupportedFormat(_)
                | Error::CorruptFile(_)
                | Error::VersionMismatch { .. }
                | Error::TruncatedPayload { .. }
                | Error::UnpairedFiles(_)
        )
    }
}
