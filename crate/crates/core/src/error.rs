use std::path::PathBuf;

use thiserror::Error;

/// Errors produced across the planner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty raster")]
    EmptyRaster,

    #[error("no free space in workspace")]
    NoFreeSpace,

    #[error("point ({x}, {y}) lies outside the grid")]
    OutOfBounds { x: f64, y: f64 },

    #[error("configuration ({x}, {y}, {z}) is not free")]
    NotFree { x: f64, y: f64, z: f64 },

    #[error("invalid start state: task predicate does not hold")]
    InvalidStart,

    #[error("observation does not match policy: {0}")]
    DimensionMismatch(String),

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("{planner} planner requires a trained policy")]
    MissingPolicy { planner: String },

    #[error("unsupported {kind} version {found} (expected {expected})")]
    VersionMismatch {
        kind: &'static str,
        found: String,
        expected: u32,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("image decode failed for {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
