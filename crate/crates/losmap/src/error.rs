//! Crate-wide error type.

use std::path::PathBuf;

use crate::hull::HullError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(
        "frame {frame_id} at t={timestamp:.4}s: nearest trajectory pose at t={nearest:.4}s \
         is outside the {tolerance}s association window"
    )]
    PoseAssociation {
        frame_id: u64,
        timestamp: f64,
        nearest: f64,
        tolerance: f64,
    },

    #[error(transparent)]
    Hull(#[from] HullError),

    #[error("frame {frame_id}: every sector degenerate, no mesh produced")]
    EmptyMesh { frame_id: u64 },

    #[error("point {index} coincides with the viewpoint (zero norm), cannot invert")]
    ZeroNormPoint { index: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("config: {0}")]
    Config(String),

    #[error("scene: {0}")]
    Scene(String),

    #[error("metrics: {0}")]
    Metrics(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by bad input files or parameters rather than
    /// runtime failures; the CLI maps these to exit code 2.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Config(_)
                | Error::Scene(_)
                | Error::Parameter(_)
                | Error::Io { .. }
        )
    }
}
