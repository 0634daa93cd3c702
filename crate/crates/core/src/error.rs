use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate axis: norm {0:e} is not unit length")]
    DegenerateAxis(f64),

    #[error("cannot normalize vector with norm {0:e}")]
    ZeroVector(f64),

    #[error("degenerate frame: keypoints are collinear (area {0:e} m^2)")]
    DegenerateFrame(f64),

    #[error("degenerate projection: vector is collinear with the rotation axis")]
    DegenerateProjection,

    #[error("joint index {0} out of range")]
    JointIndex(usize),

    #[error("robot model {name}: joint {joint}: {reason}")]
    ModelInvariant {
        name: String,
        joint: usize,
        reason: String,
    },

    #[error("robot model: {0}")]
    Model(String),

    #[error("failed to parse {what}: {message}")]
    Parse { what: String, message: String },

    #[error("trajectory line {line}: {message}")]
    Trajectory { line: usize, message: String },

    #[error("invalid filter parameters: {0}")]
    FilterParams(String),

    #[error("i/o error on {path}: {source}")]
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
}
