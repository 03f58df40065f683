use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("degenerate edge")]
    DegenerateEdge,

    #[error("invalid penalty ratio {0} (must be finite and >= 0)")]
    InvalidPenaltyRatio(f64),

    #[error("unknown metric `{0}` (expected one of BEV, 3D, CS-BEV, CS-ABS)")]
    UnknownMetric(String),

    #[error("unknown difficulty `{0}`")]
    UnknownDifficulty(String),

    #[error("duplicate frame id `{0}`")]
    DuplicateFrame(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("bin count mismatch: {left} vs {right}")]
    BinCountMismatch { left: usize, right: usize },

    #[error("normalization collapses box")]
    NormalizationCollapsesBox,

    #[error("invalid scale factor {0} (must be finite and > 0)")]
    InvalidScaleFactor(f64),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("tensor format: {0}")]
    TensorFormat(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
