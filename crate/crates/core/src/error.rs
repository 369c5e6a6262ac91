use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("pixel ({col}, {row}) outside {width}x{height} grid")]
    PixelOutOfRange {
        col: usize,
        row: usize,
        width: usize,
        height: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("map is all zero")]
    AllZero,

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: timestamp {t} ms does not increase over previous {prev} ms")]
    NonMonotoneTime { line: usize, t: f64, prev: f64 },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("unknown condition `{0}`")]
    UnknownCondition(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no qualifying samples: {0}")]
    NoQualifyingSamples(String),

    #[error("infeasible plan: {0}")]
    InfeasiblePlan(String),

    #[error("predictor output invalid: {0}")]
    PredictorOutput(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
