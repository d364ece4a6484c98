use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("component {index} is not strictly positive ({value}); smooth the histogram before using a statistical distance")]
    NonPositiveComponent { index: usize, value: f64 },

    #[error("component {index} is not finite")]
    NonFinite { index: usize },

    #[error("zero-norm vector under cosine distance")]
    ZeroNorm,

    #[error("point {point}: {source}")]
    InvalidPoint {
        point: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("need at least {needed} points, got {got}")]
    NotEnoughPoints { needed: usize, got: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(
        "no candidate base reaches accuracy {target}; best achieved accuracy is {best_accuracy}"
    )]
    NoFeasibleTransform { target: f64, best_accuracy: f64 },

    #[error("incompatible ground truth: {0}")]
    IncompatibleTruth(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
