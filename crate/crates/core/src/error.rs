use thiserror::Error;

use crate::trainer::TrajectoryRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension too small: need at least {required} but got {actual}")]
    DimensionTooSmall { required: usize, actual: usize },

    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("config syntax error on line {line}: {message}")]
    ConfigSyntax { line: usize, message: String },

    #[error("label mismatch: point is labeled {actual}, expected {expected}")]
    LabelMismatch { expected: usize, actual: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("dataset has no cross-class pair")]
    SingleClass,

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate distribution: {0}")]
    DegenerateDistribution(String),

    #[error("training diverged at iteration {iteration}: {reason}")]
    Diverged {
        iteration: usize,
        reason: String,
        record: Box<TrajectoryRecord>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag, used in the CLI's error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionTooSmall { .. } => "dimension_too_small",
            Error::InvalidConfig(_) => "invalid_config",
            Error::ConfigSyntax { .. } => "config_syntax",
            Error::LabelMismatch { .. } => "label_mismatch",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::IndexOutOfRange(_) => "index_out_of_range",
            Error::EmptyDataset => "empty_dataset",
            Error::SingleClass => "single_class",
            Error::NonFinite(_) => "non_finite",
            Error::Domain(_) => "domain",
            Error::DegenerateDistribution(_) => "degenerate_distribution",
            Error::Diverged { .. } => "diverged",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
