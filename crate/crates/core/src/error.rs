use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // ingestion
    #[error("expected {expected} comma-separated fields, found {found}")]
    FieldCountMismatch { expected: usize, found: usize },
    #[error("column {column}: malformed numeric value {value:?}")]
    MalformedNumeric { column: usize, value: String },
    #[error("empty attack label")]
    EmptyLabel,
    #[error("unknown attack name {0:?}")]
    UnknownAttackName(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("invalid category map: {0}")]
    InvalidCategoryMap(String),
    #[error("encoder mismatch: {0}")]
    EncoderMismatch(String),

    // dataset construction
    #[error("invalid cluster table: {0}")]
    InvalidClusterTable(String),
    #[error("attack {0:?} is not covered by any cluster")]
    UncoveredAttackName(String),
    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    // learners
    #[error("bandwidth must be positive")]
    NonPositiveBandwidth,
    #[error("member weights sum to zero")]
    ZeroTotalWeight,
    #[error("vector width {found} does not match model width {expected}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("invalid bandwidth search space: {0}")]
    SearchSpaceInvalid(String),
    #[error("distribution size must be at least 1")]
    ZeroSize,
    #[error("all weights are zero")]
    AllZeroWeights,
    #[error("invalid boosting configuration: {0}")]
    InvalidConfig(String),
    #[error("class index {index} out of range for {classes} classes")]
    ClassIndexOutOfRange { index: usize, classes: usize },
    #[error("one-class training data contains class {0}")]
    MixedLabels(usize),
    #[error("quantile {0} outside (0, 1)")]
    QuantileOutOfRange(f64),
    #[error("density model has no calibrated threshold")]
    UncalibratedModel,

    // evaluation
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("class {0} has no instances")]
    EmptyClass(usize),
    #[error("no instances outside class {0}")]
    EmptyComplement(usize),
    #[error("dimension mismatch: confusion {confusion}x{confusion}, cost {cost}x{cost}")]
    DimensionMismatch { confusion: usize, cost: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("invalid cost matrix: {0}")]
    InvalidCostMatrix(String),

    // persistence
    #[error("expected a {expected:?} document, found {found:?}")]
    DocumentFormat { expected: String, found: String },
    #[error("unsupported document version {found} (expected {expected})")]
    UnsupportedVersion { expected: u32, found: u32 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    AtLine {
        path: PathBuf,
        line: usize,
        #[source]
        source: Box<Error>,
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

    /// Strips file/line wrappers and returns the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtLine { source, .. } => source.root(),
            other => other,
        }
    }
}
