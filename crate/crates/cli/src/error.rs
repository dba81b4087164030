use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] bspnn::Error),
    #[error("internal error: {0}")]
    Internal(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    /// 0 success, 2 validation, 3 data, 4 internal.
    pub fn exit_code(&self) -> i32 {
        use bspnn::Error as E;
        match self {
            CliError::Validation(_) => 2,
            CliError::Internal(_) => 4,
            CliError::Core(e) => match e.root() {
                E::InvalidSchema(_)
                | E::InvalidCategoryMap(_)
                | E::InvalidClusterTable(_)
                | E::InvalidCostMatrix(_)
                | E::InvalidConfig(_)
                | E::SearchSpaceInvalid(_)
                | E::QuantileOutOfRange(_) => 2,
                E::FieldCountMismatch { .. }
                | E::MalformedNumeric { .. }
                | E::EmptyLabel
                | E::UnknownAttackName(_)
                | E::EmptyDataset
                | E::EncoderMismatch(_)
                | E::UncoveredAttackName(_)
                | E::IndexOutOfRange { .. }
                | E::WidthMismatch { .. }
                | E::MixedLabels(_)
                | E::EmptyMatrix
                | E::DocumentFormat { .. }
                | E::UnsupportedVersion { .. }
                | E::Io { .. }
                | E::Json(_) => 3,
                _ => 4,
            },
        }
    }
}

pub(crate) fn io_error(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Core(bspnn::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}
