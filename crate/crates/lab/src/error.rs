use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error(transparent)]
    Core(#[from] piezobeam::Error),

    #[error("cannot read config {path}: {source}")]
    ConfigRead { path: PathBuf, source: std::io::Error },

    #[error("unknown check `{0}` (known: {1})")]
    UnknownCheck(String, String),

    #[error("unknown variant `{0}` (expected current, charge_magnetic or electrostatic)")]
    UnknownVariant(String),

    #[error("invalid option: {0}")]
    InvalidOption(String),

    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LabError {
    /// Process exit status: 2 for configuration problems, 3 for I/O, 1 for
    /// everything that fails while computing.
    pub fn exit_code(&self) -> i32 {
        use piezobeam::Error as E;
        match self {
            LabError::Core(e) => match e {
                E::NonPositiveParameter(_)
                | E::DegenerateXi
                | E::GridTooCoarse(_)
                | E::InvalidConfig(_)
                | E::ConfigParse(_)
                | E::GaugeViolation { .. }
                | E::DimensionMismatch { .. }
                | E::TooLarge(_) => 2,
                E::Io(_) => 3,
                E::Csv(c) if matches!(c.kind(), csv::ErrorKind::Io(_)) => 3,
                E::Csv(_) => 2,
                _ => 1,
            },
            LabError::ConfigRead { .. } | LabError::UnknownCheck(..) | LabError::UnknownVariant(_) | LabError::InvalidOption(_) => 2,
            LabError::Output { .. } => 3,
            LabError::Json(_) => 1,
        }
    }
}

pub type LabResult<T> = Result<T, LabError>;
