use thiserror::Error;

use crate::geometry::WhiskerId;

/// Errors raised by the library.
///
/// Variants fall in three families that the command-line surface maps onto
/// distinct exit codes: argument/configuration problems, data problems, and
/// estimation failures caused by the data itself.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown whisker id {0}")]
    UnknownWhisker(WhiskerId),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("no calibration for whisker {0}")]
    MissingCalibration(WhiskerId),

    #[error("no samples for whisker(s): {}", join_ids(.0))]
    MissingData(Vec<WhiskerId>),

    #[error("direction undefined for a zero vector")]
    UndefinedDirection,

    #[error("no usable signal: all magnitudes are zero")]
    NoSignal,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

fn join_ids(ids: &[WhiskerId]) -> String {
    ids.iter()
        .map(|id| id.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    /// True for malformed input data (as opposed to a bad argument or config).
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::MissingData(_)
                | Error::Parse { .. }
                | Error::NoSignal
                | Error::InsufficientData(_)
                | Error::DegenerateGeometry(_)
                | Error::UndefinedDirection
                | Error::Io(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
