use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid batch: {0}")]
    InvalidBatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite or out-of-range value: {0}")]
    Numeric(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invalid config fields: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    /// Short machine-readable category, used for CLI exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::InvalidBatch(_) => "invalid_batch",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Numeric(_) => "numeric",
            Error::State(_) => "state",
            Error::Config(_) => "config",
            Error::Precondition(_) => "precondition",
            Error::Validation(_) => "validation",
            Error::Io(_) => "io",
            Error::Format(_) => "format",
        }
    }

    /// Process exit code for this category. Usage errors from argument parsing use 2.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Config(_) => 3,
            Error::Io(_) => 4,
            Error::Format(_) => 5,
            Error::Precondition(_) | Error::State(_) => 6,
            Error::Dimension { .. } | Error::InvalidBatch(_) | Error::InvalidArgument(_) | Error::Numeric(_) => 7,
        }
    }

    pub(crate) fn dim(expected: usize, got: usize) -> Self {
        Error::Dimension { expected, got }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            if let csv::ErrorKind::Io(io) = e.into_kind() {
                return Error::Io(io);
            }
            unreachable!("is_io_error implies an io kind");
        }
        Error::Format(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Error::Io(e.into())
        } else {
            Error::Format(e.to_string())
        }
    }
}

