use thiserror::Error;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_EXHAUSTED: i32 = 3;
pub const EXIT_ASSERTION: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Exhausted(propa::Error),
    #[error("assertion failed: {0}")]
    Assertion(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(propa::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Exhausted(_) => EXIT_EXHAUSTED,
            CliError::Assertion(_) => EXIT_ASSERTION,
            CliError::Io { .. } | CliError::Core(_) => EXIT_FAILURE,
        }
    }
}

impl From<propa::Error> for CliError {
    fn from(e: propa::Error) -> Self {
        match e {
            propa::Error::SelectionExhausted { .. } => CliError::Exhausted(e),
            propa::Error::InvalidParameter(_)
            | propa::Error::Format(_)
            | propa::Error::Json(_)
            | propa::Error::TooLarge { .. }
            | propa::Error::InvalidMetric(_)
            | propa::Error::PointOutOfRange { .. } => CliError::Config(e.to_string()),
            other => CliError::Core(other),
        }
    }
}
