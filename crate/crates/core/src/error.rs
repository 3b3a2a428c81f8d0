use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An estimator query was made before any observation was absorbed.
    #[error("estimator state: {0}")]
    State(String),

    #[error("numeric overflow: {0}")]
    NumericOverflow(String),

    #[error("argument outside the domain of the bound: {0}")]
    Domain(String),

    #[error("environment exhausted: round {round} requested but only {available} instances exist")]
    Exhausted { round: usize, available: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("failed to load {path}: {message}")]
    Load { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("repetition {rep}: {source}")]
    Repetition {
        rep: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Process exit code for the CLI: 1 configuration, 2 i/o, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Config(_) | Error::Exhausted { .. } => 1,
            Error::Load { .. } | Error::Io { .. } => 2,
            Error::State(_) | Error::NumericOverflow(_) | Error::Domain(_) => 3,
            Error::Repetition { source, .. } => source.exit_code(),
        }
    }
}
