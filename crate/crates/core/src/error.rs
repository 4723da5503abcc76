use thiserror::Error;

/// Errors produced by estimation, tuning and the command-line front end.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("series too short: {len} observations, need at least {min}")]
    TooShort { len: usize, min: usize },

    #[error("invalid lag {lag} for series of length {len}")]
    InvalidLag { lag: usize, len: usize },

    #[error("invalid bandwidth {0}")]
    InvalidBandwidth(f64),

    #[error("singular local design at t = {t}")]
    SingularDesign { t: f64 },

    #[error("degenerate variance estimate at t = {t}")]
    DegenerateVariance { t: f64 },

    #[error("grid alignment error: {0}")]
    Alignment(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("tuning failure: {0}")]
    Tuning(String),

    #[error("i/o error: {0}")]
    Io(String),
}

/// Coarse error categories; each maps onto a process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Parse,
    Numeric,
    Tuning,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 2,
            ErrorCategory::Parse => 3,
            ErrorCategory::Numeric => 4,
            ErrorCategory::Tuning => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorCategory::Config => "config",
            ErrorCategory::Parse => "parse",
            ErrorCategory::Numeric => "numeric",
            ErrorCategory::Tuning => "tuning",
        }
    }
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_)
            | Error::InvalidLag { .. }
            | Error::InvalidBandwidth(_)
            | Error::Io(_) => ErrorCategory::Config,
            Error::Parse { .. } | Error::TooShort { .. } => ErrorCategory::Parse,
            Error::SingularDesign { .. }
            | Error::DegenerateVariance { .. }
            | Error::Alignment(_)
            | Error::Numeric(_) => ErrorCategory::Numeric,
            Error::Tuning(_) => ErrorCategory::Tuning,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
