use std::fmt;
use std::path::PathBuf;

/// A single violated field constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl Violation {
    pub fn new(field: &'static str, message: impl Into<String>) -> Self {
        Self {
            field,
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn join(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid model parameters: {}", join(.0))]
    InvalidParams(Vec<Violation>),

    #[error("invalid state: {}", join(.0))]
    InvalidState(Vec<Violation>),

    #[error("invalid integration controls: {}", join(.0))]
    InvalidControls(Vec<Violation>),

    #[error("invalid scenario: {}", join(.0))]
    InvalidScenario(Vec<Violation>),

    #[error("integration diverged at t = {time} days")]
    Diverged { time: f64 },

    #[error("parameter `{0}` is fixed and cannot be swept (only b1, b2, o, w1, w2, w3 are adjustable)")]
    FixedParameter(String),

    #[error("unknown parameter `{0}` (expected one of b1, b2, o, w1, w2, w3)")]
    UnknownParameter(String),

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{path}: parse error at line {line}, column {column} (field `{field}`): {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        field: String,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
