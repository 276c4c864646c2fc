use std::fmt;
use std::io;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numeric => 4,
        }
    }
}

/// An error tagged with the pipeline stage that raised it.
#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub stage: String,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ErrorKind, stage: &str, message: impl fmt::Display) -> Self {
        CliError {
            kind,
            stage: stage.to_string(),
            message: message.to_string(),
        }
    }

    pub fn config(stage: &str, message: impl fmt::Display) -> Self {
        Self::new(ErrorKind::Config, stage, message)
    }

    pub fn data(stage: &str, message: impl fmt::Display) -> Self {
        Self::new(ErrorKind::Data, stage, message)
    }

    pub fn numeric(stage: &str, message: impl fmt::Display) -> Self {
        Self::new(ErrorKind::Numeric, stage, message)
    }

    /// I/O failures count as data errors.
    pub fn io(stage: &str, err: io::Error) -> Self {
        Self::data(stage, err)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.stage, self.message)
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;

/// Attaches a stage name to any displayable error.
pub trait StageContext<T> {
    fn stage(self, kind: ErrorKind, stage: &str) -> CliResult<T>;
}

impl<T, E: fmt::Display> StageContext<T> for Result<T, E> {
    fn stage(self, kind: ErrorKind, stage: &str) -> CliResult<T> {
        self.map_err(|e| CliError::new(kind, stage, e))
    }
}
