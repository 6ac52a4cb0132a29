use std::fmt;
use std::path::Path;

/// Failure categories, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    /// every violation found while validating the run configuration
    Config(Vec<String>),
    /// unreadable or malformed input data
    Input(String),
    /// training, evaluation or analysis failed
    Compute(String),
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Input(_) => 3,
            CliError::Compute(_) => 4,
            CliError::Io { .. } => 5,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(vec![msg.into()])
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(problems) => {
                write!(f, "configuration error ({} problem{}):", problems.len(), if problems.len() == 1 { "" } else { "s" })?;
                for p in problems {
                    write!(f, "\n  - {p}")?;
                }
                Ok(())
            }
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Compute(m) => write!(f, "computation error: {m}"),
            CliError::Io { path, source } => write!(f, "i/o error: {path}: {source}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<gridcause::data::DataError> for CliError {
    fn from(e: gridcause::data::DataError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<gridcause::svi::SviError> for CliError {
    fn from(e: gridcause::svi::SviError) -> Self {
        CliError::Compute(e.to_string())
    }
}

impl From<gridcause::eval::EvalError> for CliError {
    fn from(e: gridcause::eval::EvalError) -> Self {
        CliError::Compute(e.to_string())
    }
}

impl From<gridcause::analysis::AnalysisError> for CliError {
    fn from(e: gridcause::analysis::AnalysisError) -> Self {
        CliError::Compute(e.to_string())
    }
}
