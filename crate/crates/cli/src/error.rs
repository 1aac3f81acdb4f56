use fbcode_neural::NnError;
use thiserror::Error;

/// Failures grouped by process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    /// 2 usage, 3 numeric failure, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

impl From<fbcode_core::Error> for CliError {
    fn from(e: fbcode_core::Error) -> Self {
        use fbcode_core::Error as E;
        match e {
            E::Domain(_) | E::Numeric(_) => CliError::Numeric(e.to_string()),
            E::Config(_) | E::Unsupported(_) | E::InfeasibleSplit { .. } => CliError::Usage(e.to_string()),
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::Core(c) => c.into(),
            NnError::Numeric(_) => CliError::Numeric(e.to_string()),
            NnError::Io(_)
            | NnError::Format(_)
            | NnError::Version { .. }
            | NnError::Checksum { .. }
            | NnError::Truncated(_) => CliError::Io(e.to_string()),
            NnError::Shape(_) | NnError::Usage(_) | NnError::Config(_) | NnError::State(_) => {
                CliError::Usage(e.to_string())
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
