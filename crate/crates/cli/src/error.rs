use serde::Serialize;

/// Failure classes with their process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// A validation check or an internal consistency check failed.
    CheckFailed,
    Config,
    Feasibility,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::CheckFailed => 1,
            ErrorKind::Config => 2,
            ErrorKind::Feasibility => 3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Config,
            message: message.into(),
        }
    }

    pub fn check_failed(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::CheckFailed,
            message: message.into(),
        }
    }

    /// The machine-readable form written to stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": {
                "kind": self.kind,
                "exit_code": self.kind.exit_code(),
                "message": self.message,
            }
        })
        .to_string()
    }
}

impl From<hankel_les::Error> for CliError {
    fn from(e: hankel_les::Error) -> Self {
        use hankel_les::Error::*;
        let kind = match &e {
            InputShape(_) | Domain(_) => ErrorKind::Config,
            Feasibility(_) => ErrorKind::Feasibility,
            Numeric(_) => ErrorKind::CheckFailed,
        };
        CliError {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::config(format!("io: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::config(format!("csv: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::config(format!("json: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
