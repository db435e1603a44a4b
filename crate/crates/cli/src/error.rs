use std::process::ExitCode;

use serde::Serialize;

/// Failure of one invocation, classified by exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] osr_core::Error),

    #[error("{0}")]
    Runtime(String),

    #[error("{0}")]
    Certificate(String),
}

#[derive(Serialize)]
struct Report<'a> {
    kind: &'a str,
    exit_code: u8,
    message: String,
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) | CliError::Core(osr_core::Error::Config(_)) => "config",
            CliError::Core(_) | CliError::Runtime(_) => "runtime",
            CliError::Certificate(_) => "certificate",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.kind() {
            "usage" | "config" => 1,
            "certificate" => 3,
            _ => 2,
        }
    }

    /// One JSON line on stderr.
    pub fn report(&self) -> ExitCode {
        let report = Report {
            kind: self.kind(),
            exit_code: self.exit_code(),
            message: self.to_string(),
        };
        let line = serde_json::json!({ "error": report });
        eprintln!("{line}");
        ExitCode::from(self.exit_code())
    }
}

pub type CliResult<T> = Result<T, CliError>;
