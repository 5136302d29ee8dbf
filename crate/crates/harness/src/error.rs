//! Harness error type with process exit-code mapping.

use thiserror::Error;

/// Exit code for assertion violations.
pub const EXIT_VIOLATIONS: i32 = 2;
/// Exit code for usage/config errors.
pub const EXIT_USAGE: i32 = 64;
/// Exit code for I/O failures.
pub const EXIT_IO: i32 = 74;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("core error: {0}")]
    Core(#[from] iterstab_core::Error),
    #[error("config error: {0}")]
    Config(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) | HarnessError::Config(_) => EXIT_USAGE,
            HarnessError::Io { .. } => EXIT_IO,
            HarnessError::Core(_) => EXIT_USAGE,
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
