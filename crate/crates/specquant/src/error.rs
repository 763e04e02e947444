//! Application-level errors with machine-parsable codes and exit statuses.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Core(#[from] specquant_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{row}: {msg}")]
    Parse {
        path: PathBuf,
        row: usize,
        msg: String,
    },
    #[error("schema error in {path}: {msg}")]
    Schema { path: PathBuf, msg: String },
    #[error("unsupported format version in {path}: expected {expected}, got {got}")]
    Version {
        path: PathBuf,
        expected: u32,
        got: u32,
    },
    #[error("truncated payload in {path}")]
    Truncated { path: PathBuf },
    #[error("fingerprint mismatch: {msg}")]
    Fingerprint { msg: String },
    #[error("invalid arguments: {0}")]
    Usage(String),
}

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }

    /// Short slug for the `ERROR[<code>]:` prefix.
    pub fn code(&self) -> String {
        match self {
            AppError::Core(e) => e.code().to_string(),
            AppError::Io { .. } => "io".into(),
            AppError::Parse { .. } => "parse".into(),
            AppError::Schema { .. } => "schema".into(),
            AppError::Version { .. } => "version".into(),
            AppError::Truncated { .. } => "truncated".into(),
            AppError::Fingerprint { .. } => "fingerprint".into(),
            AppError::Usage(_) => "usage".into(),
        }
    }

    /// 1 for configuration errors, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}
