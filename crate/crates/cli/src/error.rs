use std::path::PathBuf;

use sgpca::SgpcaError;
use thiserror::Error;

/// Everything the command-line layer can fail with. Each variant maps onto
/// one process exit code through [`CliError::exit_code`].
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        column: usize,
        message: String,
    },

    #[error("{path}: line {line}: ragged row with {found} fields, expected {expected}")]
    Ragged {
        path: PathBuf,
        line: u64,
        expected: usize,
        found: usize,
    },

    #[error("{path}: empty file")]
    Empty { path: PathBuf },

    #[error("{path}: coverage-gap: column {index} is not assigned to any group")]
    CoverageGap { path: PathBuf, index: usize },

    #[error("{path}: duplicate-assignment: column {index} is listed more than once")]
    DuplicateAssignment { path: PathBuf, index: usize },

    #[error("{path}: column index {index} out of range for {p} columns")]
    OutOfRange {
        path: PathBuf,
        index: usize,
        p: usize,
    },

    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: SgpcaError,
    },
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn core(context: impl Into<String>, source: SgpcaError) -> Self {
        CliError::Core {
            context: context.into(),
            source,
        }
    }

    /// 1 usage, 2 data, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core { source, .. } if source.is_numerical() => 3,
            _ => 2,
        }
    }
}
