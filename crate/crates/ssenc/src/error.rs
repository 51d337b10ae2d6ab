use std::path::PathBuf;

/// Errors of the file formats and the command-line front end.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] ssenc_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: header mismatch: expected [{expected}], found [{found}]", path.display())]
    Header {
        path: PathBuf,
        expected: String,
        found: String,
    },
    /// `row` counts data rows from 1, the header excluded.
    #[error("{}: row {row}, column {column}: cannot parse {value:?} as a finite number", path.display())]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },
    #[error("{}: row {row}: expected {expected} fields, found {found}", path.display())]
    RowLength {
        path: PathBuf,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("{}: no data rows", path.display())]
    NoRows { path: PathBuf },
    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("{}: {message}", path.display())]
    ModelFormat { path: PathBuf, message: String },
    #[error("{}: unsupported model format version {found} (this build reads version {expected})", path.display())]
    Version { path: PathBuf, found: u64, expected: u64 },
    #[error("{0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Process exit status: 2 for usage, configuration and version errors,
    /// 1 for everything that went wrong while running.
    pub fn exit_code(&self) -> i32 {
        use ssenc_core::Error as C;
        match self {
            Error::Config { .. } | Error::Version { .. } | Error::Usage(_) => 2,
            Error::Core(C::Config(_) | C::Unstable | C::InvalidSystem(_) | C::InvalidDims(_)) => 2,
            _ => 1,
        }
    }
}
