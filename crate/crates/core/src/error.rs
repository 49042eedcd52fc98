use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: field `{field}`: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        field: String,
        message: String,
    },
    #[error("duplicate item id `{0}`")]
    DuplicateItem(String),
    #[error("unknown item id `{0}`")]
    UnknownItem(String),
    #[error("unknown class `{0}` for attribute `{1}`")]
    UnknownClass(String, String),
    #[error("item `{item_id}` has no usable `{attribute}` attribute")]
    MissingAttribute { item_id: String, attribute: String },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("user `{0}` has no training interactions")]
    ColdUser(String),
    #[error("empty candidate list")]
    EmptyCandidates,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("missing output of stage `{0}`")]
    MissingStage(String),
    #[error("config fingerprint mismatch: {0}")]
    FingerprintMismatch(String),
    #[error("stored hash does not match contents of `{0}`")]
    TamperedFile(String),
    #[error("mismatched class sets: {0}")]
    ClassMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 for validation problems, 2 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 2,
            Error::Csv(e) if e.is_io_error() => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
