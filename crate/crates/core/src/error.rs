use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("caption {0:?} has empty text")]
    EmptyText(String),

    #[error("surface form {form:?} appears in pairs {first} and {second}")]
    DuplicateForm { form: String, first: i64, second: i64 },

    #[error("pair {pair_id} has an empty side {side}")]
    EmptySide { pair_id: i64, side: &'static str },

    #[error("{0}")]
    Invalid(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("row {0:?} has zero norm")]
    ZeroNorm(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("bad magic: expected \"TARAEMB1\", found {0:?}")]
    BadMagic(Vec<u8>),

    #[error("size mismatch: expected {expected} bytes, found {actual}")]
    SizeMismatch { expected: u64, actual: u64 },

    #[error("insufficient {pool} pool: need {required}, have {available}")]
    InsufficientPool {
        pool: &'static str,
        required: usize,
        available: usize,
    },

    #[error("missing embedding for sentence {0:?}")]
    MissingEmbedding(String),

    #[error("rewriter transport failure after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },

    #[error("unparseable rewriter reply: {0}")]
    BadReply(String),

    #[error("echo rejected: rewriter returned the original caption {0:?}")]
    EchoRejected(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl ToString) -> Self {
        Error::Parse {
            line,
            message: message.to_string(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::Invalid(message.into())
    }
}
