use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch ({detail})")]
    Shape { op: &'static str, detail: String },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("document {doc_id}: offsets [{start}, {end}) give {found:?}, annotation says {expected:?}")]
    OffsetMismatch {
        doc_id: String,
        start: usize,
        end: usize,
        expected: String,
        found: String,
    },

    #[error("document {doc_id}: overlapping mentions [{a_start}, {a_end}) and [{b_start}, {b_end})")]
    Overlap {
        doc_id: String,
        a_start: usize,
        a_end: usize,
        b_start: usize,
        b_end: usize,
    },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("invalid tag: {0}")]
    InvalidTag(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn shape_err(op: &'static str, detail: impl Into<String>) -> Error {
    Error::Shape {
        op,
        detail: detail.into(),
    }
}
