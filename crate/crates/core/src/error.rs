use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A record failed an invariant check. `record` names the offender
    /// (usually a chunk id or a field path).
    #[error("invalid record {record}: {reason}")]
    Validation { record: String, reason: String },

    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("unknown category {0:?}")]
    UnknownCategory(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    /// The requested quantity is mathematically undefined for this input
    /// (e.g. a risk ratio with no sample uniques).
    #[error("undefined: {0}")]
    Undefined(&'static str),

    #[error("entity {entity:?} of chunk {chunk} does not occur in its text")]
    Integrity { chunk: String, entity: String },

    #[error("embedding cache miss for {} request(s): {ids:?}", ids.len())]
    CacheMiss { ids: Vec<String> },

    #[error("embedding transport failed after {attempts} attempt(s): {reason}")]
    Transport { attempts: u32, reason: String },

    #[error("embedding provider: {0}")]
    Provider(String),

    #[error("did not converge: {0}")]
    NonConvergence(String),

    #[error("prediction sets differ: only in pre {only_pre:?}, only in post {only_post:?}")]
    IdMismatch {
        only_pre: Vec<String>,
        only_post: Vec<String>,
    },
}

impl Error {
    pub(crate) fn validation(record: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            record: record.into(),
            reason: reason.into(),
        }
    }
}
