//! Crate-wide error type.
//!
//! Three failure families matter to callers: malformed input shapes
//! (`Schema`), inputs that parse but violate a documented precondition or
//! invariant (`Invalid`), and internal assertion failures that indicate a bug
//! or a numerically hopeless instance (`Internal`).  The CLI maps these to
//! exit codes 2, 1 and 3 respectively.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Structurally malformed data: wrong matrix shape, bad rational string,
    /// unknown schema tag, index out of range.
    #[error("schema error: {0}")]
    Schema(String),

    /// Well-formed data violating a precondition (non-closed set, size
    /// mismatch in a pattern, impossible pairing sizes, ...).
    #[error("invalid input: {0}")]
    Invalid(String),

    /// A construction audit that should have succeeded did not.
    #[error("internal assertion failed: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn schema(msg: impl Into<String>) -> Self {
        Error::Schema(msg.into())
    }
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }

    /// CLI exit code for this error family.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invalid(_) => 1,
            Error::Schema(_) => 2,
            Error::Internal(_) => 3,
        }
    }
}
