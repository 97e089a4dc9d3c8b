//! Shared diagnostic and error types.

use thiserror::Error;

/// A verifier or semantic-analysis finding. Diagnostics are results, not
/// errors: an empty list means the input is well-formed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub message: String,
}

impl Diagnostic {
    pub fn new(message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

/// Source-level error with a location, used by the MiniOO frontend.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{line}:{col}: {msg}")]
pub struct SourceError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl SourceError {
    pub fn new(line: usize, col: usize, msg: impl Into<String>) -> SourceError {
        SourceError {
            line,
            col,
            msg: msg.into(),
        }
    }
}
