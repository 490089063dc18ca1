use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A pipeline or scenario parameter violates its invariant. The message
    /// names the first violated invariant.
    #[error("invalid config: {0}")]
    Config(String),

    /// Malformed in-memory input (non-finite coordinate, empty trajectory,
    /// out-of-order frames, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A file could not be parsed. Carries the offending line (1-based,
    /// 0 when the error is not tied to a single line).
    #[error("parse error in {path} (line {line}): {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// Evaluation was asked for something undefined (e.g. MOT metrics
    /// against an empty ground truth).
    #[error("evaluation error: {0}")]
    Eval(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
