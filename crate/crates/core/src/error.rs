use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent matrix/vector dimensions.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An argument violated a precondition.
    #[error("invalid argument: {0}")]
    Invalid(String),

    /// A detector produced no extrinsic information for a user
    /// (posterior variance equals the prior variance).
    #[error("no extrinsic information for user {user}")]
    NoExtrinsic { user: usize },

    /// An iterative numerical procedure failed to converge.
    #[error("did not converge: {0}")]
    NonConvergence(String),

    /// A bracketing root search found no sign change.
    #[error("no root bracketed in [{lo}, {hi}]: f(lo)={flo}, f(hi)={fhi}")]
    NoBracket { lo: f64, hi: f64, flo: f64, fhi: f64 },

    /// Malformed text input (channel matrices, profiles, configs).
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
