//! Error type shared by the network kernels and the surrogate model.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: String,
        got: String,
    },

    #[error("non-finite gradient; update rejected")]
    NonFiniteGradient,

    #[error("training loss became non-finite in epoch {epoch}; parameters restored to the last finite state")]
    Diverged { epoch: usize },

    #[error("parameter layout mismatch: expected {expected}, got {got}")]
    LayoutMismatch { expected: String, got: String },

    #[error("malformed checkpoint: {reason}")]
    MalformedCheckpoint { reason: String },

    #[error("trajectory too short: {len} rows cannot host a window of {window} plus a target")]
    TrajectoryTooShort { len: usize, window: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
