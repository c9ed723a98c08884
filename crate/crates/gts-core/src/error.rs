//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by the task-sampling toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller passed an argument that violates an operation's preconditions.
    #[error("input error: {0}")]
    Input(String),

    /// An operation was invoked in a state it cannot handle (e.g. not enough
    /// data collected yet).
    #[error("state error: {0}")]
    State(String),

    /// The experiment configuration is invalid.
    #[error("config error: {0}")]
    Config(String),

    /// A failure during environment interaction or a gradient update,
    /// usually non-finite numerics. Carries enough context to locate the
    /// offending task and step.
    #[error("run error: {0}")]
    Run(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
