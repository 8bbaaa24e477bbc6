//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by the simulator, the networks, and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no multipath components")]
    NoMultipathComponents,

    #[error("more users than antennas (K={n_users}, N={n_antennas})")]
    MoreUsersThanAntennas { n_users: usize, n_antennas: usize },

    #[error("user index {user} out of range for K={n_users}")]
    UserOutOfRange { user: usize, n_users: usize },

    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("minimum required rate must be positive, got {0}")]
    NonPositiveMinRate(f64),

    #[error("step called before reset")]
    StepBeforeReset,

    #[error("empty batch")]
    EmptyBatch,

    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("checkpoint dimensions do not match config: {0}")]
    CheckpointMismatch(String),

    #[error("missing checkpoint: {0}")]
    MissingCheckpoint(String),

    #[error("malformed csv at line {line}: {reason}")]
    MalformedCsv { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
