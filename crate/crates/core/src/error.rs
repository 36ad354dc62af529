//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A scenario or solver parameter violates its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An allocation or beamforming state violates a structural constraint.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// A CPU subproblem cannot satisfy the per-task minimum frequency floor.
    #[error("infeasible CPU subproblem: capacity {capacity} Hz < {tasks} tasks x {floor} Hz floor")]
    InfeasibleCpu {
        capacity: f64,
        tasks: usize,
        floor: f64,
    },

    /// The configuration space exceeds the enumeration cap.
    #[error("enumeration too large: ({nodes}*{subchannels}-{subchannels}+1)^{nodes} = {count} exceeds cap {cap}")]
    EnumerationTooLarge {
        nodes: usize,
        subchannels: usize,
        count: u128,
        cap: u128,
    },

    /// A per-stream surrogate value collapsed to zero or below.
    #[error("degenerate stream {stream}: surrogate rate {value} <= 0")]
    DegenerateStream { stream: usize, value: f64 },

    #[error("serialization error: {0}")]
    Serialization(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
