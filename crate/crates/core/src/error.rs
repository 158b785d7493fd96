use thiserror::Error;

use crate::monitor::Violation;

pub type Result<T, E = ElectionError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ElectionError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("run with seed {seed} timed out at global time {time} after {events} events")]
    Timeout { seed: u64, time: f64, events: u64 },

    #[error("invariant {} violated at event {} (seed {seed}, {count} violation(s) total)", .first.check, .first.event_seq)]
    InvariantViolation {
        seed: u64,
        first: Box<Violation>,
        count: usize,
    },

    #[error("state space exceeded {limit} states (explored {states})")]
    StateSpaceOverflow { states: usize, limit: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("iterative solve did not converge after {iterations} sweeps (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("run {run_index} (seed {seed}) failed: {source}")]
    RunFailed {
        run_index: usize,
        seed: u64,
        #[source]
        source: Box<ElectionError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
