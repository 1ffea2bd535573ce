//! Error taxonomy shared across the crate.
//!
//! Variants map onto the CLI exit codes: configuration and precondition
//! problems exit 2, simulation failures exit 3, failed statistical or
//! deterministic gates exit 4.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Problem definition is internally inconsistent (dimensions, bounds,
    /// ellipticity, weights).
    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    /// Config file could not be parsed against the strict schema.
    #[error("config error: {0}")]
    Config(String),

    /// An operation was called with arguments outside its contract.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Coefficient combination outside the scope of the requested method
    /// (for example, the grid oracle with a non-constant full matrix).
    #[error("unsupported coefficient: {0}")]
    Unsupported(String),

    /// A path exhausted `max_steps` before leaving the domain.
    #[error("path failed to exit within {max_steps} steps (start {start:?})")]
    NonExit { max_steps: u64, start: Vec<f64> },

    /// A path exhausted `max_jumps` redistributions.
    #[error("path exceeded jump budget {max_jumps}")]
    JumpBudget { max_jumps: u64 },

    /// Requested time horizon does not fit in `max_steps * dt_base`.
    #[error("truncation horizon {horizon:.3} exceeds step budget {budget:.3}")]
    TruncationBudget { horizon: f64, budget: f64 },

    /// A coefficient field produced a non-finite value.
    #[error("field evaluation failed at {point:?}: {what}")]
    Evaluation { what: String, point: Vec<f64> },

    /// Too many paths failed to exit for the estimate to be trusted.
    #[error("{failed} of {total} paths failed to exit (limit {limit:.4}%)")]
    ExcessNonExit { failed: u64, total: u64, limit: f64 },

    /// Linear system from the grid assembly could not be solved to tolerance.
    #[error("grid system not solvable: {0}")]
    SingularSystem(String),

    /// A verification gate failed.
    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// CLI process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidProblem(_)
            | Error::Config(_)
            | Error::Precondition(_)
            | Error::Unsupported(_) => 2,
            Error::NonExit { .. }
            | Error::JumpBudget { .. }
            | Error::TruncationBudget { .. }
            | Error::Evaluation { .. }
            | Error::ExcessNonExit { .. }
            | Error::SingularSystem(_)
            | Error::Io(_) => 3,
            Error::CheckFailed(_) => 4,
        }
    }
}
