//! Distributed linear-quadratic control of a leader/follower team coupled
//! through the follower population average (the mean field).
//!
//! The team-optimal strategy decomposes into two low-dimensional Riccati
//! problems whose sizes are independent of the number of followers: one for
//! the augmented (leader, mean-field) pair and one for the deviation of an
//! individual follower from the mean field. [`riccati`] solves those
//! recursions, [`gains`] assembles the feedback laws, [`sim`] rolls out the
//! closed loop, and [`oracle`] checks the whole construction against a
//! brute-force centralized solution of the stacked problem.

pub mod config;
pub mod gains;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod riccati;
pub mod rng;
pub mod sim;

pub mod cli;

use thiserror::Error;

/// Errors surfaced by model construction, solvers, and simulation.
#[derive(Debug, Error)]
pub enum Error {
    /// A matrix or vector does not have the shape required by its role.
    #[error("dimension mismatch for {name}: expected {expected}, got {got}")]
    DimensionMismatch {
        name: &'static str,
        expected: String,
        got: String,
    },

    /// A weight that must be symmetric positive semidefinite is not.
    #[error("{name} is not positive semidefinite (eigenvalue {eigenvalue:.3e})")]
    NotPsd { name: &'static str, eigenvalue: f64 },

    /// The control-weight sum that must be inverted in a Riccati step is
    /// singular or too ill-conditioned to trust.
    #[error("singular inner matrix in Riccati step (condition estimate {cond:.3e})")]
    SingularInnerMatrix { cond: f64 },

    /// Fixed-point iteration for a stationary Riccati solution hit the
    /// iteration cap before meeting the tolerance.
    #[error("Riccati iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    /// A simulated state left the trust region (entries above 1e12).
    #[error("simulation diverged at t = {t}")]
    Diverged { t: usize },

    /// A gain that the consensus reparametrization must invert is singular
    /// (or not square, so no inverse exists).
    #[error("gain is not invertible: {reason}")]
    SingularGain { reason: String },

    /// The requested quantity involves the leader's control channel, which
    /// does not exist in a leaderless model.
    #[error("model is leaderless: {0}")]
    LeaderlessMode(&'static str),

    /// The stacked centralized problem would be too large to solve directly.
    #[error("centralized problem dimension {dim} exceeds the supported limit of {limit}")]
    TooLarge { dim: usize, limit: usize },

    /// The centralized oracle only handles time-invariant coefficients.
    #[error("centralized oracle requires time-invariant model and cost matrices")]
    TimeVarying,

    /// Configuration parsing or validation failed.
    #[error("config error at {pointer}: {message}")]
    Config { pointer: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
