//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the harnessing stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "control command out of bounds: dx={dx:.3} mm, dy={dy:.3} mm, dtheta={dtheta:.5} rad \
         (limits ±{max_mm} mm, ±{max_rad:.5} rad)"
    )]
    CommandOutOfBounds {
        dx: f64,
        dy: f64,
        dtheta: f64,
        max_mm: f64,
        max_rad: f64,
    },

    #[error("trajectory must hold exactly one more state than controls (got {states} states, {controls} controls)")]
    TrajectoryShape { states: usize, controls: usize },

    #[error("dataset contains no transitions")]
    EmptyDataset,

    #[error("dataset contains non-finite values")]
    NonFiniteData,

    #[error("initial state violates state bounds: entry {index} = {value:.3} outside [{lower:.3}, {upper:.3}]")]
    InfeasibleInitialState {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("solver did not converge within {iterations} iterations (residual {residual:.3e})")]
    SolverDidNotConverge { iterations: usize, residual: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("board has no clamps")]
    EmptyBoard,

    #[error("unknown clamp id `{0}`")]
    UnknownClamp(String),

    #[error("unknown route `{0}`")]
    UnknownRoute(String),

    #[error("unknown controller `{0}` (expected koopman_mpc, linear_mpc, or pi_no_twist)")]
    UnknownController(String),

    #[error("parse error in {file} at line {line}: {message}")]
    Parse {
        file: String,
        line: u64,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
