//! Constrained sparse unmixing of linearized scattering measurements.
//!
//! The library recovers per-pixel material mixture proportions from microwave
//! measurements. The pipeline is: generate a synthetic breast phantom
//! ([`phantom`]), simulate multistatic measurements with a 2D FDFD Helmholtz
//! solver ([`forward`]), linearize the forward map about a prior mixture via
//! the Born approximation ([`model`]), and solve the resulting constrained
//! l1-minimization with an augmented Lagrangian / accelerated proximal
//! gradient method ([`solver`], [`prox`]).

pub mod config;
pub mod experiment;
pub mod forward;
pub mod io;
pub mod model;
pub mod operator;
pub mod phantom;
pub mod prox;
pub mod solver;
pub mod stack;

use thiserror::Error;

/// Errors shared across the toolkit.
#[derive(Debug, Error)]
pub enum UnmixError {
    /// A caller-supplied value violates a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// An operation was invoked on inconsistent internal state.
    #[error("invalid state: {0}")]
    InvalidState(String),
    /// A numerical procedure failed (singular factorization, stalled line search).
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    /// A combinatorial sweep would exceed the caller-supplied cap.
    #[error("problem too large: {0}")]
    TooLarge(String),
    /// A ratio with zero denominator was requested.
    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, UnmixError>;

impl UnmixError {
    /// Process exit code for the CLI: 2 for validation errors, 3 for numerical ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            UnmixError::InvalidArgument(_)
            | UnmixError::InvalidState(_)
            | UnmixError::TooLarge(_)
            | UnmixError::Config(_) => 2,
            UnmixError::NumericalFailure(_) | UnmixError::UndefinedRatio(_) => 3,
            UnmixError::Io(_) => 3,
        }
    }
}
