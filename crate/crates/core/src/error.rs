use alloc::string::String;
use alloc::vec::Vec;
use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("operator `{name}` is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { name: &'static str, deviation: f64 },

    #[error("coupling operators do not commute (norm of commutator {0:e})")]
    NonCommuting(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature failed to converge: {0}")]
    Quadrature(String),

    #[error("training diverged at step {step} (loss {loss})")]
    Diverged { step: usize, loss: f64 },

    #[error("bond dimension {found} exceeds limit {limit}; bonds after recompression: {bonds:?}")]
    BondLimit {
        found: usize,
        limit: usize,
        bonds: Vec<usize>,
    },

    #[error("combinatorial budget exceeded: {needed} terms > {budget}")]
    Budget { needed: f64, budget: f64 },

    #[error("not a density matrix: {0}")]
    NotDensityMatrix(String),

    #[error("transfer function {0} has no trained linking matrices")]
    Untrained(usize),
}
