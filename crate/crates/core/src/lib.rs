//! Trajectory-free propagation of noise-averaged density matrices.
//!
//! The crate builds the Liouville-space pieces of a stochastic Liouville
//! equation, discretizes Gaussian noise into a correlation matrix, factorizes
//! the resulting influence kernel as a spectral tensor train trained by
//! stochastic gradient descent, and assembles the relaxation propagator as a
//! product of matrix product operators.
//!
//! Everything here is `no_std` + `alloc`. File formats, the command line and
//! the Monte Carlo trajectory oracle live in the `stt-sim` companion crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod linalg;
pub mod liouville;
pub mod models;
pub mod noise;
pub mod oracle;
pub mod propagator;
pub mod quad;
pub mod stt;
pub mod tt;

pub use error::{Error, Result};
pub use linalg::{CMat, CVec, C64};
