//! Stein variational gradient descent with adaptively refined local
//! neural-network surrogates for Bayesian inverse problems.

pub mod error;
pub mod experiment;
pub mod kernel;
pub mod matrix;
pub mod metrics;
pub mod models;
pub mod posterior;
pub mod refinement;
pub mod surrogate;
pub mod svgd;

pub use error::{Error, Result};
pub use matrix::Matrix;
