//! Forward maps `f: R^d -> R^n` behind an evaluation-counting interface.

mod double_banana;
pub mod fractional;
mod pde;
mod permeability;
mod sensors;
mod synthetic;

use std::sync::atomic::{AtomicU64, Ordering};

pub use double_banana::{double_banana_forward, double_banana_jacobian, DoubleBanana};
pub use fractional::{caputo_l1_coefficients, FractionalGrid, SpaceTimeField};
pub use pde::{solve_fractional_heat, FractionalPdeModel, HeatMode, PdeConfig, PdeKind};
pub use permeability::{default_centers, permeability_field, PermeabilityField};
pub use sensors::{observe, SensorLayout};
pub use synthetic::{generate_synthetic_data, SyntheticData};

use crate::error::Result;
use crate::matrix::Matrix;

/// Counts high-fidelity evaluations. Safe to bump from several threads.
#[derive(Debug, Default)]
pub struct EvalCounter {
    evals: AtomicU64,
    jacobians: AtomicU64,
}

impl EvalCounter {
    pub fn evals(&self) -> u64 {
        self.evals.load(Ordering::SeqCst)
    }

    pub fn jacobians(&self) -> u64 {
        self.jacobians.load(Ordering::SeqCst)
    }

    fn bump_eval(&self) {
        self.evals.fetch_add(1, Ordering::SeqCst);
    }

    fn bump_jacobian(&self) {
        self.jacobians.fetch_add(1, Ordering::SeqCst);
    }
}

pub trait ForwardModel: Send + Sync {
    fn name(&self) -> &str;
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn counter(&self) -> &EvalCounter;

    /// Uncounted evaluation. Use [`ForwardModel::evaluate`] from algorithms.
    fn compute(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Uncounted exact Jacobian (`n x d`), if the model has one.
    fn compute_jacobian(&self, _x: &[f64]) -> Option<Result<Matrix>> {
        None
    }

    fn has_jacobian(&self) -> bool {
        false
    }

    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.counter().bump_eval();
        self.compute(x)
    }

    fn jacobian(&self, x: &[f64]) -> Option<Result<Matrix>> {
        if self.has_jacobian() {
            self.counter().bump_jacobian();
        }
        self.compute_jacobian(x)
    }

    fn eval_count(&self) -> u64 {
        self.counter().evals()
    }
}

pub(crate) fn check_dim(name: &str, expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(crate::Error::InvalidInput(format!(
            "{name} expects {expected} inputs, got {}",
            x.len()
        )));
    }
    Ok(())
}
