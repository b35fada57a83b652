use super::{check_dim, EvalCounter, ForwardModel};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

fn log_argument(x: &[f64]) -> f64 {
    let (a, b) = (x[0], x[1]);
    (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
}

/// `log((1 - x1)^2 + 100 (x2 - x1^2)^2)`.
pub fn double_banana_forward(x: &[f64]) -> Result<f64> {
    check_dim("double banana", 2, x)?;
    let g = log_argument(x);
    if g <= 0.0 {
        return Err(Error::SingularInput(format!(
            "double banana log argument vanishes at ({}, {})",
            x[0], x[1]
        )));
    }
    Ok(g.ln())
}

pub fn double_banana_jacobian(x: &[f64]) -> Result<[f64; 2]> {
    check_dim("double banana", 2, x)?;
    let g = log_argument(x);
    if g <= 0.0 {
        return Err(Error::SingularInput(format!(
            "double banana log argument vanishes at ({}, {})",
            x[0], x[1]
        )));
    }
    let (a, b) = (x[0], x[1]);
    let r = b - a * a;
    Ok([(-2.0 * (1.0 - a) - 400.0 * a * r) / g, 200.0 * r / g])
}

/// The double-banana map as a counted forward model with an exact Jacobian.
#[derive(Debug, Default)]
pub struct DoubleBanana {
    counter: EvalCounter,
}

impl DoubleBanana {
    pub fn new() -> Self {
        Self::default()
    }
}

impl ForwardModel for DoubleBanana {
    fn name(&self) -> &str {
        "double-banana"
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn counter(&self) -> &EvalCounter {
        &self.counter
    }

    fn compute(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![double_banana_forward(x)?])
    }

    fn has_jacobian(&self) -> bool {
        true
    }

    fn compute_jacobian(&self, x: &[f64]) -> Option<Result<Matrix>> {
        Some(double_banana_jacobian(x).and_then(|j| Matrix::from_vec(1, 2, j.to_vec())))
    }
}
