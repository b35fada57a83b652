//! Log-posteriors and their scores for a prior, a Gaussian likelihood and a
//! forward map (exact or surrogate).

use std::f64::consts::E;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::ForwardModel;
use crate::surrogate::{InputMap, SurrogateParams};
use crate::svgd::Score;

/// Distance kept from the edge of the prior support when projecting.
pub const SUPPORT_MARGIN: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Prior {
    StandardNormal { dim: usize },
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    /// Independent components with `log x_i ~ N(0, 1)`.
    LogNormal { dim: usize },
}

impl Prior {
    pub fn uniform(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let p = Prior::UniformBox { lo, hi };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Prior::StandardNormal { dim } | Prior::LogNormal { dim } if *dim == 0 => {
                Err(Error::invalid("prior dimension must be positive"))
            }
            Prior::UniformBox { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return Err(Error::invalid("uniform bounds must be non-empty and equal length"));
                }
                if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                    return Err(Error::invalid("uniform prior needs lo < hi in every dimension"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Prior::StandardNormal { dim } | Prior::LogNormal { dim } => *dim,
            Prior::UniformBox { lo, .. } => lo.len(),
        }
    }

    pub fn in_support(&self, x: &[f64]) -> bool {
        match self {
            Prior::StandardNormal { .. } => x.iter().all(|v| v.is_finite()),
            Prior::UniformBox { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (a, b))| *v >= *a && *v <= *b),
            Prior::LogNormal { .. } => x.iter().all(|v| *v > 0.0 && v.is_finite()),
        }
    }

    /// Unnormalized log density, `-inf` outside the support.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        if !self.in_support(x) {
            return f64::NEG_INFINITY;
        }
        match self {
            Prior::StandardNormal { .. } => -0.5 * x.iter().map(|v| v * v).sum::<f64>(),
            Prior::UniformBox { .. } => 0.0,
            Prior::LogNormal { .. } => x
                .iter()
                .map(|v| {
                    let l = v.ln();
                    -l - 0.5 * l * l
                })
                .sum(),
        }
    }

    pub fn grad_log_density(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Prior::StandardNormal { .. } => x.iter().map(|v| -v).collect(),
            Prior::UniformBox { .. } => vec![0.0; x.len()],
            Prior::LogNormal { .. } => x.iter().map(|v| -(v.ln() + 1.0) / v).collect(),
        }
    }

    /// Clamps `x` into the support, `SUPPORT_MARGIN` inside any boundary.
    pub fn project(&self, x: &mut [f64]) {
        match self {
            Prior::StandardNormal { .. } => {}
            Prior::UniformBox { lo, hi } => {
                for (v, (a, b)) in x.iter_mut().zip(lo.iter().zip(hi)) {
                    if *v < *a || v.is_nan() {
                        *v = a + SUPPORT_MARGIN;
                    } else if *v > *b {
                        *v = b - SUPPORT_MARGIN;
                    }
                }
            }
            Prior::LogNormal { .. } => {
                for v in x.iter_mut() {
                    if !(*v > 0.0) {
                        *v = SUPPORT_MARGIN;
                    }
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Matrix {
        let d = self.dim();
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            match self {
                Prior::StandardNormal { .. } => {
                    data.extend((0..d).map(|_| -> f64 { StandardNormal.sample(&mut *rng) }));
                }
                Prior::UniformBox { lo, hi } => {
                    data.extend(lo.iter().zip(hi).map(|(a, b)| rng.random_range(*a..*b)));
                }
                Prior::LogNormal { .. } => {
                    data.extend((0..d).map(|_| {
                        let z: f64 = StandardNormal.sample(&mut *rng);
                        z.exp()
                    }));
                }
            }
        }
        Matrix::from_vec(n, d, data).expect("shape")
    }

    /// Surrogate input standardization derived from the prior.
    pub fn input_map(&self) -> InputMap {
        match self {
            Prior::StandardNormal { dim } => InputMap::identity(*dim),
            Prior::UniformBox { lo, hi } => InputMap {
                shift: lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect(),
                scale: lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).collect(),
            },
            Prior::LogNormal { dim } => InputMap {
                shift: vec![E.sqrt(); *dim],
                scale: vec![((E - 1.0) * E).sqrt(); *dim],
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianLikelihood {
    pub observations: Vec<f64>,
    pub noise_std: Vec<f64>,
}

impl GaussianLikelihood {
    pub fn new(observations: Vec<f64>, noise_std: f64) -> Result<Self> {
        let n = observations.len();
        Self::with_stds(observations, vec![noise_std; n])
    }

    pub fn with_stds(observations: Vec<f64>, noise_std: Vec<f64>) -> Result<Self> {
        if observations.len() != noise_std.len() || observations.is_empty() {
            return Err(Error::invalid("need one positive noise std per observation"));
        }
        if noise_std.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::invalid("noise std must be positive and finite"));
        }
        Ok(GaussianLikelihood {
            observations,
            noise_std,
        })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn log_likelihood(&self, f: &[f64]) -> f64 {
        -0.5 * self
            .observations
            .iter()
            .zip(f)
            .zip(&self.noise_std)
            .map(|((y, fi), s)| ((y - fi) / s).powi(2))
            .sum::<f64>()
    }

    /// `(y - f) / sigma^2`, the cotangent whose pullback is the likelihood
    /// score.
    pub fn weighted_residual(&self, f: &[f64]) -> Vec<f64> {
        self.observations
            .iter()
            .zip(f)
            .zip(&self.noise_std)
            .map(|((y, fi), s)| (y - fi) / (s * s))
            .collect()
    }
}

/// A differentiable forward map: value at `x` and a pullback of a cotangent
/// that may depend on that value.
pub trait ModelMap: Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn value_and_pullback(
        &self,
        x: &[f64],
        cotangent: &dyn Fn(&[f64]) -> Vec<f64>,
    ) -> Result<(Vec<f64>, Vec<f64>)>;
}

impl<T: ModelMap + ?Sized> ModelMap for &T {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }

    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }

    fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        (**self).value(x)
    }

    fn value_and_pullback(
        &self,
        x: &[f64],
        cotangent: &dyn Fn(&[f64]) -> Vec<f64>,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        (**self).value_and_pullback(x, cotangent)
    }
}

impl ModelMap for SurrogateParams {
    fn input_dim(&self) -> usize {
        SurrogateParams::input_dim(self)
    }

    fn output_dim(&self) -> usize {
        SurrogateParams::output_dim(self)
    }

    fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward(x)
    }

    fn value_and_pullback(
        &self,
        x: &[f64],
        cotangent: &dyn Fn(&[f64]) -> Vec<f64>,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        self.forward_pullback(x, cotangent)
    }
}

/// A forward model with an exact Jacobian. Every call is counted.
pub struct ExactModel<'a, M: ForwardModel + ?Sized>(pub &'a M);

impl<'a, M: ForwardModel + ?Sized> ExactModel<'a, M> {
    pub fn new(model: &'a M) -> Result<Self> {
        if !model.has_jacobian() {
            return Err(Error::invalid(format!(
                "{} has no exact Jacobian",
                model.name()
            )));
        }
        Ok(ExactModel(model))
    }
}

impl<M: ForwardModel + ?Sized> ModelMap for ExactModel<'_, M> {
    fn input_dim(&self) -> usize {
        self.0.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.0.output_dim()
    }

    fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.0.evaluate(x)
    }

    fn value_and_pullback(
        &self,
        x: &[f64],
        cotangent: &dyn Fn(&[f64]) -> Vec<f64>,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let f = self.0.evaluate(x)?;
        let jac = self
            .0
            .jacobian(x)
            .ok_or_else(|| Error::invalid("model lost its Jacobian"))??;
        let v = cotangent(&f);
        let mut g = vec![0.0; jac.cols()];
        for (row, vi) in jac.iter_rows().zip(&v) {
            for (gj, j) in g.iter_mut().zip(row) {
                *gj += vi * j;
            }
        }
        Ok((f, g))
    }
}

/// `pi(x) ∝ p0(x) L(y | f(x))`.
#[derive(Debug, Clone)]
pub struct Posterior<M> {
    pub prior: Prior,
    pub likelihood: GaussianLikelihood,
    pub model: M,
}

impl<M: ModelMap> Posterior<M> {
    pub fn new(prior: Prior, likelihood: GaussianLikelihood, model: M) -> Result<Self> {
        prior.validate()?;
        if model.input_dim() != prior.dim() {
            return Err(Error::invalid(format!(
                "model input dim {} differs from prior dim {}",
                model.input_dim(),
                prior.dim()
            )));
        }
        if model.output_dim() != likelihood.len() {
            return Err(Error::invalid(format!(
                "model output dim {} differs from {} observations",
                model.output_dim(),
                likelihood.len()
            )));
        }
        Ok(Posterior {
            prior,
            likelihood,
            model,
        })
    }

    pub fn log_posterior(&self, x: &[f64]) -> Result<f64> {
        let lp = self.prior.log_density(x);
        if lp == f64::NEG_INFINITY {
            return Ok(lp);
        }
        let f = self.model.value(x)?;
        Ok(lp + self.likelihood.log_likelihood(&f))
    }

    pub fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        let lik = &self.likelihood;
        let (_, g) = self
            .model
            .value_and_pullback(x, &|f: &[f64]| lik.weighted_residual(f))?;
        let mut s = self.prior.grad_log_density(x);
        for (a, b) in s.iter_mut().zip(g) {
            *a += b;
        }
        Ok(s)
    }
}

impl<M: ModelMap> Score for Posterior<M> {
    fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        Posterior::score(self, x)
    }

    fn project(&self, x: &mut [f64]) {
        self.prior.project(x)
    }
}

/// The double-banana density written out directly:
/// `log pi = -|x|^2/(2 s1^2) - (y - f(x))^2/(2 s2^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleBananaDensity {
    pub sigma1: f64,
    pub sigma2: f64,
    pub y: f64,
}

impl Default for DoubleBananaDensity {
    fn default() -> Self {
        DoubleBananaDensity {
            sigma1: 1.0,
            sigma2: 0.3,
            y: 30f64.ln(),
        }
    }
}

impl DoubleBananaDensity {
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        let f = crate::models::double_banana_forward(x)?;
        let r = self.y - f;
        Ok(-(x[0] * x[0] + x[1] * x[1]) / (2.0 * self.sigma1.powi(2))
            - r * r / (2.0 * self.sigma2.powi(2)))
    }

    pub fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        let f = crate::models::double_banana_forward(x)?;
        let j = crate::models::double_banana_jacobian(x)?;
        let w = (self.y - f) / self.sigma2.powi(2);
        let s1 = self.sigma1.powi(2);
        Ok(vec![-x[0] / s1 + w * j[0], -x[1] / s1 + w * j[1]])
    }

    /// The same target split as a prior and a one-observation likelihood.
    pub fn likelihood(&self) -> GaussianLikelihood {
        GaussianLikelihood::new(vec![self.y], self.sigma2).expect("positive sigma")
    }

    /// Only unit `sigma1` maps onto [`Prior::StandardNormal`].
    pub fn prior(&self) -> Result<Prior> {
        if self.sigma1 != 1.0 {
            return Err(Error::invalid("prior split needs sigma1 = 1"));
        }
        Ok(Prior::StandardNormal { dim: 2 })
    }
}
