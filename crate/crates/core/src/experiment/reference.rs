//! Reference posterior samples for MMD.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::ForwardModel;
use crate::posterior::{DoubleBananaDensity, GaussianLikelihood, Prior};
use crate::svgd::{run_svgd, AdaGradState, ParticleSet};

/// A long direct SVGD run on the double banana from standard normal draws.
pub fn double_banana_reference(
    n: usize,
    iterations: usize,
    master_step: f64,
    seed: u64,
) -> Result<Matrix> {
    let target = DoubleBananaDensity::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = Prior::StandardNormal { dim: 2 }.sample(n, &mut rng);
    let score = |x: &[f64]| target.score(x);
    let opt = AdaGradState::new(master_step, AdaGradState::default().momentum)?;
    let (p, _) = run_svgd(ParticleSet::new(init)?, &score, iterations, opt)?;
    Ok(p.into_points())
}

/// Box holding all but a negligible part of the double banana mass.
pub const DOUBLE_BANANA_BOX: ([f64; 2], [f64; 2]) = ([-3.0, -2.0], [3.0, 4.0]);

/// Grid resampling of the analytic double banana density over
/// [`DOUBLE_BANANA_BOX`].
pub fn double_banana_grid_reference(k: usize, samples: usize, seed: u64) -> Result<Matrix> {
    let target = DoubleBananaDensity::default();
    let (lo, hi) = DOUBLE_BANANA_BOX;
    resample_grid(&lo, &hi, k, samples, seed, |x| target.log_density(x))
}

/// Importance resampling from a `k x k` grid of cell centres over a 2-D box
/// prior. Each draw picks a cell with probability proportional to its
/// posterior density and then a uniform point inside that cell.
pub fn grid_reference(
    model: &dyn ForwardModel,
    prior: &Prior,
    likelihood: &GaussianLikelihood,
    k: usize,
    samples: usize,
    seed: u64,
) -> Result<Matrix> {
    let Prior::UniformBox { lo, hi } = prior else {
        return Err(Error::invalid("grid reference needs a box prior"));
    };
    resample_grid(lo, hi, k, samples, seed, |c| {
        Ok(likelihood.log_likelihood(&model.compute(c)?))
    })
}

fn resample_grid(
    lo: &[f64],
    hi: &[f64],
    k: usize,
    samples: usize,
    seed: u64,
    log_density: impl Fn(&[f64]) -> Result<f64> + Sync,
) -> Result<Matrix> {
    if lo.len() != 2 || hi.len() != 2 || k == 0 {
        return Err(Error::invalid("grid reference is for 2-D problems"));
    }
    let cell = [(hi[0] - lo[0]) / k as f64, (hi[1] - lo[1]) / k as f64];
    let centres: Vec<[f64; 2]> = (0..k * k)
        .map(|idx| {
            let (i, j) = (idx % k, idx / k);
            [
                lo[0] + (i as f64 + 0.5) * cell[0],
                lo[1] + (j as f64 + 0.5) * cell[1],
            ]
        })
        .collect();
    let logp = centres
        .par_iter()
        .map(|c| log_density(c))
        .collect::<Result<Vec<f64>>>()?;
    let top = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::invalid("density vanishes on the whole grid"));
    }
    let mut cdf = Vec::with_capacity(logp.len());
    let mut acc = 0.0;
    for l in &logp {
        acc += (l - top).exp();
        cdf.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(samples * 2);
    for _ in 0..samples {
        let u = rng.random::<f64>() * acc;
        let idx = cdf.partition_point(|&c| c < u).min(cdf.len() - 1);
        let c = centres[idx];
        data.push(c[0] + (rng.random::<f64>() - 0.5) * cell[0]);
        data.push(c[1] + (rng.random::<f64>() - 0.5) * cell[1]);
    }
    Matrix::from_vec(samples, 2, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn banana_grid_reference_sits_on_the_ridge() {
        let r = double_banana_grid_reference(200, 2000, 3).unwrap();
        let target = DoubleBananaDensity::default();
        // the data term pins log((1-x0)^2 + 100(x1-x0^2)^2) near ln 30
        let mut resid = 0.0;
        for i in 0..r.rows() {
            let x = r.row(i);
            let g = (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
            resid += (g.ln() - target.y).abs();
        }
        assert!(resid / (r.rows() as f64) < 0.5);
        let again = double_banana_grid_reference(200, 2000, 3).unwrap();
        assert_eq!(r, again);
    }
}
