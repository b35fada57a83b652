//! Particle transport: the empirical Stein direction and AdaGrad step sizing.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{median_bandwidth, rbf, Bandwidth};
use crate::matrix::Matrix;

/// `N` particles in `R^d` plus the number of transport steps applied so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleSet {
    points: Matrix,
    iteration: u64,
}

impl ParticleSet {
    pub fn new(points: Matrix) -> Result<Self> {
        if points.rows() == 0 || points.cols() == 0 {
            return Err(Error::invalid("particle set must have N >= 1 and d >= 1"));
        }
        if !points.is_finite() {
            return Err(Error::invalid("particle coordinates must be finite"));
        }
        Ok(ParticleSet {
            points,
            iteration: 0,
        })
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        self.points.row(i)
    }

    pub fn into_points(self) -> Matrix {
        self.points
    }
}

/// Gradient of a log target density, `x -> grad log pi(x)`.
pub trait Score: Sync {
    fn score(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Moves `x` back into the support of the target. The default target has
    /// full support.
    fn project(&self, _x: &mut [f64]) {}
}

impl<F> Score for F
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        self(x)
    }
}

/// Evaluates the score once per particle, in particle order.
pub fn evaluate_scores(particles: &ParticleSet, score: &dyn Score) -> Result<Matrix> {
    let (n, d) = particles.points.shape();
    let rows: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| score.score(particles.particle(i)))
        .collect();
    let mut out = Matrix::zeros(n, d);
    for (i, r) in rows.into_iter().enumerate() {
        let s = r?;
        if s.len() != d {
            return Err(Error::invalid(format!(
                "score at particle {i} has length {}, expected {d}",
                s.len()
            )));
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteScore { index: i });
        }
        out.row_mut(i).copy_from_slice(&s);
    }
    Ok(out)
}

/// Row `i` is `(1/N) sum_j [s_j k(x_j, x_i) + grad_{x_j} k(x_j, x_i)]`, given
/// precomputed scores `s_j`.
pub fn assemble_direction(points: &Matrix, scores: &Matrix, h: Bandwidth) -> Result<Matrix> {
    if points.shape() != scores.shape() {
        return Err(Error::invalid(format!(
            "points {:?} and scores {:?} differ in shape",
            points.shape(),
            scores.shape()
        )));
    }
    let (n, d) = points.shape();
    let inv_n = 1.0 / n as f64;
    let two_over_h = 2.0 / h.value();
    let mut out = Matrix::zeros(n, d);
    out.as_mut_slice()
        .par_chunks_mut(d)
        .enumerate()
        .for_each(|(i, row)| {
            let xi = points.row(i);
            // sum_j k_ij (s_j - (2/h)(x_j - x_i))
            let mut ksum = 0.0;
            let mut kx = vec![0.0; d];
            for j in 0..n {
                let xj = points.row(j);
                let k = rbf(xj, xi, h);
                ksum += k;
                let sj = scores.row(j);
                for c in 0..d {
                    row[c] += k * sj[c];
                    kx[c] += k * xj[c];
                }
            }
            for c in 0..d {
                row[c] = (row[c] - two_over_h * (kx[c] - ksum * xi[c])) * inv_n;
            }
        });
    Ok(out)
}

/// The empirical optimal perturbation direction at every particle.
pub fn svgd_direction(particles: &ParticleSet, score: &dyn Score, h: Bandwidth) -> Result<Matrix> {
    if particles.len() < 2 {
        return Err(Error::invalid("svgd direction needs at least 2 particles"));
    }
    let scores = evaluate_scores(particles, score)?;
    assemble_direction(&particles.points, &scores, h)
}

/// Default master step. Each coordinate moves by roughly this much per
/// iteration, so it also sets the size of the jitter left at equilibrium.
pub const DEFAULT_MASTER_STEP: f64 = 0.1;

/// Per-coordinate AdaGrad with a momentum-smoothed squared-gradient
/// accumulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaGradState {
    accumulator: Option<Matrix>,
    pub master_step: f64,
    pub momentum: f64,
    pub fudge: f64,
}

impl Default for AdaGradState {
    fn default() -> Self {
        AdaGradState {
            accumulator: None,
            master_step: DEFAULT_MASTER_STEP,
            momentum: 0.9,
            fudge: 1e-6,
        }
    }
}

impl AdaGradState {
    pub fn new(master_step: f64, momentum: f64) -> Result<Self> {
        if !(master_step > 0.0) {
            return Err(Error::invalid("master step must be positive"));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::invalid("momentum must lie in [0, 1)"));
        }
        Ok(AdaGradState {
            master_step,
            momentum,
            ..Default::default()
        })
    }

    /// `None` until the first step has been taken.
    pub fn accumulator(&self) -> Option<&Matrix> {
        self.accumulator.as_ref()
    }

    /// Forgets the accumulated history, keeping the hyperparameters.
    pub fn reset(&mut self) {
        self.accumulator = None;
    }
}

pub fn adagrad_step(
    particles: &mut ParticleSet,
    direction: &Matrix,
    state: &mut AdaGradState,
) -> Result<()> {
    if direction.shape() != particles.points.shape() {
        return Err(Error::invalid(format!(
            "direction {:?} does not match particles {:?}",
            direction.shape(),
            particles.points.shape()
        )));
    }
    match state.accumulator.as_mut() {
        None => {
            let acc = direction.as_slice().iter().map(|g| g * g).collect();
            let (n, d) = direction.shape();
            state.accumulator = Some(Matrix::from_vec(n, d, acc)?);
        }
        Some(acc) => {
            if acc.shape() != direction.shape() {
                return Err(Error::invalid("accumulator shape changed between steps"));
            }
            let m = state.momentum;
            for (a, g) in acc.as_mut_slice().iter_mut().zip(direction.as_slice()) {
                *a = m * *a + (1.0 - m) * g * g;
            }
        }
    }
    let acc = state.accumulator.as_ref().expect("initialized above");
    let step = state.master_step;
    let fudge = state.fudge;
    for ((x, g), a) in particles
        .points
        .as_mut_slice()
        .iter_mut()
        .zip(direction.as_slice())
        .zip(acc.as_slice())
    {
        *x += step * g / (fudge + a.sqrt());
    }
    particles.iteration += 1;
    Ok(())
}

/// Moves every particle into the score's support.
pub fn project_particles(particles: &mut ParticleSet, score: &dyn Score) {
    let d = particles.dim();
    for row in particles.points.as_mut_slice().chunks_exact_mut(d) {
        score.project(row);
    }
}

/// One transport step: bandwidth, direction, AdaGrad update.
pub fn svgd_iteration(
    particles: &mut ParticleSet,
    score: &dyn Score,
    state: &mut AdaGradState,
) -> Result<()> {
    project_particles(particles, score);
    let h = median_bandwidth(&particles.points)?;
    let dir = svgd_direction(particles, score, h)?;
    adagrad_step(particles, &dir, state)?;
    project_particles(particles, score);
    Ok(())
}

/// Runs `iterations` transport steps, calling `observe` after each one.
pub fn run_svgd_with<F>(
    particles: &mut ParticleSet,
    score: &dyn Score,
    iterations: usize,
    state: &mut AdaGradState,
    mut observe: F,
) -> Result<()>
where
    F: FnMut(&ParticleSet) -> Result<()>,
{
    for _ in 0..iterations {
        svgd_iteration(particles, score, state)?;
        observe(particles)?;
    }
    Ok(())
}

pub fn run_svgd(
    particles: ParticleSet,
    score: &dyn Score,
    iterations: usize,
    state: AdaGradState,
) -> Result<(ParticleSet, AdaGradState)> {
    let mut particles = particles;
    let mut state = state;
    run_svgd_with(&mut particles, score, iterations, &mut state, |_| Ok(()))?;
    Ok((particles, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set(rows: &[&[f64]]) -> ParticleSet {
        ParticleSet::new(Matrix::from_rows(rows).unwrap()).unwrap()
    }

    fn gaussian_score(x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.iter().map(|v| -v).collect())
    }

    // Double loop straight from the definition of the direction.
    fn direction_oracle(points: &Matrix, scores: &Matrix, h: f64) -> Matrix {
        let (n, d) = points.shape();
        let mut out = Matrix::zeros(n, d);
        for i in 0..n {
            for j in 0..n {
                let mut sq = 0.0;
                for c in 0..d {
                    sq += (points.get(j, c) - points.get(i, c)).powi(2);
                }
                let k = (-sq / h).exp();
                for c in 0..d {
                    let grad = -2.0 / h * (points.get(j, c) - points.get(i, c)) * k;
                    let v = out.get(i, c) + scores.get(j, c) * k + grad;
                    out.set(i, c, v);
                }
            }
            for c in 0..d {
                out.set(i, c, out.get(i, c) / n as f64);
            }
        }
        out
    }

    #[test]
    fn far_apart_pair_halves_the_score() {
        let p = set(&[&[-50.0], &[50.0]]);
        let h = Bandwidth::new(1.0).unwrap();
        let dir = svgd_direction(&p, &|x: &[f64]| Ok(vec![3.0 * x[0].signum()]), h).unwrap();
        assert!((dir.get(0, 0) + 1.5).abs() < 1e-12);
        assert!((dir.get(1, 0) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn symmetric_particles_give_antisymmetric_direction() {
        let p = set(&[&[-1.5], &[-0.3], &[0.3], &[1.5]]);
        let h = median_bandwidth(p.points()).unwrap();
        let dir = svgd_direction(&p, &gaussian_score, h).unwrap();
        assert!((dir.get(0, 0) + dir.get(3, 0)).abs() < 1e-14);
        assert!((dir.get(1, 0) + dir.get(2, 0)).abs() < 1e-14);
    }

    #[test]
    fn matches_double_loop_on_small_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let srows: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..2).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let points = Matrix::from_rows(&rows).unwrap();
        let scores = Matrix::from_rows(&srows).unwrap();
        let h = median_bandwidth(&points).unwrap();
        let fast = assemble_direction(&points, &scores, h).unwrap();
        let slow = direction_oracle(&points, &scores, h.value());
        for (a, b) in fast.as_slice().iter().zip(slow.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn permuting_particles_permutes_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> = (0..7)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let p = ParticleSet::new(Matrix::from_rows(&rows).unwrap()).unwrap();
        let perm = [3, 0, 6, 1, 5, 2, 4];
        let q = ParticleSet::new(p.points().permute_rows(&perm)).unwrap();
        let h = median_bandwidth(p.points()).unwrap();
        let a = svgd_direction(&p, &gaussian_score, h).unwrap();
        let b = svgd_direction(&q, &gaussian_score, h).unwrap();
        let a = a.permute_rows(&perm);
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn non_finite_score_names_particle() {
        let p = set(&[&[0.0], &[1.0], &[2.0]]);
        let h = Bandwidth::new(1.0).unwrap();
        let bad = |x: &[f64]| {
            if x[0] == 1.0 {
                Ok(vec![f64::NAN])
            } else {
                Ok(vec![0.0])
            }
        };
        match svgd_direction(&p, &bad, h) {
            Err(Error::NonFiniteScore { index }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_direction_leaves_particles() {
        let mut p = set(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let before = p.points().clone();
        let mut st = AdaGradState::default();
        adagrad_step(&mut p, &Matrix::zeros(2, 2), &mut st).unwrap();
        assert_eq!(p.points(), &before);
        assert!(st.accumulator().unwrap().as_slice().iter().all(|&a| a == 0.0));
        assert_eq!(p.iteration(), 1);
    }

    #[test]
    fn first_step_is_sign_normalized() {
        let mut p = set(&[&[0.0]]);
        let mut st = AdaGradState::default();
        let g = Matrix::from_vec(1, 1, vec![4.0]).unwrap();
        adagrad_step(&mut p, &g, &mut st).unwrap();
        let first = p.particle(0)[0];
        assert!((first - st.master_step * 4.0 / (1e-6 + 4.0)).abs() < 1e-15);
        // constant gradient keeps the accumulator at g^2 and repeats the step
        adagrad_step(&mut p, &g, &mut st).unwrap();
        assert!((st.accumulator().unwrap().get(0, 0) - 16.0).abs() < 1e-12);
        assert!((p.particle(0)[0] - 2.0 * first).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = set(&[&[0.0, 1.0]]);
        let mut st = AdaGradState::default();
        assert!(adagrad_step(&mut p, &Matrix::zeros(2, 2), &mut st).is_err());
    }

    #[test]
    fn zero_iterations_is_identity() {
        let p = set(&[&[0.5], &[-0.5]]);
        let (q, st) = run_svgd(p.clone(), &gaussian_score, 0, AdaGradState::default()).unwrap();
        assert_eq!(p, q);
        assert!(st.accumulator().is_none());
    }

    #[test]
    fn replay_is_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..20).map(|_| vec![rng.random_range(-3.0..3.0)]).collect();
        let p = ParticleSet::new(Matrix::from_rows(&rows).unwrap()).unwrap();
        let a = run_svgd(p.clone(), &gaussian_score, 50, AdaGradState::default()).unwrap();
        let b = run_svgd(p, &gaussian_score, 50, AdaGradState::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn repulsion_only_spreads_particles() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let rows: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..2).map(|_| rng.random_range(-0.5..0.5)).collect())
            .collect();
        let mut p = ParticleSet::new(Matrix::from_rows(&rows).unwrap()).unwrap();
        let zero = |x: &[f64]| Ok(vec![0.0; x.len()]);
        let mean_dist = |p: &ParticleSet| {
            let mut s = 0.0;
            let n = p.len();
            for i in 0..n {
                for j in (i + 1)..n {
                    s += crate::matrix::sq_dist(p.particle(i), p.particle(j)).sqrt();
                }
            }
            s / (n * (n - 1) / 2) as f64
        };
        let mut st = AdaGradState::default();
        let mut prev = mean_dist(&p);
        for _ in 0..100 {
            svgd_iteration(&mut p, &zero, &mut st).unwrap();
            let now = mean_dist(&p);
            assert!(now >= prev - 1e-12, "{now} < {prev}");
            prev = now;
        }
    }

    #[test]
    fn accumulator_stays_finite_and_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut p = set(&[&[0.0, 0.0], &[1.0, 1.0], &[2.0, 0.5]]);
        let mut st = AdaGradState::default();
        for _ in 0..10_000 {
            let g: Vec<f64> = (0..6).map(|_| rng.random_range(-5.0..5.0)).collect();
            let g = Matrix::from_vec(3, 2, g).unwrap();
            adagrad_step(&mut p, &g, &mut st).unwrap();
        }
        assert!(st
            .accumulator()
            .unwrap()
            .as_slice()
            .iter()
            .all(|a| a.is_finite() && *a >= 0.0));
    }
}
