mod common;

use common::{fd_gradient, fd_jacobian, random_net, rel_diff};
use lsvgd::models::double_banana_jacobian;
use lsvgd::posterior::{DoubleBananaDensity, ExactModel, GaussianLikelihood, Posterior, Prior};
use lsvgd::models::DoubleBanana;
use lsvgd::surrogate::{loss, param_gradient};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const INSTANCES: u64 = 25;

#[test]
fn parameter_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..INSTANCES {
        let (params, data) = random_net(&mut rng);
        let beta = 1e-3;
        let g: Vec<f64> = param_gradient(&params, &data, beta).unwrap().values().cloned().collect();
        let theta: Vec<f64> = params.values().cloned().collect();
        let f = |t: &[f64]| {
            let mut p = params.clone();
            p.values_mut().zip(t).for_each(|(a, b)| *a = *b);
            loss(&p, &data, beta).unwrap()
        };
        let fd = fd_gradient(f, &theta, 1e-6);
        let e = rel_diff(&g, &fd, 1e-8);
        assert!(e < 1e-5, "relative error {e}");
    }
}

#[test]
fn input_jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for _ in 0..INSTANCES {
        let (params, _) = random_net(&mut rng);
        let x: Vec<f64> = (0..params.input_dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let j = params.input_jacobian(&x).unwrap();
        let fd = fd_jacobian(|x| params.forward(x).unwrap(), &x, 1e-6);
        let e = rel_diff(j.as_slice(), fd.as_slice(), 1e-8);
        assert!(e < 1e-5, "relative error {e}");
    }
}

#[test]
fn double_banana_jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for _ in 0..INSTANCES {
        let x = [rng.random_range(-2.0..2.0), rng.random_range(-1.0..3.0)];
        let j = double_banana_jacobian(&x).unwrap();
        let fd = fd_gradient(|x| lsvgd::models::double_banana_forward(x).unwrap(), &x, 1e-6);
        let e = rel_diff(&j, &fd, 1e-8);
        assert!(e < 1e-6, "relative error {e} at {x:?}");
    }
}

#[test]
fn posterior_scores_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let target = DoubleBananaDensity::default();
    let model = DoubleBanana::new();
    let exact = Posterior::new(target.prior().unwrap(), target.likelihood(), ExactModel::new(&model).unwrap()).unwrap();
    for _ in 0..INSTANCES {
        let x = [rng.random_range(-2.0..2.0), rng.random_range(-1.0..3.0)];
        let fd = fd_gradient(|x| exact.log_posterior(x).unwrap(), &x, 1e-6);
        let e = rel_diff(&exact.score(&x).unwrap(), &fd, 1e-8);
        assert!(e < 1e-6, "split posterior: {e}");
        let fd = fd_gradient(|x| target.log_density(x).unwrap(), &x, 1e-6);
        let e = rel_diff(&target.score(&x).unwrap(), &fd, 1e-8);
        assert!(e < 1e-6, "closed form: {e}");
    }

    // surrogate posterior under each prior family
    for _ in 0..INSTANCES {
        let (params, _) = random_net(&mut rng);
        let d = params.input_dim();
        let n = params.output_dim();
        let prior = match rng.random_range(0..3) {
            0 => Prior::StandardNormal { dim: d },
            1 => Prior::uniform(vec![-3.0; d], vec![3.0; d]).unwrap(),
            _ => Prior::LogNormal { dim: d },
        };
        let x: Vec<f64> = match prior {
            Prior::LogNormal { .. } => (0..d).map(|_| rng.random_range(0.3..3.0)).collect(),
            _ => (0..d).map(|_| rng.random_range(-2.0..2.0)).collect(),
        };
        let obs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lik = GaussianLikelihood::new(obs, 0.5).unwrap();
        let post = Posterior::new(prior, lik, &params).unwrap();
        let fd = fd_gradient(|x| post.log_posterior(x).unwrap(), &x, 1e-6);
        let e = rel_diff(&post.score(&x).unwrap(), &fd, 1e-8);
        assert!(e < 1e-5, "surrogate posterior: {e}");
    }
}
