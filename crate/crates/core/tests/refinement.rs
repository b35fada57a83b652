mod common;

use common::min_separation;
use lsvgd::models::{DoubleBanana, ForwardModel};
use lsvgd::posterior::Prior;
use lsvgd::refinement::{
    fit_surrogate, initial_design, refine_step, EvalBudget, RefinementConfig, SurrogateState,
};
use lsvgd::surrogate::{Architecture, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn added_points_respect_the_radius_and_shrinks_are_exact() {
    let model = DoubleBanana::new();
    let prior = Prior::StandardNormal { dim: 2 };
    let arch = Architecture::new(2, 1, vec![6, 6]).unwrap();
    let train = TrainConfig::default().with_epochs(5);
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let (mut shrinks, mut retrains) = (0, 0);
    for call in 0..100u64 {
        let design = prior.sample(rng.random_range(1..15), &mut rng);
        let data = initial_design(&model, &design).unwrap();
        let params = fit_surrogate(&arch, &prior, &data, &train, call, call).unwrap();
        let radius = rng.random_range(0.05..1.5);
        let mut state = SurrogateState {
            params,
            data: data.clone(),
            radius,
        };
        let spread = rng.random_range(0.1..2.0);
        let particles = lsvgd::Matrix::from_vec(
            40,
            2,
            (0..80).map(|_| spread * rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let cfg = RefinementConfig {
            q: rng.random_range(1..8),
            tol: 0.0,
            ..RefinementConfig::default()
        };
        let mut budget = EvalBudget::default();
        let before = model.eval_count();
        let report = refine_step(&particles, &mut state, &model, &cfg, &train, call, &mut budget).unwrap();

        assert_eq!(report.radius, radius);
        assert!(report.added.len() <= cfg.q);
        if !report.added.is_empty() {
            let sep = min_separation(&report.added, data.inputs());
            assert!(sep >= radius, "call {call}: separation {sep} < {radius}");
        }
        // every added point is a particle
        for p in &report.added {
            assert!(particles.iter_rows().any(|r| r == p.as_slice()));
        }
        assert_eq!(state.data.len(), data.len() + report.added.len());
        if report.added.len() <= 1 {
            assert_eq!(state.radius, radius * 0.8);
            assert!(!report.retrained);
            shrinks += 1;
        } else {
            assert_eq!(state.radius, radius);
            assert!(report.retrained);
            retrains += 1;
        }
        // indicator plus one evaluation per added point
        assert_eq!(budget.online, 1 + report.added.len() as u64);
        assert_eq!(model.eval_count() - before, budget.online);
    }
    assert!(shrinks > 5 && retrains > 5, "{shrinks} shrinks, {retrains} retrains");
}

#[test]
fn accurate_surrogate_is_left_alone() {
    let model = DoubleBanana::new();
    let prior = Prior::StandardNormal { dim: 2 };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let design = prior.sample(10, &mut rng);
    let data = initial_design(&model, &design).unwrap();
    let arch = Architecture::new(2, 1, vec![5]).unwrap();
    let params = fit_surrogate(&arch, &prior, &data, &TrainConfig::default().with_epochs(10), 1, 1).unwrap();
    let mut state = SurrogateState {
        params: params.clone(),
        data,
        radius: 0.2,
    };
    let cfg = RefinementConfig {
        tol: f64::INFINITY,
        ..RefinementConfig::default()
    };
    let particles = prior.sample(30, &mut rng);
    let mut budget = EvalBudget::default();
    let r = refine_step(&particles, &mut state, &model, &cfg, &TrainConfig::default(), 0, &mut budget).unwrap();
    assert!(!r.refined());
    assert_eq!(budget.online, 1);
    assert_eq!(state.params, params);
    assert_eq!(state.data.len(), 10);
}
