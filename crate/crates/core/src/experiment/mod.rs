//! Experiment driver: configs, data generation, runs and comparisons.

mod compare;
pub mod config;
pub mod io;
pub mod reference;
pub mod run;

pub use compare::{compare_runs, CompareRow, Comparison};
pub use config::{DesignSpec, ExperimentConfig, Method, Problem, Region, Seeds};
pub use run::{
    build_problem, generate_data, run_experiment, BudgetSummary, Manifest, MetricRow,
    ProblemInstance, RunOutput,
};

use serde::Deserialize;

pub const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Default heat source location used to generate data.
pub const HEAT_SOURCE_TRUTH: [f64; 2] = [0.7, 0.7];

#[derive(Deserialize)]
struct TruthFile {
    #[cfg_attr(not(test), allow(dead_code))]
    seed: u64,
    weights: Vec<f64>,
}

const DIFFUSION_TRUTH: &str = include_str!("../../data/diffusion_truth.json");

/// The shipped true conductivity weights.
pub fn diffusion_truth() -> Vec<f64> {
    let t: TruthFile = serde_json::from_str(DIFFUSION_TRUTH).expect("shipped truth parses");
    t.weights
}

pub fn default_truth(problem: Problem) -> Vec<f64> {
    match problem {
        Problem::DoubleBanana => vec![],
        Problem::HeatSource => HEAT_SOURCE_TRUTH.to_vec(),
        Problem::Diffusion => diffusion_truth(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn shipped_truth_regenerates_from_its_seed() {
        let t: TruthFile = serde_json::from_str(DIFFUSION_TRUTH).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(t.seed);
        let w: Vec<f64> = (0..9)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z.exp()
            })
            .collect();
        assert_eq!(w, diffusion_truth());
    }
}
