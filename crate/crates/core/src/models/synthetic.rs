use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::pde::{solve_fractional_heat, PdeConfig};
use super::sensors::{observe, SensorLayout};
use crate::error::{Error, Result};

/// Noisy sensor data plus everything needed to regenerate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticData {
    pub config: PdeConfig,
    pub fine_factor: usize,
    pub layout: SensorLayout,
    pub times: Vec<f64>,
    pub noise_std: f64,
    pub seed: u64,
    pub true_parameter: Vec<f64>,
    pub observations: Vec<f64>,
}

impl SyntheticData {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })
    }
}

/// Solves on a grid `fine_factor` times finer in space and time than
/// `config`, reads the sensors and adds iid Gaussian noise.
pub fn generate_synthetic_data(
    config: &PdeConfig,
    truth: &[f64],
    noise_std: f64,
    fine_factor: usize,
    seed: u64,
) -> Result<SyntheticData> {
    if fine_factor < 2 {
        return Err(Error::invalid("fine_factor must be at least 2"));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::invalid("noise_std must be finite and non-negative"));
    }
    if truth.len() != config.input_dim() {
        return Err(Error::invalid(format!(
            "true parameter has dimension {}, expected {}",
            truth.len(),
            config.input_dim()
        )));
    }
    let fine = config.refined(fine_factor);
    let grid = fine.grid()?;
    let field = solve_fractional_heat(&grid, fine.mode(truth))?;
    let clean = observe(&field, &fine.layout)?;
    Ok(SyntheticData {
        config: config.clone(),
        fine_factor,
        layout: config.layout.clone(),
        times: config.layout.times.clone(),
        noise_std,
        seed,
        true_parameter: truth.to_vec(),
        observations: add_noise(&clean, noise_std, seed),
    })
}

fn add_noise(clean: &[f64], noise_std: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    clean
        .iter()
        .map(|v| {
            let z: f64 = StandardNormal.sample(&mut rng);
            v + noise_std * z
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::sensors::SensorLayout;

    fn small() -> PdeConfig {
        PdeConfig {
            m: 8,
            dt: 0.05,
            layout: SensorLayout::uniform(3, 0.25, 0.75, vec![0.25, 0.5]),
            ..PdeConfig::heat_source()
        }
    }

    #[test]
    fn noiseless_data_equals_fine_solve() {
        let cfg = small();
        let d = generate_synthetic_data(&cfg, &[0.3, 0.6], 0.0, 2, 1).unwrap();
        let fine = cfg.refined(2);
        let field = solve_fractional_heat(&fine.grid().unwrap(), fine.mode(&[0.3, 0.6])).unwrap();
        assert_eq!(d.observations, observe(&field, &fine.layout).unwrap());
        assert_eq!(d.observations.len(), 18);
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let cfg = small();
        let a = generate_synthetic_data(&cfg, &[0.3, 0.6], 0.2, 2, 9).unwrap();
        let b = generate_synthetic_data(&cfg, &[0.3, 0.6], 0.2, 2, 9).unwrap();
        let c = generate_synthetic_data(&cfg, &[0.3, 0.6], 0.2, 2, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.observations, c.observations);
    }

    #[test]
    fn noise_std_matches_over_replications() {
        let clean = vec![0.5; 10];
        let mut sq = 0.0;
        let mut n = 0.0;
        for seed in 0..1000 {
            for v in add_noise(&clean, 0.2, seed) {
                sq += (v - 0.5) * (v - 0.5);
                n += 1.0;
            }
        }
        let std = (sq / n).sqrt();
        assert!((std / 0.2 - 1.0).abs() < 0.05, "std {std}");
    }

    #[test]
    fn rejects_coarse_factor() {
        assert!(generate_synthetic_data(&small(), &[0.3, 0.6], 0.2, 1, 0).is_err());
        assert!(generate_synthetic_data(&small(), &[0.3], 0.2, 2, 0).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.json");
        let d = generate_synthetic_data(&small(), &[0.3, 0.6], 0.2, 2, 3).unwrap();
        d.save(&path).unwrap();
        assert_eq!(SyntheticData::load(&path).unwrap(), d);
    }
}
