use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nine Gaussian bumps on a 3x3 grid over `[0.2, 0.8]^2`, row by row.
pub fn default_centers() -> Vec<[f64; 2]> {
    let c = [0.2, 0.5, 0.8];
    let mut out = Vec::with_capacity(9);
    for y in c {
        for x in c {
            out.push([x, y]);
        }
    }
    out
}

/// `k(s; x) = sum_i x_i exp(-0.5 |s - s_i|^2 / l^2)`.
pub fn permeability_field(s: [f64; 2], weights: &[f64], centers: &[[f64; 2]], length_scale: f64) -> f64 {
    let inv = 0.5 / (length_scale * length_scale);
    weights
        .iter()
        .zip(centers)
        .map(|(w, c)| w * (-((s[0] - c[0]).powi(2) + (s[1] - c[1]).powi(2)) * inv).exp())
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermeabilityField {
    pub centers: Vec<[f64; 2]>,
    pub length_scale: f64,
}

impl Default for PermeabilityField {
    fn default() -> Self {
        PermeabilityField {
            centers: default_centers(),
            length_scale: 0.15,
        }
    }
}

impl PermeabilityField {
    pub fn num_weights(&self) -> usize {
        self.centers.len()
    }

    pub fn eval(&self, s: [f64; 2], weights: &[f64]) -> Result<f64> {
        if weights.len() != self.centers.len() {
            return Err(Error::invalid(format!(
                "permeability needs {} weights, got {}",
                self.centers.len(),
                weights.len()
            )));
        }
        Ok(permeability_field(s, weights, &self.centers, self.length_scale))
    }

    /// Field values on the `k x k` grid of points `i / (k - 1)`.
    pub fn on_grid(&self, weights: &[f64], k: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(k * k);
        let step = 1.0 / (k.max(2) - 1) as f64;
        for j in 0..k {
            for i in 0..k {
                out.push(self.eval([i as f64 * step, j as f64 * step], weights)?);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_vanish() {
        let p = PermeabilityField::default();
        assert_eq!(p.eval([0.3, 0.7], &[0.0; 9]).unwrap(), 0.0);
    }

    #[test]
    fn peak_at_center() {
        let p = PermeabilityField::default();
        for i in 0..9 {
            let mut w = [0.0; 9];
            w[i] = 1.0;
            assert_eq!(p.eval(p.centers[i], &w).unwrap(), 1.0);
        }
    }

    #[test]
    fn matches_term_by_term_sum() {
        let p = PermeabilityField::default();
        let w = [0.3, 1.7, 0.9, 2.2, 0.1, 1.0, 0.45, 3.1, 0.8];
        let s = [0.37, 0.61];
        let mut expect = 0.0;
        for i in 0..9 {
            let dx = s[0] - p.centers[i][0];
            let dy = s[1] - p.centers[i][1];
            expect += w[i] * (-(dx * dx + dy * dy) / (2.0 * 0.15 * 0.15)).exp();
        }
        assert!((p.eval(s, &w).unwrap() - expect).abs() < 1e-14);
        assert!(p.eval(s, &w[..8]).is_err());
    }
}
