use serde::{Deserialize, Serialize};

use super::fractional::SpaceTimeField;
use crate::error::{Error, Result};

/// Sensor positions in `[0,1]^2` and the times at which each one reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorLayout {
    pub locations: Vec<[f64; 2]>,
    pub times: Vec<f64>,
}

impl SensorLayout {
    /// `k x k` sensors evenly spaced over `[lo, hi]^2`, listed row by row
    /// (second coordinate outer).
    pub fn uniform(k: usize, lo: f64, hi: f64, times: Vec<f64>) -> Self {
        let coord = |i: usize| {
            if k == 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * i as f64 / (k - 1) as f64
            }
        };
        let mut locations = Vec::with_capacity(k * k);
        for j in 0..k {
            for i in 0..k {
                locations.push([coord(i), coord(j)]);
            }
        }
        SensorLayout { locations, times }
    }

    /// 3x3 network read at t = 0.25 and 0.75.
    pub fn heat_source() -> Self {
        Self::uniform(3, 0.25, 0.75, vec![0.25, 0.75])
    }

    /// 5x5 network read at t = 0.25, 0.75 and 1.
    pub fn diffusion() -> Self {
        Self::uniform(5, 1.0 / 6.0, 5.0 / 6.0, vec![0.25, 0.75, 1.0])
    }

    pub fn len(&self) -> usize {
        self.locations.len() * self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn last_time(&self) -> f64 {
        self.times.iter().cloned().fold(0.0, f64::max)
    }
}

/// Field values at the sensors, time-major then in location order. Sensors
/// snap to the nearest grid node.
pub fn observe(field: &SpaceTimeField, layout: &SensorLayout) -> Result<Vec<f64>> {
    let grid = &field.grid;
    let n = grid.nodes_per_axis();
    let nodes: Vec<usize> = layout
        .locations
        .iter()
        .map(|s| {
            if !(0.0..=1.0).contains(&s[0]) || !(0.0..=1.0).contains(&s[1]) {
                return Err(Error::invalid(format!(
                    "sensor ({}, {}) lies outside the unit square",
                    s[0], s[1]
                )));
            }
            let i = (s[0] * grid.m as f64).round() as usize;
            let j = (s[1] * grid.m as f64).round() as usize;
            Ok(j * n + i)
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(layout.len());
    for &t in &layout.times {
        let k = grid.step_of(t)?;
        if k >= field.values.len() {
            return Err(Error::invalid(format!(
                "observation time {t} is past the end of the solve"
            )));
        }
        let u = field.at_step(k);
        out.extend(nodes.iter().map(|&idx| u[idx]));
    }
    Ok(out)
}
