use serde::{Deserialize, Serialize};

use super::fractional::{solve, FractionalGrid, Forcing, HeatSolve, SpaceTimeField};
use super::permeability::PermeabilityField;
use super::sensors::{observe, SensorLayout};
use super::{check_dim, EvalCounter, ForwardModel};
use crate::error::Result;

const SOURCE_WIDTH: f64 = 0.1;

/// What the unknown parameter controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PdeKind {
    /// Unit conductivity; the parameter is the source centre in `[0,1]^2`.
    HeatSource,
    /// Fixed source; the parameter is the weight vector of the conductivity.
    Diffusion {
        field: PermeabilityField,
        source_center: [f64; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeConfig {
    #[serde(flatten)]
    pub kind: PdeKind,
    pub m: usize,
    pub dt: f64,
    pub alpha: f64,
    pub layout: SensorLayout,
}

impl PdeConfig {
    pub fn heat_source() -> Self {
        PdeConfig {
            kind: PdeKind::HeatSource,
            m: 24,
            dt: 0.01,
            alpha: 0.5,
            layout: SensorLayout::heat_source(),
        }
    }

    pub fn diffusion() -> Self {
        PdeConfig {
            kind: PdeKind::Diffusion {
                field: PermeabilityField::default(),
                source_center: [0.25, 0.75],
            },
            m: 24,
            dt: 0.01,
            alpha: 0.5,
            layout: SensorLayout::diffusion(),
        }
    }

    /// The solve only needs to reach the last observation time.
    pub fn grid(&self) -> Result<FractionalGrid> {
        FractionalGrid::new(self.m, self.dt, self.alpha, self.layout.last_time())
    }

    pub fn input_dim(&self) -> usize {
        match &self.kind {
            PdeKind::HeatSource => 2,
            PdeKind::Diffusion { field, .. } => field.num_weights(),
        }
    }

    pub fn refined(&self, factor: usize) -> Self {
        PdeConfig {
            m: self.m * factor,
            dt: self.dt / factor as f64,
            ..self.clone()
        }
    }

    pub fn mode<'a>(&'a self, x: &'a [f64]) -> HeatMode<'a> {
        match &self.kind {
            PdeKind::HeatSource => HeatMode::SourceLocation([x[0], x[1]]),
            PdeKind::Diffusion {
                field,
                source_center,
            } => HeatMode::DiffusionCoefficient {
                weights: x,
                field,
                source_center: *source_center,
            },
        }
    }
}

pub enum HeatMode<'a> {
    SourceLocation([f64; 2]),
    DiffusionCoefficient {
        weights: &'a [f64],
        field: &'a PermeabilityField,
        source_center: [f64; 2],
    },
}

pub fn solve_fractional_heat(grid: &FractionalGrid, mode: HeatMode<'_>) -> Result<SpaceTimeField> {
    let problem = match mode {
        HeatMode::SourceLocation(center) => HeatSolve::new(
            grid.clone(),
            Forcing::Gaussian {
                center,
                width: SOURCE_WIDTH,
            },
        ),
        HeatMode::DiffusionCoefficient {
            weights,
            field,
            source_center,
        } => {
            let kappa = (0..grid.num_nodes())
                .map(|idx| field.eval(grid.node_coords(idx), weights))
                .collect::<Result<Vec<_>>>()?;
            let mut p = HeatSolve::new(
                grid.clone(),
                Forcing::Gaussian {
                    center: source_center,
                    width: SOURCE_WIDTH,
                },
            );
            p.conductivity = Some(kappa);
            p
        }
    };
    solve(&problem)
}

/// Sensor readings of a fractional diffusion solve. No exact Jacobian.
#[derive(Debug)]
pub struct FractionalPdeModel {
    config: PdeConfig,
    grid: FractionalGrid,
    counter: EvalCounter,
}

impl FractionalPdeModel {
    pub fn new(config: PdeConfig) -> Result<Self> {
        let grid = config.grid()?;
        Ok(FractionalPdeModel {
            config,
            grid,
            counter: EvalCounter::default(),
        })
    }

    pub fn config(&self) -> &PdeConfig {
        &self.config
    }
}

impl ForwardModel for FractionalPdeModel {
    fn name(&self) -> &str {
        match self.config.kind {
            PdeKind::HeatSource => "heat-source",
            PdeKind::Diffusion { .. } => "diffusion",
        }
    }

    fn input_dim(&self) -> usize {
        self.config.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.config.layout.len()
    }

    fn counter(&self) -> &EvalCounter {
        &self.counter
    }

    fn compute(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.name(), self.input_dim(), x)?;
        let field = solve_fractional_heat(&self.grid, self.config.mode(x))?;
        observe(&field, &self.config.layout)
    }
}
