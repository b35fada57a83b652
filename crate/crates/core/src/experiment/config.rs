use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::models::PdeConfig;
use crate::posterior::Prior;
use crate::refinement::RefinementConfig;
use crate::surrogate::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    DoubleBanana,
    HeatSource,
    Diffusion,
}

impl Problem {
    pub fn name(self) -> &'static str {
        match self {
            Problem::DoubleBanana => "double-banana",
            Problem::HeatSource => "heat-source",
            Problem::Diffusion => "diffusion",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Problem::DoubleBanana | Problem::HeatSource => 2,
            Problem::Diffusion => 9,
        }
    }

    pub fn prior(self) -> Prior {
        match self {
            Problem::DoubleBanana => Prior::StandardNormal { dim: 2 },
            Problem::HeatSource => Prior::UniformBox {
                lo: vec![0.0, 0.0],
                hi: vec![1.0, 1.0],
            },
            Problem::Diffusion => Prior::LogNormal { dim: 9 },
        }
    }

    pub fn is_pde(self) -> bool {
        !matches!(self, Problem::DoubleBanana)
    }

    pub fn default_pde(self) -> Option<PdeConfig> {
        match self {
            Problem::DoubleBanana => None,
            Problem::HeatSource => Some(PdeConfig::heat_source()),
            Problem::Diffusion => Some(PdeConfig::diffusion()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Direct,
    PriorDnn,
    Ldnn,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::PriorDnn => "prior-dnn",
            Method::Ldnn => "ldnn",
        }
    }
}

/// Where initial particles or design points are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Region {
    Prior,
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl Region {
    pub fn sampler(&self, prior: &Prior) -> Result<Prior> {
        match self {
            Region::Prior => Ok(prior.clone()),
            Region::Box { lo, hi } => {
                Prior::uniform(lo.clone(), hi.clone()).map_err(|e| Error::Config(e.to_string()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct DesignSpec {
    pub count: usize,
    pub region: Region,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Seeds {
    pub particles: u64,
    pub design: u64,
    pub network: u64,
    pub training: u64,
    pub data: u64,
}

impl Seeds {
    /// Distinct, reproducible seeds derived from one number.
    pub fn from_base(base: u64) -> Self {
        Seeds {
            particles: base,
            design: base.wrapping_add(1000),
            network: base.wrapping_add(2000),
            training: base.wrapping_add(3000),
            data: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub method: Method,
    pub particles: usize,
    /// SVGD steps for the direct and prior-DNN methods; defaults to
    /// `i_max * inner_steps`.
    pub iterations: Option<usize>,
    pub refinement: RefinementConfig,
    pub hidden: Vec<usize>,
    pub offline_training: TrainConfig,
    pub refine_training: TrainConfig,
    pub design: DesignSpec,
    pub initial_particles: Region,
    pub master_step: f64,
    pub momentum: f64,
    pub seeds: Seeds,
    pub pde: Option<PdeConfig>,
    /// Synthetic data for the PDE problems.
    pub data_file: Option<PathBuf>,
    /// Reference samples for MMD.
    pub reference_file: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Used by data generation.
    pub noise_std: f64,
    pub true_parameter: Option<Vec<f64>>,
    pub fine_factor: usize,
    /// Extra checkpoint iterations besides every `inner_steps` and the end.
    pub checkpoints: Vec<usize>,
}

impl ExperimentConfig {
    /// Problem-specific defaults.
    pub fn defaults(problem: Problem, method: Method) -> Self {
        let mut refinement = RefinementConfig::default();
        if problem == Problem::Diffusion {
            refinement.q = 10;
        }
        let (hidden, design, noise_std, master_step) = match problem {
            Problem::DoubleBanana => (
                vec![20, 20, 20],
                DesignSpec {
                    count: 10,
                    region: Region::Prior,
                },
                0.3,
                0.01,
            ),
            Problem::HeatSource => (
                vec![20, 20, 20],
                DesignSpec {
                    count: 10,
                    region: Region::Prior,
                },
                0.2,
                0.01,
            ),
            Problem::Diffusion => (
                vec![50, 50, 50],
                DesignSpec {
                    count: 100,
                    region: Region::Prior,
                },
                0.01,
                0.01,
            ),
        };
        ExperimentConfig {
            problem,
            method,
            particles: 100,
            iterations: None,
            refinement,
            hidden,
            offline_training: TrainConfig::default(),
            refine_training: TrainConfig::default().with_epochs(1000),
            design,
            initial_particles: Region::Prior,
            master_step,
            momentum: 0.9,
            seeds: Seeds::from_base(1),
            pde: problem.default_pde(),
            data_file: None,
            reference_file: None,
            output_dir: PathBuf::from("runs").join(format!("{}-{}", problem.name(), method.name())),
            noise_std,
            true_parameter: None,
            fine_factor: 2,
            checkpoints: vec![10, 100],
        }
    }

    /// Total SVGD steps the run takes.
    pub fn total_iterations(&self) -> usize {
        match self.method {
            Method::Ldnn => self.refinement.i_max * self.refinement.inner_steps,
            _ => self
                .iterations
                .unwrap_or(self.refinement.i_max * self.refinement.inner_steps),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.particles < 2 {
            return bad("at least 2 particles are needed".into());
        }
        if self.method == Method::Direct && self.problem != Problem::DoubleBanana {
            return bad(format!(
                "the direct method needs an exact Jacobian, which {} does not have",
                self.problem.name()
            ));
        }
        self.refinement.validate()?;
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layer widths must be positive".into());
        }
        if self.method != Method::Direct && self.design.count == 0 {
            return bad("the initial design needs at least one point".into());
        }
        if !(self.master_step > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return bad("master step must be positive and momentum in [0, 1)".into());
        }
        for region in [&self.design.region, &self.initial_particles] {
            if let Region::Box { lo, hi } = region {
                if lo.len() != self.problem.dim() {
                    return bad("box region has the wrong dimension".into());
                }
                Prior::uniform(lo.clone(), hi.clone()).map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        if self.problem.is_pde() && self.pde.is_none() {
            return bad("PDE problems need a pde section".into());
        }
        if self.fine_factor < 2 {
            return bad("fine factor must be at least 2".into());
        }
        if let Some(t) = &self.true_parameter {
            if t.len() != self.problem.dim() {
                return bad("true parameter has the wrong dimension".into());
            }
        }
        Ok(())
    }

    /// Reads a JSON config. Fields left out take the defaults of the
    /// problem and method named in the file.
    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        let name = |key: &str| -> Result<Value> {
            value
                .get(key)
                .cloned()
                .ok_or_else(|| Error::Config(format!("config needs a \"{key}\" field")))
        };
        let problem: Problem =
            serde_json::from_value(name("problem")?).map_err(|e| Error::Config(e.to_string()))?;
        let method: Method =
            serde_json::from_value(name("method")?).map_err(|e| Error::Config(e.to_string()))?;
        let mut base = serde_json::to_value(Self::defaults(problem, method)).expect("serializable");
        merge(&mut base, value);
        serde_json::from_value(base).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }
}

/// Overlays `patch` onto `base`, object by object.
pub fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}
