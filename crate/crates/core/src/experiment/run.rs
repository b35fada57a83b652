use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method, Problem};
use super::io::{opt, read_samples, write_json, write_particles};
use super::{default_truth, VERSION};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::{mmd_to_reference, rel_error};
use crate::models::{
    generate_synthetic_data, DoubleBanana, FractionalPdeModel, ForwardModel, PdeKind,
    PermeabilityField, SyntheticData,
};
use crate::posterior::{DoubleBananaDensity, ExactModel, GaussianLikelihood, Posterior, Prior};
use crate::refinement::{
    design_point, fit_surrogate, initial_design, run_lsvgd, write_trace, EvalBudget, LsvgdSetup,
    TraceRecord,
};
use crate::surrogate::{Architecture, SurrogateParams};
use crate::svgd::{run_svgd_with, AdaGradState, ParticleSet};

/// Grid size for the permeability error.
pub const REL_K_GRID: usize = 64;

/// The forward model, prior and likelihood of one problem instance.
pub struct ProblemInstance {
    pub model: Box<dyn ForwardModel>,
    pub prior: Prior,
    pub likelihood: GaussianLikelihood,
    pub data: Option<SyntheticData>,
}

pub fn build_problem(cfg: &ExperimentConfig) -> Result<ProblemInstance> {
    let prior = cfg.problem.prior();
    match cfg.problem {
        Problem::DoubleBanana => {
            let target = DoubleBananaDensity::default();
            Ok(ProblemInstance {
                model: Box::new(DoubleBanana::new()),
                prior,
                likelihood: target.likelihood(),
                data: None,
            })
        }
        Problem::HeatSource | Problem::Diffusion => {
            let path = cfg.data_file.as_ref().ok_or_else(|| {
                Error::Config(format!("{} runs need a data file", cfg.problem.name()))
            })?;
            let data = SyntheticData::load(path)?;
            let pde = cfg.pde.clone().expect("validated");
            if data.layout != pde.layout || data.config.kind != pde.kind {
                return Err(Error::Config(format!(
                    "{} was generated for a different problem setup",
                    path.display()
                )));
            }
            let model = FractionalPdeModel::new(pde)?;
            let likelihood = GaussianLikelihood::new(data.observations.clone(), data.noise_std)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            Ok(ProblemInstance {
                model: Box::new(model),
                prior,
                likelihood,
                data: Some(data),
            })
        }
    }
}

/// Writes the synthetic data file for a PDE problem.
pub fn generate_data(cfg: &ExperimentConfig, out: &Path) -> Result<SyntheticData> {
    if !cfg.problem.is_pde() {
        return Err(Error::Config(format!(
            "{} has no synthetic data",
            cfg.problem.name()
        )));
    }
    let pde = cfg.pde.as_ref().ok_or_else(|| Error::Config("missing pde section".into()))?;
    let truth = match &cfg.true_parameter {
        Some(t) => t.clone(),
        None => default_truth(cfg.problem),
    };
    let data = generate_synthetic_data(pde, &truth, cfg.noise_std, cfg.fine_factor, cfg.seeds.data)?;
    if let Some(dir) = out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    data.save(out)?;
    Ok(data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub iteration: u64,
    pub mmd: Option<f64>,
    pub rel_k: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BudgetSummary {
    pub online_evals: u64,
    pub offline_evals: u64,
    pub bound: Option<u64>,
    pub exact_jacobians: u64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub particles: ParticleSet,
    pub budget: EvalBudget,
    pub metrics: Vec<MetricRow>,
    pub trace: Vec<TraceRecord>,
    pub posterior_mean: Vec<f64>,
    pub surrogate: Option<SurrogateParams>,
    pub wall_time: f64,
}

impl RunOutput {
    pub fn final_mmd(&self) -> Option<f64> {
        self.metrics.last().and_then(|m| m.mmd)
    }

    pub fn final_rel_k(&self) -> Option<f64> {
        self.metrics.last().and_then(|m| m.rel_k)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub status: String,
    pub error: Option<String>,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })
    }
}

/// Computes metrics at checkpoints.
struct Scorer {
    reference: Option<Matrix>,
    truth: Option<(PermeabilityField, Vec<f64>)>,
}

impl Scorer {
    fn new(cfg: &ExperimentConfig, problem: &ProblemInstance) -> Result<Self> {
        let reference = match &cfg.reference_file {
            Some(p) => {
                let r = read_samples(p)?;
                if r.cols() != cfg.problem.dim() {
                    return Err(Error::Config(format!(
                        "{} has {} columns, expected {}",
                        p.display(),
                        r.cols(),
                        cfg.problem.dim()
                    )));
                }
                Some(r)
            }
            None => None,
        };
        let truth = match (&problem.data, cfg.pde.as_ref().map(|p| &p.kind)) {
            (Some(d), Some(PdeKind::Diffusion { field, .. })) => {
                let grid = field.on_grid(&d.true_parameter, REL_K_GRID)?;
                Some((field.clone(), grid))
            }
            _ => None,
        };
        Ok(Scorer { reference, truth })
    }

    fn score(&self, p: &ParticleSet) -> Result<MetricRow> {
        let mmd = match &self.reference {
            Some(r) => Some(mmd_to_reference(p.points(), r)?),
            None => None,
        };
        let rel_k = match &self.truth {
            Some((field, truth)) => {
                let mean = design_point(p.points())?;
                Some(rel_error(&field.on_grid(&mean, REL_K_GRID)?, truth)?)
            }
            None => None,
        };
        Ok(MetricRow {
            iteration: p.iteration(),
            mmd,
            rel_k,
        })
    }
}

struct Recorder<'a> {
    dir: PathBuf,
    at: BTreeSet<u64>,
    scorer: &'a Scorer,
    metrics: Vec<MetricRow>,
}

impl Recorder<'_> {
    fn record(&mut self, p: &ParticleSet) -> Result<()> {
        if !self.at.contains(&p.iteration()) {
            return Ok(());
        }
        let path = self.dir.join(format!("particles_{:05}.csv", p.iteration()));
        write_particles(&path, p.iteration(), p.points())?;
        self.metrics.push(self.scorer.score(p)?);
        Ok(())
    }
}

fn checkpoint_set(cfg: &ExperimentConfig, total: usize) -> BTreeSet<u64> {
    let every = cfg.refinement.inner_steps.max(1);
    let mut at: BTreeSet<u64> = (0..=total).step_by(every).map(|i| i as u64).collect();
    at.extend(cfg.checkpoints.iter().filter(|&&c| c <= total).map(|&c| c as u64));
    at.insert(total as u64);
    at
}

/// Runs one experiment and writes its outputs under `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let manifest_path = dir.join("manifest.json");
    let mut manifest = Manifest {
        version: VERSION.to_string(),
        status: "running".into(),
        error: None,
        config: cfg.clone(),
    };
    write_json(&manifest_path, &manifest)?;
    let result = execute(cfg, &dir);
    match &result {
        Ok(_) => manifest.status = "ok".into(),
        Err(e) => {
            manifest.status = "error".into();
            manifest.error = Some(e.to_string());
        }
    }
    write_json(&manifest_path, &manifest)?;
    result
}

fn execute(cfg: &ExperimentConfig, dir: &Path) -> Result<RunOutput> {
    let start = Instant::now();
    let problem = build_problem(cfg)?;
    let scorer = Scorer::new(cfg, &problem)?;
    let total = cfg.total_iterations();
    let mut rec = Recorder {
        dir: dir.to_path_buf(),
        at: checkpoint_set(cfg, total),
        scorer: &scorer,
        metrics: Vec::new(),
    };

    let init_sampler = cfg.initial_particles.sampler(&problem.prior)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seeds.particles);
    let mut particles = ParticleSet::new(init_sampler.sample(cfg.particles, &mut rng))?;
    rec.record(&particles)?;
    let mut adagrad = AdaGradState::new(cfg.master_step, cfg.momentum)?;
    let model = problem.model.as_ref();
    let arch = Architecture::new(
        cfg.problem.dim(),
        model.output_dim(),
        cfg.hidden.clone(),
    )?;
    let design = || -> Result<Matrix> {
        let sampler = cfg.design.region.sampler(&problem.prior)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seeds.design);
        Ok(sampler.sample(cfg.design.count, &mut rng))
    };

    let (budget, trace, surrogate) = match cfg.method {
        Method::Direct => {
            let post = Posterior::new(
                problem.prior.clone(),
                problem.likelihood.clone(),
                ExactModel::new(model)?,
            )?;
            run_svgd_with(&mut particles, &post, total, &mut adagrad, |p| rec.record(p))?;
            let budget = EvalBudget {
                online: model.eval_count(),
                offline: 0,
            };
            (budget, Vec::new(), None)
        }
        Method::PriorDnn => {
            let data = initial_design(model, &design()?)?;
            let net = fit_surrogate(
                &arch,
                &problem.prior,
                &data,
                &cfg.offline_training,
                cfg.seeds.network,
                cfg.seeds.training,
            )?;
            let post = Posterior::new(problem.prior.clone(), problem.likelihood.clone(), &net)?;
            run_svgd_with(&mut particles, &post, total, &mut adagrad, |p| rec.record(p))?;
            let budget = EvalBudget {
                online: 0,
                offline: data.len() as u64,
            };
            (budget, Vec::new(), Some(net))
        }
        Method::Ldnn => {
            let data = initial_design(model, &design()?)?;
            let before = model.eval_count();
            let setup = LsvgdSetup {
                exact: model,
                prior: problem.prior.clone(),
                likelihood: problem.likelihood.clone(),
                refinement: cfg.refinement.clone(),
                architecture: arch.clone(),
                offline_training: cfg.offline_training.clone(),
                refine_training: cfg.refine_training.clone(),
                adagrad,
                init_seed: cfg.seeds.network,
                train_seed: cfg.seeds.training,
            };
            let out = run_lsvgd(particles, data, &setup, |p| rec.record(p))?;
            debug_assert_eq!(model.eval_count() - before, out.budget.online);
            particles = out.particles;
            write_trace(&dir.join("trace.jsonl"), &out.trace)?;
            (out.budget, out.trace, Some(out.surrogate))
        }
    };

    let wall_time = start.elapsed().as_secs_f64();
    if let Some(net) = &surrogate {
        net.save(&dir.join("surrogate.json"))?;
    }
    write_metrics(&dir.join("metrics.csv"), &rec.metrics)?;
    write_json(
        &dir.join("budget.json"),
        &BudgetSummary {
            online_evals: budget.online,
            offline_evals: budget.offline,
            bound: (cfg.method == Method::Ldnn).then(|| cfg.refinement.eval_bound()),
            exact_jacobians: model.counter().jacobians(),
            wall_time_s: wall_time,
        },
    )?;
    let posterior_mean = design_point(particles.points())?;
    Ok(RunOutput {
        particles,
        budget,
        metrics: rec.metrics,
        trace,
        posterior_mean,
        surrogate,
        wall_time,
    })
}

fn write_metrics(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "mmd", "rel_k"])?;
    for r in rows {
        w.write_record([r.iteration.to_string(), opt(r.mmd), opt(r.rel_k)])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
