//! The adaptive outer loop: test the surrogate at the particle mean, add
//! space-filling training points near it when the test fails, retrain.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{norm2, sq_dist, Matrix};
use crate::models::ForwardModel;
use crate::posterior::{GaussianLikelihood, Posterior, Prior};
use crate::surrogate::{
    train, warm_start_refine, Architecture, OutputMap, SurrogateParams, TrainConfig, TrainingSet,
};
use crate::svgd::{run_svgd_with, AdaGradState, ParticleSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct RefinementConfig {
    /// Most points added per refinement.
    pub q: usize,
    /// Initial separation radius.
    pub radius: f64,
    pub tol: f64,
    pub rho: f64,
    pub i_max: usize,
    /// SVGD steps per outer iteration.
    pub inner_steps: usize,
    pub persist_adagrad: bool,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        RefinementConfig {
            q: 5,
            radius: 0.2,
            tol: 1e-2,
            rho: 0.8,
            i_max: 30,
            inner_steps: 10,
            persist_adagrad: true,
        }
    }
}

impl RefinementConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q == 0 {
            return Err(Error::Config("q must be positive".into()));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::Config("radius must be positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config("tol must be positive".into()));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Config("rho must lie in (0, 1)".into()));
        }
        if self.inner_steps == 0 {
            return Err(Error::Config("inner steps must be positive".into()));
        }
        Ok(())
    }

    /// `(Q + 1) I_max`.
    pub fn eval_bound(&self) -> u64 {
        ((self.q + 1) * self.i_max) as u64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalBudget {
    pub online: u64,
    pub offline: u64,
}

/// Componentwise mean of the particles.
pub fn design_point(points: &Matrix) -> Result<Vec<f64>> {
    if points.rows() == 0 {
        return Err(Error::invalid("design point of an empty particle set"));
    }
    let mut mean = vec![0.0; points.cols()];
    for row in points.iter_rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    let n = points.rows() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(mean)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Indicator {
    pub value: f64,
    /// The exact output was zero and `value` is the absolute error.
    pub degenerate: bool,
    pub exact: Vec<f64>,
}

/// `|f(x*) - f~(x*)| / |f(x*)|`, falling back to the absolute error when
/// `f(x*) = 0`. Costs one counted exact evaluation.
pub fn error_indicator(
    x_star: &[f64],
    exact: &dyn ForwardModel,
    surrogate: &SurrogateParams,
    budget: &mut EvalBudget,
) -> Result<Indicator> {
    let f = exact.evaluate(x_star)?;
    budget.online += 1;
    let g = surrogate.forward(x_star)?;
    Ok(indicator_from(f, &g))
}

fn indicator_from(f: Vec<f64>, g: &[f64]) -> Indicator {
    let diff = sq_dist(&f, g).sqrt();
    let denom = norm2(&f);
    if denom > 0.0 {
        Indicator {
            value: diff / denom,
            degenerate: false,
            exact: f,
        }
    } else {
        Indicator {
            value: diff,
            degenerate: true,
            exact: f,
        }
    }
}

/// Greedy space-filling selection: repeatedly the particle nearest `x_star`
/// that is at least `r` from every existing input and every point already
/// chosen. Stops after `q` points or when none is feasible.
pub fn select_points(
    particles: &Matrix,
    x_star: &[f64],
    existing: &Matrix,
    q: usize,
    r: f64,
) -> Vec<Vec<f64>> {
    let r2 = r * r;
    let mut order: Vec<(f64, usize)> = particles
        .iter_rows()
        .enumerate()
        .map(|(i, p)| (sq_dist(p, x_star), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut chosen: Vec<Vec<f64>> = Vec::new();
    // one pass suffices: a particle infeasible now stays infeasible once
    // more points are chosen
    for (_, i) in order {
        if chosen.len() == q {
            break;
        }
        let p = particles.row(i);
        let clear = existing.iter_rows().all(|e| sq_dist(e, p) >= r2)
            && chosen.iter().all(|c| sq_dist(c, p) >= r2);
        if clear {
            chosen.push(p.to_vec());
        }
    }
    chosen
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineReport {
    pub err: f64,
    pub degenerate: bool,
    pub x_star: Vec<f64>,
    pub added: Vec<Vec<f64>>,
    /// Separation radius used for selection.
    pub radius: f64,
    pub radius_after: f64,
    pub retrained: bool,
    /// False when retraining was attempted and rejected by the guard.
    pub training_accepted: bool,
    /// Training-set loss before and after retraining.
    pub loss_before: Option<f64>,
    pub loss_after: Option<f64>,
}

impl RefineReport {
    pub fn refined(&self) -> bool {
        !self.added.is_empty()
    }
}

/// Mutable state the refinement loop carries between iterations.
#[derive(Debug, Clone)]
pub struct SurrogateState {
    pub params: SurrogateParams,
    pub data: TrainingSet,
    pub radius: f64,
}

/// Tests the surrogate at the particle mean and, when the error exceeds
/// `tol`, grows the training set and retrains. Fewer than two new points
/// shrink the radius instead of retraining.
pub fn refine_step(
    particles: &Matrix,
    state: &mut SurrogateState,
    exact: &dyn ForwardModel,
    cfg: &RefinementConfig,
    train_cfg: &TrainConfig,
    seed: u64,
    budget: &mut EvalBudget,
) -> Result<RefineReport> {
    let x_star = design_point(particles)?;
    let ind = error_indicator(&x_star, exact, &state.params, budget)?;
    let radius = state.radius;
    let mut report = RefineReport {
        err: ind.value,
        degenerate: ind.degenerate,
        x_star,
        added: Vec::new(),
        radius,
        radius_after: radius,
        retrained: false,
        training_accepted: true,
        loss_before: None,
        loss_after: None,
    };
    if ind.value <= cfg.tol {
        return Ok(report);
    }
    let picks = select_points(particles, &report.x_star, state.data.inputs(), cfg.q, radius);
    let outputs = picks
        .iter()
        .map(|p| exact.evaluate(p))
        .collect::<Result<Vec<_>>>()?;
    budget.online += picks.len() as u64;
    for (p, y) in picks.iter().zip(&outputs) {
        state.data.push(p, y)?;
    }
    report.added = picks;
    if report.added.len() <= 1 {
        state.radius *= cfg.rho;
        report.radius_after = state.radius;
        return Ok(report);
    }
    let out = warm_start_refine(&state.params, &state.data, train_cfg, seed)?;
    report.retrained = true;
    report.training_accepted = out.accepted;
    report.loss_before = Some(out.initial_loss);
    report.loss_after = Some(out.final_loss);
    state.params = out.params;
    Ok(report)
}

/// One line of the refinement trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub err: f64,
    pub degenerate: bool,
    pub x_star: Vec<f64>,
    pub points_added: usize,
    pub added: Vec<Vec<f64>>,
    pub data_size: usize,
    pub radius: f64,
    pub radius_after: f64,
    pub retrained: bool,
    pub training_accepted: bool,
    pub loss_before: Option<f64>,
    pub loss_after: Option<f64>,
    pub online_evals: u64,
}

pub fn write_trace(path: &Path, trace: &[TraceRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for rec in trace {
        let line = serde_json::to_string(rec).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Evaluates the exact model at each design point. These are the offline
/// evaluations.
pub fn initial_design(exact: &dyn ForwardModel, points: &Matrix) -> Result<TrainingSet> {
    let outputs = points
        .iter_rows()
        .map(|p| exact.evaluate(p))
        .collect::<Result<Vec<_>>>()?;
    TrainingSet::new(points.clone(), Matrix::from_rows(&outputs)?)
}

/// Fits a fresh surrogate to `data` with input scaling from `prior` and
/// output scaling from the data.
pub fn fit_surrogate(
    arch: &Architecture,
    prior: &Prior,
    data: &TrainingSet,
    cfg: &TrainConfig,
    init_seed: u64,
    train_seed: u64,
) -> Result<SurrogateParams> {
    let init = SurrogateParams::init(arch.clone(), init_seed)?
        .with_maps(prior.input_map(), OutputMap::fit(data.outputs()))?;
    Ok(train(&init, data, cfg, train_seed)?.params)
}

/// Everything besides the particles and data that the loop needs.
pub struct LsvgdSetup<'a> {
    pub exact: &'a dyn ForwardModel,
    pub prior: Prior,
    pub likelihood: GaussianLikelihood,
    pub refinement: RefinementConfig,
    pub architecture: Architecture,
    pub offline_training: TrainConfig,
    pub refine_training: TrainConfig,
    pub adagrad: AdaGradState,
    pub init_seed: u64,
    pub train_seed: u64,
}

#[derive(Debug, Clone)]
pub struct LsvgdOutcome {
    pub particles: ParticleSet,
    pub surrogate: SurrogateParams,
    pub data: TrainingSet,
    pub budget: EvalBudget,
    pub trace: Vec<TraceRecord>,
    pub adagrad: AdaGradState,
}

/// SVGD against a locally refined surrogate. `observe` sees the particles
/// after every SVGD step.
pub fn run_lsvgd<F>(
    initial: ParticleSet,
    initial_data: TrainingSet,
    setup: &LsvgdSetup<'_>,
    mut observe: F,
) -> Result<LsvgdOutcome>
where
    F: FnMut(&ParticleSet) -> Result<()>,
{
    let cfg = &setup.refinement;
    cfg.validate()?;
    let budget0 = EvalBudget {
        online: 0,
        offline: initial_data.len() as u64,
    };
    let params = fit_surrogate(
        &setup.architecture,
        &setup.prior,
        &initial_data,
        &setup.offline_training,
        setup.init_seed,
        setup.train_seed,
    )?;
    let mut state = SurrogateState {
        params,
        data: initial_data,
        radius: cfg.radius,
    };
    let mut budget = budget0;
    let mut particles = initial;
    let mut adagrad = setup.adagrad.clone();
    let mut trace = Vec::with_capacity(cfg.i_max);
    for t in 1..=cfg.i_max {
        if !cfg.persist_adagrad {
            adagrad.reset();
        }
        let post = Posterior::new(
            setup.prior.clone(),
            setup.likelihood.clone(),
            &state.params,
        )?;
        run_svgd_with(&mut particles, &post, cfg.inner_steps, &mut adagrad, &mut observe)?;
        let seed = setup.train_seed.wrapping_add(t as u64);
        let r = refine_step(
            particles.points(),
            &mut state,
            setup.exact,
            cfg,
            &setup.refine_training,
            seed,
            &mut budget,
        )?;
        trace.push(TraceRecord {
            iteration: t,
            err: r.err,
            degenerate: r.degenerate,
            x_star: r.x_star,
            points_added: r.added.len(),
            added: r.added,
            data_size: state.data.len(),
            radius: r.radius,
            radius_after: r.radius_after,
            retrained: r.retrained,
            training_accepted: r.training_accepted,
            loss_before: r.loss_before,
            loss_after: r.loss_after,
            online_evals: budget.online,
        });
    }
    Ok(LsvgdOutcome {
        particles,
        surrogate: state.params,
        data: state.data,
        budget,
        trace,
        adagrad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::DoubleBanana;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn design_point_examples() {
        assert_eq!(design_point(&m(&[&[0.0, 0.0], &[2.0, 2.0]])).unwrap(), vec![1.0, 1.0]);
        assert_eq!(design_point(&m(&[&[0.3, -4.0]])).unwrap(), vec![0.3, -4.0]);
        assert!(design_point(&Matrix::zeros(0, 2)).is_err());
    }

    #[test]
    fn indicator_examples() {
        let i = indicator_from(vec![3.0, 4.0], &[3.0, 4.5]);
        assert!((i.value - 0.1).abs() < 1e-15 && !i.degenerate);
        assert_eq!(indicator_from(vec![3.0, 4.0], &[3.0, 4.0]).value, 0.0);
        let z = indicator_from(vec![0.0, 0.0], &[0.3, 0.4]);
        assert!(z.degenerate && (z.value - 0.5).abs() < 1e-15);
        let s = indicator_from(vec![7.5, 10.0], &[7.5, 11.25]);
        assert!((s.value - 0.1).abs() < 1e-15);
    }

    #[test]
    fn selection_examples() {
        let parts = m(&[&[0.1], &[0.15], &[1.0]]);
        let got = select_points(&parts, &[0.0], &m(&[&[-1.0]]), 2, 0.2);
        assert_eq!(got, vec![vec![0.1], vec![1.0]]);

        let lone = m(&[&[0.4, 0.4]]);
        let got = select_points(&lone, &[0.4, 0.4], &Matrix::zeros(0, 2), 5, 0.2);
        assert_eq!(got, vec![vec![0.4, 0.4]]);

        let got = select_points(&parts, &[0.0], &m(&[&[0.5]]), 5, 10.0);
        assert!(got.is_empty());
    }

    #[test]
    fn infeasible_refinement_shrinks_radius() {
        let model = DoubleBanana::new();
        let data = TrainingSet::new(m(&[&[0.0, 0.0]]), m(&[&[0.0]])).unwrap();
        let arch = Architecture::new(2, 1, vec![3]).unwrap();
        let mut state = SurrogateState {
            params: SurrogateParams::zeros(arch).unwrap(),
            data,
            radius: 5.0,
        };
        let before = state.params.clone();
        let mut budget = EvalBudget::default();
        let parts = m(&[&[0.5, 0.1], &[0.3, 0.2]]);
        let r = refine_step(
            &parts,
            &mut state,
            &model,
            &RefinementConfig::default(),
            &TrainConfig::default().with_epochs(5),
            0,
            &mut budget,
        )
        .unwrap();
        assert!(r.added.is_empty());
        assert_eq!(state.radius, 5.0 * 0.8);
        assert_eq!(state.params, before);
        assert_eq!(budget.online, 1);
        assert_eq!(model.eval_count(), 1);
    }
}
