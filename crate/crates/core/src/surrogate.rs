//! Multilayer perceptron emulator of a forward map.
//!
//! The network is `x -> out_map(F_{L+1}(s(F_L(... s(F_1(in_map(x)))))))`
//! where each `F_k` is affine, `s` is Swish and the output layer carries no
//! activation. `in_map` and `out_map` are fixed affine standardizations
//! stored alongside the weights; every public operation works in raw
//! (unstandardized) units.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{sq_dist, Matrix};

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn swish(z: f64) -> f64 {
    z * sigmoid(z)
}

fn swish_derivative(z: f64) -> f64 {
    let s = sigmoid(z);
    s + z * s * (1.0 - s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Swish,
    /// Linear network; used to check derivatives against products of weights.
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Swish => swish(z),
            Activation::Identity => z,
        }
    }

    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Swish => swish_derivative(z),
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub output_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Architecture {
    pub fn new(input_dim: usize, output_dim: usize, hidden: Vec<usize>) -> Result<Self> {
        let arch = Architecture {
            input_dim,
            output_dim,
            hidden,
            activation: Activation::Swish,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::invalid("network input and output dims must be >= 1"));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::invalid(
                "network needs at least one hidden layer, all widths >= 1",
            ));
        }
        Ok(())
    }

    /// Layer widths from input to output.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.input_dim);
        w.extend(&self.hidden);
        w.push(self.output_dim);
        w
    }
}

/// Per-dimension map `z = (x - shift) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputMap {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl InputMap {
    pub fn identity(dim: usize) -> Self {
        InputMap {
            shift: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }
}

/// `y = mean + scale * o`, with a single scale shared by all components so
/// that the loss stays proportional to the raw squared error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputMap {
    pub mean: Vec<f64>,
    pub scale: f64,
}

impl OutputMap {
    pub fn identity(dim: usize) -> Self {
        OutputMap {
            mean: vec![0.0; dim],
            scale: 1.0,
        }
    }

    /// Componentwise mean and the root-mean-square deviation about it.
    pub fn fit(outputs: &Matrix) -> Self {
        let (n, m) = outputs.shape();
        let mut mean = vec![0.0; m];
        for row in outputs.iter_rows() {
            for (a, v) in mean.iter_mut().zip(row) {
                *a += v;
            }
        }
        mean.iter_mut().for_each(|a| *a /= n.max(1) as f64);
        let ss: f64 = outputs.iter_rows().map(|r| sq_dist(r, &mean)).sum();
        let rms = (ss / (n * m).max(1) as f64).sqrt();
        OutputMap {
            mean,
            scale: if rms > 0.0 && rms.is_finite() { rms } else { 1.0 },
        }
    }
}

/// One affine layer; `weights` is `out x in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Layer {
            weights: Matrix::zeros(n_out, n_in),
            bias: vec![0.0; n_out],
        }
    }

    fn affine(&self, z: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (row, b) in self.weights.iter_rows().zip(&self.bias) {
            out.push(row.iter().zip(z).map(|(w, v)| w * v).sum::<f64>() + b);
        }
    }

    /// `out = W^T delta`.
    fn transpose_apply(&self, delta: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.weights.cols(), 0.0);
        for (row, d) in self.weights.iter_rows().zip(delta) {
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * d;
            }
        }
    }
}

fn params_iter(layers: &[Layer]) -> impl Iterator<Item = &f64> {
    layers
        .iter()
        .flat_map(|l| l.weights.as_slice().iter().chain(l.bias.iter()))
}

fn params_iter_mut(layers: &mut [Layer]) -> impl Iterator<Item = &mut f64> {
    layers
        .iter_mut()
        .flat_map(|l| l.weights.as_mut_slice().iter_mut().chain(l.bias.iter_mut()))
}

/// Network weights plus the architecture and standardization maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateParams {
    pub architecture: Architecture,
    pub input_map: InputMap,
    pub output_map: OutputMap,
    pub layers: Vec<Layer>,
}

/// Gradient of the loss, shaped like [`SurrogateParams::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradient {
    pub layers: Vec<Layer>,
}

impl ParamGradient {
    pub fn values(&self) -> impl Iterator<Item = &f64> {
        params_iter(&self.layers)
    }
}

struct Trace {
    // pre-activations of every hidden layer
    pre: Vec<Vec<f64>>,
    // inputs to every affine layer (standardized input first)
    acts: Vec<Vec<f64>>,
    // standardized network output
    out: Vec<f64>,
}

impl SurrogateParams {
    /// Zero-initialized parameters with identity standardization.
    pub fn zeros(architecture: Architecture) -> Result<Self> {
        architecture.validate()?;
        let widths = architecture.widths();
        let layers = widths
            .windows(2)
            .map(|w| Layer::zeros(w[0], w[1]))
            .collect();
        Ok(SurrogateParams {
            input_map: InputMap::identity(architecture.input_dim),
            output_map: OutputMap::identity(architecture.output_dim),
            architecture,
            layers,
        })
    }

    /// He-style initialization: weights `N(0, 2 / fan_in)`, biases zero.
    pub fn init(architecture: Architecture, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(architecture)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut p.layers {
            let fan_in = layer.weights.cols() as f64;
            let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("positive std");
            for w in layer.weights.as_mut_slice() {
                *w = normal.sample(&mut rng);
            }
        }
        Ok(p)
    }

    pub fn with_maps(mut self, input_map: InputMap, output_map: OutputMap) -> Result<Self> {
        if input_map.shift.len() != self.architecture.input_dim
            || input_map.scale.len() != self.architecture.input_dim
        {
            return Err(Error::invalid("input map does not match the input dimension"));
        }
        if input_map.scale.iter().any(|s| !(*s > 0.0)) || !(output_map.scale > 0.0) {
            return Err(Error::invalid("standardization scales must be positive"));
        }
        if output_map.mean.len() != self.architecture.output_dim {
            return Err(Error::invalid("output map does not match the output dimension"));
        }
        self.input_map = input_map;
        self.output_map = output_map;
        Ok(self)
    }

    pub fn input_dim(&self) -> usize {
        self.architecture.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.architecture.output_dim
    }

    pub fn num_params(&self) -> usize {
        params_iter(&self.layers).count()
    }

    /// Sum of squares of every weight and bias.
    pub fn sq_norm(&self) -> f64 {
        params_iter(&self.layers).map(|v| v * v).sum()
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        params_iter(&self.layers)
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        params_iter_mut(&mut self.layers)
    }

    /// Checks that the stored layers chain according to the architecture.
    pub fn validate(&self) -> Result<()> {
        self.architecture.validate()?;
        let widths = self.architecture.widths();
        if self.layers.len() != widths.len() - 1 {
            return Err(Error::invalid(format!(
                "expected {} layers, found {}",
                widths.len() - 1,
                self.layers.len()
            )));
        }
        for (k, (layer, w)) in self.layers.iter().zip(widths.windows(2)).enumerate() {
            if layer.weights.shape() != (w[1], w[0]) || layer.bias.len() != w[1] {
                return Err(Error::invalid(format!(
                    "layer {k} has weights {:?} and bias {}, expected ({}, {}) and {}",
                    layer.weights.shape(),
                    layer.bias.len(),
                    w[1],
                    w[0],
                    w[1]
                )));
            }
        }
        if self.input_map.shift.len() != widths[0]
            || self.input_map.scale.len() != widths[0]
            || self.output_map.mean.len() != self.architecture.output_dim
        {
            return Err(Error::invalid("standardization maps do not match the architecture"));
        }
        if !params_iter(&self.layers).all(|v| v.is_finite()) {
            return Err(Error::invalid("network parameters must be finite"));
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.architecture.input_dim {
            return Err(Error::invalid(format!(
                "surrogate expects input of dimension {}, got {}",
                self.architecture.input_dim,
                x.len()
            )));
        }
        Ok(())
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.input_map.shift)
            .zip(&self.input_map.scale)
            .map(|((v, s), c)| (v - s) / c)
            .collect()
    }

    fn run(&self, x: &[f64]) -> Trace {
        let act = self.architecture.activation;
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        acts.push(self.standardize(x));
        let mut buf = Vec::new();
        for layer in &self.layers[..last] {
            layer.affine(acts.last().expect("non-empty"), &mut buf);
            acts.push(buf.iter().map(|&a| act.apply(a)).collect());
            pre.push(std::mem::take(&mut buf));
        }
        let mut out = Vec::new();
        self.layers[last].affine(acts.last().expect("non-empty"), &mut out);
        Trace { pre, acts, out }
    }

    fn destandardize(&self, out: &[f64]) -> Vec<f64> {
        let m = &self.output_map;
        out.iter().zip(&m.mean).map(|(o, mu)| mu + m.scale * o).collect()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.validate_cheap()?;
        self.check_input(x)?;
        Ok(self.destandardize(&self.run(x).out))
    }

    fn validate_cheap(&self) -> Result<()> {
        if self.layers.len() != self.architecture.hidden.len() + 1 {
            return self.validate();
        }
        Ok(())
    }

    /// Back-propagates `delta` (gradient w.r.t. the standardized output)
    /// through the stored trace. Accumulates parameter gradients into `grad`
    /// when given and returns the gradient w.r.t. the standardized input.
    fn backward(&self, trace: &Trace, delta: Vec<f64>, mut grad: Option<&mut [Layer]>) -> Vec<f64> {
        let act = self.architecture.activation;
        let mut delta = delta;
        let mut next = Vec::new();
        for k in (0..self.layers.len()).rev() {
            let input = &trace.acts[k];
            if let Some(g) = grad.as_deref_mut() {
                let gl = &mut g[k];
                for (i, d) in delta.iter().enumerate() {
                    for (w, z) in gl.weights.row_mut(i).iter_mut().zip(input) {
                        *w += d * z;
                    }
                    gl.bias[i] += d;
                }
            }
            self.layers[k].transpose_apply(&delta, &mut next);
            if k > 0 {
                for (n, a) in next.iter_mut().zip(&trace.pre[k - 1]) {
                    *n *= act.derivative(*a);
                }
            }
            std::mem::swap(&mut delta, &mut next);
        }
        delta
    }

    /// Forward value and the vector-Jacobian product `J(x)^T v`, both in raw
    /// units, from a single reverse pass.
    pub fn forward_vjp(&self, x: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.forward_pullback(x, |_| v.to_vec())
    }

    /// Like [`forward_vjp`](Self::forward_vjp) but the cotangent is computed
    /// from the forward value.
    pub fn forward_pullback<F>(&self, x: &[f64], cotangent: F) -> Result<(Vec<f64>, Vec<f64>)>
    where
        F: FnOnce(&[f64]) -> Vec<f64>,
    {
        self.validate_cheap()?;
        self.check_input(x)?;
        let trace = self.run(x);
        let y = self.destandardize(&trace.out);
        let v = cotangent(&y);
        if v.len() != self.architecture.output_dim {
            return Err(Error::invalid("cotangent length does not match output dim"));
        }
        let s = self.output_map.scale;
        let delta = v.iter().map(|vi| vi * s).collect();
        let gz = self.backward(&trace, delta, None);
        let gx = gz
            .iter()
            .zip(&self.input_map.scale)
            .map(|(g, c)| g / c)
            .collect();
        Ok((y, gx))
    }

    /// `J[i][j] = d f_i / d x_j`, by forward-mode propagation of all input
    /// tangents at once.
    pub fn input_jacobian(&self, x: &[f64]) -> Result<Matrix> {
        self.validate_cheap()?;
        self.check_input(x)?;
        let trace = self.run(x);
        let d = self.architecture.input_dim;
        let act = self.architecture.activation;
        // tangent[j] = d z / d x_j for the current layer input z
        let mut tangents: Vec<Vec<f64>> = (0..d)
            .map(|j| {
                let mut t = vec![0.0; d];
                t[j] = 1.0 / self.input_map.scale[j];
                t
            })
            .collect();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            for t in tangents.iter_mut() {
                let mut nt: Vec<f64> = layer
                    .weights
                    .iter_rows()
                    .map(|row| row.iter().zip(t.iter()).map(|(w, v)| w * v).sum())
                    .collect();
                if k < last {
                    for (v, a) in nt.iter_mut().zip(&trace.pre[k]) {
                        *v *= act.derivative(*a);
                    }
                }
                *t = nt;
            }
        }
        let n = self.architecture.output_dim;
        let s = self.output_map.scale;
        let mut jac = Matrix::zeros(n, d);
        for (j, t) in tangents.iter().enumerate() {
            for i in 0..n {
                jac.set(i, j, s * t[i]);
            }
        }
        Ok(jac)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Json {
            path: path.to_owned(),
            source: e,
        })?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let p: SurrogateParams = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_owned(),
            source: e,
        })?;
        p.validate()?;
        Ok(p)
    }
}

/// Input/output pairs the surrogate is fitted to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    inputs: Matrix,
    outputs: Matrix,
}

/// Inputs closer than this are treated as duplicates.
const DUPLICATE_TOL: f64 = 1e-12;

impl TrainingSet {
    pub fn new(inputs: Matrix, outputs: Matrix) -> Result<Self> {
        if inputs.rows() != outputs.rows() {
            return Err(Error::invalid(format!(
                "{} inputs but {} outputs",
                inputs.rows(),
                outputs.rows()
            )));
        }
        if inputs.rows() == 0 {
            return Err(Error::invalid("training set must be non-empty"));
        }
        let mut set = TrainingSet {
            inputs: Matrix::zeros(0, inputs.cols()),
            outputs: Matrix::zeros(0, outputs.cols()),
        };
        for (x, y) in inputs.iter_rows().zip(outputs.iter_rows()) {
            set.push(x, y)?;
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.rows() == 0
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn outputs(&self) -> &Matrix {
        &self.outputs
    }

    pub fn push(&mut self, x: &[f64], y: &[f64]) -> Result<()> {
        if self.inputs.rows() > 0 && (x.len() != self.inputs.cols() || y.len() != self.outputs.cols())
        {
            return Err(Error::invalid("training pair dimensions do not match the set"));
        }
        if self
            .inputs
            .iter_rows()
            .any(|r| sq_dist(r, x).sqrt() <= DUPLICATE_TOL)
        {
            return Err(Error::invalid("duplicate training input"));
        }
        self.inputs.push_row(x)?;
        self.outputs.push_row(y)?;
        Ok(())
    }
}

/// Mean squared residual (in standardized output units) plus `beta |theta|^2`.
///
/// With identity output standardization this is
/// `(1/n_t) sum_i |y_i - f(x_i)|^2 + beta |theta|^2`.
pub fn loss(params: &SurrogateParams, data: &TrainingSet, beta: f64) -> Result<f64> {
    check_data(params, data)?;
    let inv_s = 1.0 / params.output_map.scale;
    let mut total = 0.0;
    for (x, y) in data.inputs.iter_rows().zip(data.outputs.iter_rows()) {
        let f = params.destandardize(&params.run(x).out);
        total += f
            .iter()
            .zip(y)
            .map(|(a, b)| ((a - b) * inv_s).powi(2))
            .sum::<f64>();
    }
    Ok(total / data.len() as f64 + beta * params.sq_norm())
}

fn check_data(params: &SurrogateParams, data: &TrainingSet) -> Result<()> {
    params.validate_cheap()?;
    if data.is_empty() {
        return Err(Error::invalid("training set must be non-empty"));
    }
    if data.inputs.cols() != params.input_dim() || data.outputs.cols() != params.output_dim() {
        return Err(Error::invalid(format!(
            "training data is {}->{}, network is {}->{}",
            data.inputs.cols(),
            data.outputs.cols(),
            params.input_dim(),
            params.output_dim()
        )));
    }
    Ok(())
}

fn zero_grad(params: &SurrogateParams) -> Vec<Layer> {
    params
        .layers
        .iter()
        .map(|l| Layer::zeros(l.weights.cols(), l.weights.rows()))
        .collect()
}

/// Loss and its gradient over the rows in `batch`.
fn batch_loss_grad(
    params: &SurrogateParams,
    data: &TrainingSet,
    batch: &[usize],
    beta: f64,
    grad: &mut [Layer],
) -> f64 {
    for g in params_iter_mut(grad) {
        *g = 0.0;
    }
    let inv_s = 1.0 / params.output_map.scale;
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for &i in batch {
        let x = data.inputs.row(i);
        let y = data.outputs.row(i);
        let trace = params.run(x);
        // residual in standardized units: o - (y - mean) / s
        let delta: Vec<f64> = trace
            .out
            .iter()
            .zip(y)
            .zip(&params.output_map.mean)
            .map(|((o, yi), mu)| o - (yi - mu) * inv_s)
            .collect();
        total += delta.iter().map(|r| r * r).sum::<f64>();
        let delta = delta.iter().map(|r| 2.0 * scale * r).collect();
        params.backward(&trace, delta, Some(grad));
    }
    for (g, p) in params_iter_mut(grad).zip(params_iter(&params.layers)) {
        *g += 2.0 * beta * p;
    }
    total * scale + beta * params.sq_norm()
}

/// Exact gradient of [`loss`] by reverse-mode accumulation.
pub fn param_gradient(params: &SurrogateParams, data: &TrainingSet, beta: f64) -> Result<ParamGradient> {
    check_data(params, data)?;
    let mut grad = zero_grad(params);
    let all: Vec<usize> = (0..data.len()).collect();
    batch_loss_grad(params, data, &all, beta, &mut grad);
    Ok(ParamGradient { layers: grad })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Training sets up to this size are processed full-batch.
    pub full_batch_up_to: usize,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    /// Stop as soon as the full-set loss reaches this value.
    #[serde(default)]
    pub target_loss: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 5e-4,
            beta: 1e-6,
            epochs: 5000,
            batch_size: 32,
            full_batch_up_to: 64,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            target_loss: None,
        }
    }
}

impl TrainConfig {
    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    fn effective_batch(&self, n: usize) -> usize {
        if n <= self.full_batch_up_to {
            n
        } else {
            self.batch_size.clamp(1, n)
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: SurrogateParams,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub epochs_run: usize,
    /// False when training ended above the initial loss and the initial
    /// parameters were returned instead. `final_loss` is then the rejected
    /// value.
    pub accepted: bool,
}

/// Minibatch Adam on [`loss`]. Never returns parameters with a higher
/// full-set loss than `init`.
pub fn train(
    init: &SurrogateParams,
    data: &TrainingSet,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    check_data(init, data)?;
    let initial_loss = loss(init, data, cfg.beta)?;
    let mut params = init.clone();
    let n = data.len();
    let batch = cfg.effective_batch(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grad = zero_grad(&params);
    let mut m = zero_grad(&params);
    let mut v = zero_grad(&params);
    let (b1, b2) = cfg.adam_betas;
    let (mut b1t, mut b2t) = (1.0, 1.0);
    let mut epochs_run = 0;
    let mut best = (params.clone(), f64::INFINITY);

    let reached = |p: &SurrogateParams| -> Result<bool> {
        Ok(match cfg.target_loss {
            Some(t) => loss(p, data, cfg.beta)? <= t,
            None => false,
        })
    };

    if !reached(&params)? {
        for _ in 0..cfg.epochs {
            if batch < n {
                order.shuffle(&mut rng);
            }
            for chunk in order.chunks(batch) {
                batch_loss_grad(&params, data, chunk, cfg.beta, &mut grad);
                b1t *= b1;
                b2t *= b2;
                let lr = cfg.learning_rate;
                for (((p, g), mi), vi) in params_iter_mut(&mut params.layers)
                    .zip(params_iter(&grad))
                    .zip(params_iter_mut(&mut m))
                    .zip(params_iter_mut(&mut v))
                {
                    *mi = b1 * *mi + (1.0 - b1) * g;
                    *vi = b2 * *vi + (1.0 - b2) * g * g;
                    let mhat = *mi / (1.0 - b1t);
                    let vhat = *vi / (1.0 - b2t);
                    *p -= lr * mhat / (vhat.sqrt() + cfg.adam_eps);
                }
            }
            epochs_run += 1;
            let l = loss(&params, data, cfg.beta)?;
            if l.is_finite() && l < best.1 {
                best = (params.clone(), l);
            }
            if cfg.target_loss.is_some_and(|t| l <= t) {
                break;
            }
        }
    }

    // the lowest full-set loss seen along the way wins
    let (params, final_loss) = if epochs_run > 0 { best } else { (params, initial_loss) };
    if final_loss.is_finite() && final_loss <= initial_loss {
        Ok(TrainOutcome {
            params,
            initial_loss,
            final_loss,
            epochs_run,
            accepted: true,
        })
    } else {
        Ok(TrainOutcome {
            params: init.clone(),
            initial_loss,
            final_loss,
            epochs_run,
            accepted: false,
        })
    }
}

/// Retrains starting from an already fitted network.
pub fn warm_start_refine(
    pretrained: &SurrogateParams,
    data: &TrainingSet,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    train(pretrained, data, cfg, seed)
}
