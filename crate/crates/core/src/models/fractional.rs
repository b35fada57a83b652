//! Time-fractional diffusion on the unit square.
//!
//! Solves `D_t^a u - div(k grad u) = f` with homogeneous Neumann boundaries
//! on a vertex-centred grid of `(M+1)^2` nodes. The Caputo derivative uses
//! the L1 scheme; the spatial operator is the five-point stencil with
//! ghost-node reflection at the boundary, written in its symmetric
//! finite-volume form (half/quarter dual cells on edges/corners) so that each
//! implicit step is an SPD solve done by Jacobi-preconditioned CG.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// L1 weights `b_j = (j+1)^(1-a) - j^(1-a)` for `j = 0..k`.
pub fn caputo_l1_coefficients(alpha: f64, k: usize) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!(
            "fractional order must lie in (0, 1), got {alpha}"
        )));
    }
    let p = 1.0 - alpha;
    Ok((0..k)
        .map(|j| ((j + 1) as f64).powf(p) - (j as f64).powf(p))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalGrid {
    /// Intervals per axis; the grid has `m + 1` nodes per axis.
    pub m: usize,
    pub dt: f64,
    pub alpha: f64,
    pub final_time: f64,
}

impl FractionalGrid {
    pub fn new(m: usize, dt: f64, alpha: f64, final_time: f64) -> Result<Self> {
        let g = FractionalGrid {
            m,
            dt,
            alpha,
            final_time,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 8 {
            return Err(Error::invalid(format!("grid needs m >= 8, got {}", self.m)));
        }
        if !(self.dt > 0.0) || !(self.final_time > 0.0) {
            return Err(Error::invalid("time step and final time must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!(
                "fractional order must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        self.step_of(self.final_time)?;
        Ok(())
    }

    pub fn h(&self) -> f64 {
        1.0 / self.m as f64
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.m + 1
    }

    pub fn num_nodes(&self) -> usize {
        (self.m + 1) * (self.m + 1)
    }

    pub fn num_steps(&self) -> usize {
        (self.final_time / self.dt).round() as usize
    }

    /// Time-step index of `t`, which must be a multiple of `dt`.
    pub fn step_of(&self, t: f64) -> Result<usize> {
        let s = t / self.dt;
        let k = s.round();
        if (s - k).abs() > 1e-9 * s.abs().max(1.0) || k < 0.0 {
            return Err(Error::invalid(format!(
                "time {t} is not a multiple of the step {}",
                self.dt
            )));
        }
        Ok(k as usize)
    }

    pub fn node_coords(&self, idx: usize) -> [f64; 2] {
        let n = self.nodes_per_axis();
        let h = self.h();
        [(idx % n) as f64 * h, (idx / n) as f64 * h]
    }

    /// Trapezoidal weights: 1 inside, 1/2 on edges, 1/4 at corners.
    pub fn node_weights(&self) -> Vec<f64> {
        let n = self.nodes_per_axis();
        let edge = |i: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        (0..n * n).map(|idx| edge(idx % n) * edge(idx / n)).collect()
    }

    /// Same grid refined by `factor` in space and time.
    pub fn refined(&self, factor: usize) -> Self {
        FractionalGrid {
            m: self.m * factor,
            dt: self.dt / factor as f64,
            ..self.clone()
        }
    }
}

/// Nodal solution at every time step `0..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    pub grid: FractionalGrid,
    pub values: Vec<Vec<f64>>,
}

impl SpaceTimeField {
    pub fn at_step(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    /// Trapezoidal spatial mean at step `k`.
    pub fn spatial_mean(&self, k: usize) -> f64 {
        let w = self.grid.node_weights();
        let total: f64 = w.iter().sum();
        self.values[k].iter().zip(&w).map(|(u, w)| u * w).sum::<f64>() / total
    }
}

/// Spatial forcing profile `g(s)`; the full forcing is `e^{-t} g(s)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Forcing {
    None,
    Gaussian { center: [f64; 2], width: f64 },
}

impl Forcing {
    fn profile(&self, grid: &FractionalGrid) -> Vec<f64> {
        match self {
            Forcing::None => vec![0.0; grid.num_nodes()],
            Forcing::Gaussian { center, width } => (0..grid.num_nodes())
                .map(|idx| {
                    let s = grid.node_coords(idx);
                    let r2 = (s[0] - center[0]).powi(2) + (s[1] - center[1]).powi(2);
                    (-0.5 * r2 / (width * width)).exp()
                })
                .collect(),
        }
    }
}

/// Everything one solve needs.
#[derive(Debug, Clone)]
pub struct HeatSolve {
    pub grid: FractionalGrid,
    /// Nodal conductivity; `None` means `k = 1`.
    pub conductivity: Option<Vec<f64>>,
    pub forcing: Forcing,
    /// Nodal initial condition; `None` means zero.
    pub initial: Option<Vec<f64>>,
    pub cg_tol: f64,
}

impl HeatSolve {
    pub fn new(grid: FractionalGrid, forcing: Forcing) -> Self {
        HeatSolve {
            grid,
            conductivity: None,
            forcing,
            initial: None,
            cg_tol: 1e-10,
        }
    }
}

/// Symmetric operator `c0 W + K / h^2` with `K` the finite-volume stiffness.
struct Operator {
    n: usize,
    c0: f64,
    weights: Vec<f64>,
    // conductance of the edge from node (i,j) to (i+1,j) and (i,j+1)
    east: Vec<f64>,
    north: Vec<f64>,
    diag: Vec<f64>,
}

impl Operator {
    fn new(grid: &FractionalGrid, kappa: Option<&[f64]>, c0: f64) -> Result<Self> {
        let n = grid.nodes_per_axis();
        let inv_h2 = 1.0 / (grid.h() * grid.h());
        let k = |idx: usize| kappa.map_or(1.0, |k| k[idx]);
        let face = |a: f64, b: f64| 2.0 * a * b / (a + b);
        let edge_len = |i: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        let weights = grid.node_weights();
        let mut east = vec![0.0; n * n];
        let mut north = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                let idx = j * n + i;
                if i + 1 < n {
                    east[idx] = face(k(idx), k(idx + 1)) * edge_len(j) * inv_h2;
                }
                if j + 1 < n {
                    north[idx] = face(k(idx), k(idx + n)) * edge_len(i) * inv_h2;
                }
            }
        }
        let mut diag: Vec<f64> = weights.iter().map(|w| c0 * w).collect();
        for j in 0..n {
            for i in 0..n {
                let idx = j * n + i;
                if i + 1 < n {
                    diag[idx] += east[idx];
                    diag[idx + 1] += east[idx];
                }
                if j + 1 < n {
                    diag[idx] += north[idx];
                    diag[idx + n] += north[idx];
                }
            }
        }
        Ok(Operator {
            n,
            c0,
            weights,
            east,
            north,
            diag,
        })
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n;
        for (o, (w, v)) in out.iter_mut().zip(self.weights.iter().zip(u)) {
            *o = self.c0 * w * v;
        }
        for j in 0..n {
            for i in 0..n {
                let idx = j * n + i;
                if i + 1 < n {
                    let f = self.east[idx] * (u[idx] - u[idx + 1]);
                    out[idx] += f;
                    out[idx + 1] -= f;
                }
                if j + 1 < n {
                    let f = self.north[idx] * (u[idx] - u[idx + n]);
                    out[idx] += f;
                    out[idx + n] -= f;
                }
            }
        }
    }

    /// Jacobi-preconditioned CG; `u` holds the initial guess on entry.
    fn solve(&self, b: &[f64], u: &mut [f64], tol: f64) -> Result<()> {
        let len = b.len();
        let mut r = vec![0.0; len];
        let mut ap = vec![0.0; len];
        self.apply(u, &mut ap);
        for i in 0..len {
            r[i] = b[i] - ap[i];
        }
        let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if bnorm == 0.0 {
            u.iter_mut().for_each(|v| *v = 0.0);
            return Ok(());
        }
        let mut z: Vec<f64> = r.iter().zip(&self.diag).map(|(r, d)| r / d).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        for _ in 0..10 * len {
            let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if rnorm <= tol * bnorm {
                self.correct_mean(b, u, &mut ap);
                return Ok(());
            }
            self.apply(&p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if !(pap > 0.0) {
                return Err(Error::Numerical("CG lost positive definiteness".into()));
            }
            let a = rz / pap;
            for i in 0..len {
                u[i] += a * p[i];
                r[i] -= a * ap[i];
            }
            for i in 0..len {
                z[i] = r[i] / self.diag[i];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..len {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(Error::Numerical("CG did not converge".into()))
    }

    /// The stiffness part annihilates constants, so shifting `u` by a
    /// constant moves only the weighted-sum part of the residual. Zeroing
    /// that part makes the discrete mass balance exact up to roundoff.
    fn correct_mean(&self, b: &[f64], u: &mut [f64], scratch: &mut [f64]) {
        self.apply(u, scratch);
        let resid: f64 = b.iter().zip(scratch.iter()).map(|(b, a)| b - a).sum();
        let wsum: f64 = self.weights.iter().sum();
        let shift = resid / (self.c0 * wsum);
        u.iter_mut().for_each(|v| *v += shift);
    }
}

/// Implicit L1 time stepping from `t = 0` to `grid.final_time`.
pub fn solve(problem: &HeatSolve) -> Result<SpaceTimeField> {
    let grid = &problem.grid;
    grid.validate()?;
    let nodes = grid.num_nodes();
    if let Some(k) = &problem.conductivity {
        if k.len() != nodes {
            return Err(Error::invalid("conductivity must have one value per node"));
        }
        if let Some(bad) = k.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidCoefficient(format!(
                "conductivity {} at node {bad} is not positive",
                k[bad]
            )));
        }
    }
    let initial = match &problem.initial {
        Some(u0) if u0.len() != nodes => {
            return Err(Error::invalid("initial condition must have one value per node"))
        }
        Some(u0) => u0.clone(),
        None => vec![0.0; nodes],
    };
    let steps = grid.num_steps();
    let b = caputo_l1_coefficients(grid.alpha, steps.max(1))?;
    let c0 = grid.dt.powf(-grid.alpha) / gamma(2.0 - grid.alpha);
    let op = Operator::new(grid, problem.conductivity.as_deref(), c0)?;
    let profile = problem.forcing.profile(grid);

    let mut values = Vec::with_capacity(steps + 1);
    values.push(initial);
    // increments[k] = u^{k+1} - u^k
    let mut increments: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut rhs = vec![0.0; nodes];
    let mut hist = vec![0.0; nodes];
    for n in 1..=steps {
        // history term sum_{j=1}^{n-1} b_j (u^{n-j} - u^{n-j-1})
        hist.iter_mut().for_each(|v| *v = 0.0);
        for j in 1..n {
            let inc = &increments[n - j - 1];
            let bj = b[j];
            for (h, d) in hist.iter_mut().zip(inc) {
                *h += bj * d;
            }
        }
        let tn = n as f64 * grid.dt;
        let decay = (-tn).exp();
        let prev = &values[n - 1];
        for i in 0..nodes {
            let f = decay * profile[i];
            rhs[i] = op.weights[i] * (c0 * (prev[i] - hist[i]) + f);
        }
        let mut u = prev.clone();
        op.solve(&rhs, &mut u, problem.cg_tol)?;
        increments.push(u.iter().zip(prev).map(|(a, b)| a - b).collect());
        values.push(u);
    }
    Ok(SpaceTimeField {
        grid: grid.clone(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l1_weights() {
        for alpha in [0.1, 0.5, 0.9] {
            let b = caputo_l1_coefficients(alpha, 20).unwrap();
            assert_eq!(b[0], 1.0);
            assert!(b.windows(2).all(|w| w[1] < w[0]));
        }
        let b = caputo_l1_coefficients(0.5, 2).unwrap();
        assert!((b[1] - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!((b[1] - 0.41421).abs() < 1e-5);
        assert!(caputo_l1_coefficients(1.0, 3).is_err());
        assert!(caputo_l1_coefficients(0.0, 3).is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(FractionalGrid::new(4, 0.01, 0.5, 1.0).is_err());
        assert!(FractionalGrid::new(24, 0.0, 0.5, 1.0).is_err());
        assert!(FractionalGrid::new(24, 0.01, 1.5, 1.0).is_err());
        assert!(FractionalGrid::new(24, 0.3, 0.5, 1.0).is_err());
        let g = FractionalGrid::new(24, 0.01, 0.5, 1.0).unwrap();
        assert_eq!(g.num_steps(), 100);
        assert_eq!(g.step_of(0.25).unwrap(), 25);
        assert!(g.step_of(0.255).is_err());
        assert_eq!(g.refined(2).m, 48);
    }

    #[test]
    fn zero_forcing_gives_zero_field() {
        let g = FractionalGrid::new(8, 0.05, 0.5, 0.5).unwrap();
        let f = solve(&HeatSolve::new(g, Forcing::None)).unwrap();
        assert!(f.values.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn nonpositive_conductivity_rejected() {
        let g = FractionalGrid::new(8, 0.1, 0.5, 0.2).unwrap();
        let mut p = HeatSolve::new(g.clone(), Forcing::None);
        let mut k = vec![1.0; g.num_nodes()];
        k[10] = 0.0;
        p.conductivity = Some(k);
        assert!(matches!(solve(&p), Err(Error::InvalidCoefficient(_))));
    }

    #[test]
    fn operator_is_symmetric() {
        let g = FractionalGrid::new(8, 0.1, 0.5, 0.2).unwrap();
        let kappa: Vec<f64> = (0..g.num_nodes()).map(|i| 1.0 + (i as f64).sin().abs()).collect();
        let op = Operator::new(&g, Some(&kappa), 3.0).unwrap();
        let n = g.num_nodes();
        let mut col_i = vec![0.0; n];
        let mut col_j = vec![0.0; n];
        for (i, j) in [(0, 1), (3, 12), (40, 41), (80, 71), (9, 9 + 9)] {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            op.apply(&e, &mut col_i);
            e[i] = 0.0;
            e[j] = 1.0;
            op.apply(&e, &mut col_j);
            assert!((col_i[j] - col_j[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn mass_is_conserved_without_forcing() {
        let g = FractionalGrid::new(16, 0.01, 0.5, 0.3).unwrap();
        let u0: Vec<f64> = (0..g.num_nodes())
            .map(|i| {
                let s = g.node_coords(i);
                (-20.0 * ((s[0] - 0.3).powi(2) + (s[1] - 0.6).powi(2))).exp()
            })
            .collect();
        let mut p = HeatSolve::new(g, Forcing::None);
        p.initial = Some(u0);
        let f = solve(&p).unwrap();
        let m0 = f.spatial_mean(0);
        for k in 1..f.values.len() {
            let mk = f.spatial_mean(k);
            let prev = f.spatial_mean(k - 1);
            assert!(((mk - prev) / m0).abs() < 1e-10, "step {k}: {mk} vs {prev}");
        }
    }
}
