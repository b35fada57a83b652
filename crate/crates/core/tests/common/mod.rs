//! Independent reference implementations the library is checked against.
#![allow(dead_code)]

use lsvgd::posterior::Prior;
use lsvgd::surrogate::{Architecture, OutputMap, SurrogateParams, TrainingSet};
use lsvgd::Matrix;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Central differences of a scalar function.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], eps: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[i] += eps;
            b[i] -= eps;
            (f(&a) - f(&b)) / (2.0 * eps)
        })
        .collect()
}

/// Central-difference Jacobian of a vector function, `n x d` row-major.
pub fn fd_jacobian(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], eps: f64) -> Matrix {
    let n = f(x).len();
    let mut j = Matrix::zeros(n, x.len());
    for i in 0..x.len() {
        let mut a = x.to_vec();
        let mut b = x.to_vec();
        a[i] += eps;
        b[i] -= eps;
        let (fa, fb) = (f(&a), f(&b));
        for r in 0..n {
            j.set(r, i, (fa[r] - fb[r]) / (2.0 * eps));
        }
    }
    j
}

/// `|a - b| / max(|b|, floor)` over the whole vector.
pub fn rel_diff(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(floor)
}

/// The SVGD direction written as the plain double loop
/// `phi(x_i) = 1/N sum_j [k(x_j, x_i) s_j + grad_{x_j} k(x_j, x_i)]`.
pub fn brute_force_direction(points: &Matrix, scores: &Matrix, h: f64) -> Matrix {
    let (n, d) = points.shape();
    let mut out = Matrix::zeros(n, d);
    for i in 0..n {
        for j in 0..n {
            let mut r2 = 0.0;
            for k in 0..d {
                r2 += (points.get(j, k) - points.get(i, k)).powi(2);
            }
            let kern = (-r2 / h).exp();
            for k in 0..d {
                let grad = -2.0 / h * (points.get(j, k) - points.get(i, k)) * kern;
                let v = out.get(i, k) + kern * scores.get(j, k) + grad;
                out.set(i, k, v);
            }
        }
    }
    for i in 0..n {
        for k in 0..d {
            let v = out.get(i, k) / n as f64;
            out.set(i, k, v);
        }
    }
    out
}

/// Squared median pairwise distance over `ln n`.
pub fn brute_force_bandwidth(points: &Matrix) -> f64 {
    let n = points.rows();
    let mut d2 = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let r: f64 = points
                .row(i)
                .iter()
                .zip(points.row(j))
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            d2.push(r.sqrt());
        }
    }
    d2.sort_by(f64::total_cmp);
    let m = d2.len();
    let med = if m % 2 == 1 {
        d2[m / 2]
    } else {
        0.5 * (d2[m / 2 - 1] + d2[m / 2])
    };
    (med * med / (n as f64).ln()).max(1e-12)
}

/// Classical heat equation `u_t = lap u + e^{-t} g(s)` on the unit square
/// with zero flux walls, backward Euler in time and the mirrored-ghost
/// five-point Laplacian in space, solved with a dense LU factorization.
/// Returns the nodal solution after each step (step 0 is the zero state).
pub fn backward_euler_heat(m: usize, dt: f64, steps: usize, center: [f64; 2], width: f64) -> Vec<Vec<f64>> {
    let n = m + 1;
    let h = 1.0 / m as f64;
    let size = n * n;
    let idx = |i: usize, j: usize| j * n + i;
    let mut a = DMatrix::<f64>::zeros(size, size);
    for j in 0..n {
        for i in 0..n {
            let p = idx(i, j);
            a[(p, p)] += 1.0 / dt;
            // each axis: (u_left - 2u + u_right)/h^2 with the ghost mirrored
            for (lo, hi, nb_lo, nb_hi) in [
                (i == 0, i == m, if i > 0 { idx(i - 1, j) } else { 0 }, if i < m { idx(i + 1, j) } else { 0 }),
                (j == 0, j == m, if j > 0 { idx(i, j - 1) } else { 0 }, if j < m { idx(i, j + 1) } else { 0 }),
            ] {
                let c = 1.0 / (h * h);
                a[(p, p)] += 2.0 * c;
                match (lo, hi) {
                    (true, _) => a[(p, nb_hi)] -= 2.0 * c,
                    (_, true) => a[(p, nb_lo)] -= 2.0 * c,
                    _ => {
                        a[(p, nb_lo)] -= c;
                        a[(p, nb_hi)] -= c;
                    }
                }
            }
        }
    }
    let lu = a.lu();
    let g: Vec<f64> = (0..size)
        .map(|p| {
            let (x, y) = ((p % n) as f64 * h, (p / n) as f64 * h);
            (-0.5 * ((x - center[0]).powi(2) + (y - center[1]).powi(2)) / (width * width)).exp()
        })
        .collect();
    let mut u = DVector::<f64>::zeros(size);
    let mut out = vec![u.as_slice().to_vec()];
    for k in 1..=steps {
        let t = k as f64 * dt;
        let rhs = DVector::from_iterator(size, (0..size).map(|p| u[p] / dt + (-t).exp() * g[p]));
        u = lu.solve(&rhs).expect("nonsingular");
        out.push(u.as_slice().to_vec());
    }
    out
}

/// Trapezoid-weighted L2 norm of nodal values on an `(m+1)^2` grid.
pub fn grid_l2(v: &[f64], m: usize) -> f64 {
    let n = m + 1;
    let w = |i: usize| if i == 0 || i == m { 0.5 } else { 1.0 };
    let s: f64 = v
        .iter()
        .enumerate()
        .map(|(p, x)| w(p % n) * w(p / n) * x * x)
        .sum();
    (s / (m * m) as f64).sqrt()
}

/// Smallest distance from any of `new` to `existing` or to another of `new`.
pub fn min_separation(new: &[Vec<f64>], existing: &Matrix) -> f64 {
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    };
    let mut best = f64::INFINITY;
    for (i, p) in new.iter().enumerate() {
        for e in existing.iter_rows() {
            best = best.min(dist(p, e));
        }
        for q in &new[i + 1..] {
            best = best.min(dist(p, q));
        }
    }
    best
}

/// A small random network with standardization maps and a data set for it.
pub fn random_net(rng: &mut ChaCha8Rng) -> (SurrogateParams, TrainingSet) {
    let d = rng.random_range(1..5);
    let n_out = rng.random_range(1..4);
    let hidden: Vec<usize> = (0..rng.random_range(1..4)).map(|_| rng.random_range(2..7)).collect();
    let arch = Architecture::new(d, n_out, hidden).unwrap();
    let rows = rng.random_range(3..9);
    let x = Prior::StandardNormal { dim: d }.sample(rows, rng);
    let y = Matrix::from_vec(rows, n_out, (0..rows * n_out).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
    let data = TrainingSet::new(x, y).unwrap();
    let params = SurrogateParams::init(arch, rng.random())
        .unwrap()
        .with_maps(Prior::StandardNormal { dim: d }.input_map(), OutputMap::fit(data.outputs()))
        .unwrap();
    (params, data)
}
