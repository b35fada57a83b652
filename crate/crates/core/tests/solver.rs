mod common;

use common::{backward_euler_heat, grid_l2};
use lsvgd::models::fractional::{solve, Forcing, FractionalGrid, HeatSolve};

const CENTER: [f64; 2] = [0.3, 0.6];

fn fractional(m: usize, dt: f64, alpha: f64, t: f64) -> Vec<Vec<f64>> {
    let grid = FractionalGrid::new(m, dt, alpha, t).unwrap();
    let forcing = Forcing::Gaussian {
        center: CENTER,
        width: 0.1,
    };
    solve(&HeatSolve::new(grid, forcing)).unwrap().values
}

#[test]
fn near_unit_order_matches_backward_euler() {
    let (m, dt) = (24, 0.01);
    let ours = fractional(m, dt, 0.999, 1.0);
    let oracle = backward_euler_heat(m, dt, 100, CENTER, 0.1);
    let mut worst: f64 = 0.0;
    for k in 1..=100 {
        let diff: Vec<f64> = ours[k].iter().zip(&oracle[k]).map(|(a, b)| a - b).collect();
        worst = worst.max(grid_l2(&diff, m) / grid_l2(&oracle[k], m));
    }
    assert!(worst < 1e-2, "relative L2 gap {worst}");
}

/// Values of a field on the nodes of the coarse `m0` grid.
fn restrict(v: &[f64], m: usize, m0: usize) -> Vec<f64> {
    let n = m + 1;
    let r = m / m0;
    (0..(m0 + 1) * (m0 + 1))
        .map(|p| {
            let (i, j) = (p % (m0 + 1), p / (m0 + 1));
            v[j * r * n + i * r]
        })
        .collect()
}

#[test]
fn spatial_refinement_converges_monotonically() {
    let t = 0.25;
    let fields: Vec<Vec<f64>> = [16, 32, 64]
        .iter()
        .map(|&m| restrict(fractional(m, 0.01, 0.5, t).last().unwrap(), m, 16))
        .collect();
    let change = |a: &[f64], b: &[f64]| {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        grid_l2(&d, 16)
    };
    let c1 = change(&fields[0], &fields[1]);
    let c2 = change(&fields[1], &fields[2]);
    assert!(c2 < c1, "changes {c1} then {c2}");
    // second order in space: roughly a factor 4 per halving
    assert!(c2 < 0.5 * c1);
}

#[test]
fn zero_flux_walls_conserve_the_mean() {
    let grid = FractionalGrid::new(24, 0.01, 0.5, 0.5).unwrap();
    let initial: Vec<f64> = (0..grid.num_nodes())
        .map(|p| {
            let s = grid.node_coords(p);
            1.0 + (std::f64::consts::PI * s[0]).cos() * (2.0 * std::f64::consts::PI * s[1]).cos()
                + 0.3 * s[0] * s[1]
        })
        .collect();
    let mut problem = HeatSolve::new(grid, Forcing::None);
    problem.initial = Some(initial);
    let field = solve(&problem).unwrap();
    let m0 = field.spatial_mean(0);
    for k in 1..field.values.len() {
        let prev = field.spatial_mean(k - 1);
        let now = field.spatial_mean(k);
        assert!(((now - prev) / m0).abs() < 1e-10, "step {k}: {prev} -> {now}");
    }
    // the solution actually diffuses
    let spread = |v: &[f64]| v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread(field.values.last().unwrap()) < 0.5 * spread(&field.values[0]));
}
