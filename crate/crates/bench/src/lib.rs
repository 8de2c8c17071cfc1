//! Fixtures shared by the benchmarks.

use std::f64::consts::TAU;

use genesol_core::energy::ConvexElasticModel;
use genesol_core::integrator::{manufactured_linear_solution, ElasticState, Integrator, Trajectory};
use genesol_core::torus::{Rank, TorusField, TorusGrid};

/// Smooth two-mode state on a `dim`-dimensional grid of `n` cells per axis.
pub fn smooth_state(dim: usize, n: usize) -> ElasticState {
    let grid = TorusGrid::uniform(dim, n, 1.0).expect("valid grid");
    let v = TorusField::from_fn(grid, Rank::Vector, |x, o| {
        for (c, oc) in o.iter_mut().enumerate() {
            *oc = 0.3 * (TAU * x[c % dim] + c as f64).sin();
        }
    })
    .expect("vector field");
    let f = TorusField::from_fn(grid, Rank::Matrix, |x, o| {
        for (c, oc) in o.iter_mut().enumerate() {
            let diag = if c % (dim + 1) == 0 { 1.0 } else { 0.0 };
            *oc = diag + 0.1 * (TAU * x[c % dim] + 0.7 * c as f64).cos();
        }
    })
    .expect("matrix field");
    ElasticState::new(v, f, 0.0).expect("consistent state")
}

/// Inviscid run of the linear manufactured solution with `dt = 0.5 / n`.
pub fn manufactured_trajectory(n: usize, steps: usize) -> (ConvexElasticModel, Trajectory) {
    let grid = TorusGrid::uniform(1, n, 1.0).expect("valid grid");
    let model = ConvexElasticModel::quadratic(1).expect("model");
    let init = manufactured_linear_solution(&grid, 0.0, 0.5).expect("initial data");
    let traj = Integrator::new(model.clone(), 0.0)
        .expect("integrator")
        .simulate(&init, 0.5 / n as f64, steps)
        .expect("simulation");
    (model, traj)
}
