//! Energy-conserving implicit integration of `v_t = div DG(F)`, `F_t = ∇v`
//! on the torus with an optional viscous term `ν Δv`.
//!
//! One step solves for `v⁺` with `F⁺ = F + dt ∇v_mid`, `v_mid = (v + v⁺)/2`:
//!
//! ```text
//! v⁺ − v = dt div D̄G(F, F⁺) + ν dt div ∇v_mid
//! ```
//!
//! where `D̄G` is the midpoint discrete gradient. Because the central
//! divergence is minus the adjoint of the central gradient, the discrete
//! energy changes by exactly `−ν dt ∫|∇v_mid|²` up to the Newton residual.

use log::warn;
use rayon::prelude::*;

use crate::energy::ConvexElasticModel;
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::torus::{divergence, gradient, Rank, TorusField, TorusGrid};

/// Residual (max norm) the Newton iteration aims for.
pub const NEWTON_TARGET: f64 = 1e-13;
/// Residual above which a step is reported as failed.
pub const NEWTON_FAILURE: f64 = 1e-11;
pub const NEWTON_MAX_ITERATIONS: usize = 50;

/// Below this `|ΔF|` the discrete gradient reduces to `DG(F_mid)`.
const DROP_CORRECTION: f64 = 1e-14;
/// Relative `|ΔF|` below which the correction numerator is integrated by
/// quadrature instead of differenced.
const QUADRATURE_SWITCH: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct ElasticState {
    pub v: TorusField,
    pub f: TorusField,
    pub t: f64,
}

impl ElasticState {
    pub fn new(v: TorusField, f: TorusField, t: f64) -> Result<Self> {
        if v.rank() != Rank::Vector || f.rank() != Rank::Matrix {
            return Err(Error::Shape("state needs a vector velocity and a matrix deformation gradient".into()));
        }
        if !v.grid().same_shape(f.grid()) {
            return Err(Error::Shape("velocity and deformation gradient live on different grids".into()));
        }
        if !t.is_finite() {
            return Err(Error::Evaluation("state time is not finite".into()));
        }
        Ok(Self { v, f, t })
    }

    pub fn grid(&self) -> &TorusGrid {
        self.v.grid()
    }

    /// `v = 0`, `F` constant.
    pub fn uniform(grid: TorusGrid, f: &[f64]) -> Result<Self> {
        Self::new(TorusField::zeros(grid, Rank::Vector), TorusField::constant(grid, Rank::Matrix, f)?, 0.0)
    }
}

/// What happens when the requested step exceeds `2h/√M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapPolicy {
    /// Split the step into equal substeps below the cap and log a warning.
    Clamp,
    /// Fail with [`Error::StabilityCap`].
    Reject,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Integrator {
    pub model: ConvexElasticModel,
    pub viscosity: f64,
    pub cap_policy: CapPolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: ElasticState,
    /// `ν dt ∫|∇v_mid|²` summed over substeps.
    pub dissipation: f64,
    pub newton_iterations: usize,
    pub residual: f64,
    pub substeps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<ElasticState>,
    /// Auxiliary energy per node.
    pub energy: Vec<f64>,
    pub dt: f64,
    /// Cumulative dissipation per node, starting at zero.
    pub dissipation: Vec<f64>,
}

/// `2 h_min / √M`.
pub fn stability_cap(model: &ConvexElasticModel, grid: &TorusGrid) -> f64 {
    2.0 * grid.min_spacing() / model.bounds().1.sqrt()
}

/// Midpoint discrete gradient of `G` between `a` and `b`.
pub fn discrete_gradient(model: &ConvexElasticModel, a: &[f64], b: &[f64], out: &mut [f64]) {
    let n = a.len();
    let mut mid = [0.0; 9];
    let mut delta = [0.0; 9];
    for k in 0..n {
        mid[k] = 0.5 * (a[k] + b[k]);
        delta[k] = b[k] - a[k];
    }
    let (mid, delta) = (&mid[..n], &delta[..n]);
    model.stress_into(mid, out);
    let d2 = dot(delta, delta);
    let dn = d2.sqrt();
    if dn <= DROP_CORRECTION {
        return;
    }
    let numerator = if dn > QUADRATURE_SWITCH * (1.0 + dot(mid, mid).sqrt()) {
        model.energy(b) - model.energy(a) - dot(out, delta)
    } else {
        // ∫_{-1/2}^{1/2} (DG(mid + sΔ) − DG(mid)) : Δ ds by 4-point Gauss–Legendre.
        const NODES: [f64; 2] = [0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
        const WEIGHTS: [f64; 2] = [0.652_145_154_862_546_1, 0.347_854_845_137_453_9];
        let mut x = [0.0; 9];
        let mut g = [0.0; 9];
        let mut s = 0.0;
        for (node, w) in NODES.iter().zip(WEIGHTS) {
            for sign in [-1.0, 1.0] {
                let tau = 0.5 * sign * node;
                for k in 0..n {
                    x[k] = mid[k] + tau * delta[k];
                }
                model.stress_into(&x[..n], &mut g[..n]);
                let pair: f64 = (0..n).map(|k| (g[k] - out[k]) * delta[k]).sum();
                s += 0.5 * w * pair;
            }
        }
        s
    };
    let c = numerator / d2;
    for k in 0..n {
        out[k] += c * delta[k];
    }
}

impl Integrator {
    pub fn new(model: ConvexElasticModel, viscosity: f64) -> Result<Self> {
        if !(viscosity.is_finite() && viscosity >= 0.0) {
            return Err(Error::Parameter(format!("viscosity must be non-negative, got {viscosity}")));
        }
        Ok(Self { model, viscosity, cap_policy: CapPolicy::Clamp })
    }

    pub fn with_cap_policy(mut self, policy: CapPolicy) -> Self {
        self.cap_policy = policy;
        self
    }

    fn check_state(&self, s: &ElasticState) -> Result<()> {
        if s.grid().dim() != self.model.dim() {
            return Err(Error::Dimension(format!(
                "model is {}-dimensional, state grid is {}-dimensional",
                self.model.dim(),
                s.grid().dim()
            )));
        }
        Ok(())
    }

    /// Advances `s` by `dt`. Negative steps are accepted for inviscid runs
    /// (time reversal); with viscosity they are rejected.
    pub fn step(&self, s: &ElasticState, dt: f64) -> Result<StepOutcome> {
        self.check_state(s)?;
        if !dt.is_finite() || dt == 0.0 {
            return Err(Error::Parameter(format!("time step must be finite and non-zero, got {dt}")));
        }
        if dt < 0.0 && self.viscosity > 0.0 {
            return Err(Error::Parameter("negative time steps are only allowed without viscosity".into()));
        }
        let cap = stability_cap(&self.model, s.grid());
        let substeps = if dt.abs() > cap {
            match self.cap_policy {
                CapPolicy::Reject => return Err(Error::StabilityCap { dt, cap }),
                CapPolicy::Clamp => {
                    let n = (dt.abs() / cap).ceil() as usize;
                    warn!("time step {dt:e} exceeds the stability cap {cap:e}; using {n} substeps");
                    n
                }
            }
        } else {
            1
        };
        let h = dt / substeps as f64;
        let mut state = s.clone();
        let mut dissipation = 0.0;
        let mut iterations = 0;
        let mut residual: f64 = 0.0;
        for _ in 0..substeps {
            let (next, diss, it, res) = self.single_step(&state, h)?;
            state = next;
            dissipation += diss;
            iterations += it;
            residual = residual.max(res);
        }
        state.t = s.t + dt;
        Ok(StepOutcome { state, dissipation, newton_iterations: iterations, residual, substeps })
    }

    fn single_step(&self, s: &ElasticState, dt: f64) -> Result<(ElasticState, f64, usize, f64)> {
        let grid = *s.grid();
        let nu = self.viscosity;
        // Explicit predictor.
        let mut vp = s.v.axpy(dt, &divergence(&self.model.stress_field(&s.f)?)?)?;
        let mut iterations = 0;
        let (mut f_new, mut r) = self.residual(s, &vp, dt)?;
        let mut rnorm = r.max_abs();
        let mut best = rnorm;
        while rnorm > NEWTON_TARGET && iterations < NEWTON_MAX_ITERATIONS {
            let f_mid = s.f.add(&f_new)?.scale(0.5);
            let delta = self.solve_linearized(&f_mid, &r.scale(-1.0), dt)?;
            vp = vp.add(&delta)?;
            iterations += 1;
            let (fn2, r2) = self.residual(s, &vp, dt)?;
            f_new = fn2;
            r = r2;
            let prev = rnorm;
            rnorm = r.max_abs();
            best = best.min(rnorm);
            // Stop once rounding dominates and further iterations stall.
            if rnorm <= NEWTON_FAILURE && rnorm >= 0.5 * prev {
                break;
            }
        }
        if !(rnorm <= NEWTON_FAILURE) {
            return Err(Error::NonConvergence { iterations, residual: best });
        }
        let v_mid = s.v.add(&vp)?.scale(0.5);
        let gv = gradient(&v_mid)?;
        let dissipation = nu * dt * dot(gv.values(), gv.values()) * grid.cell_volume();
        Ok((ElasticState { v: vp, f: f_new, t: s.t + dt }, dissipation, iterations, rnorm))
    }

    /// Returns `F⁺` and the residual `v⁺ − v − dt div D̄G − ν dt div ∇v_mid`.
    fn residual(&self, s: &ElasticState, vp: &TorusField, dt: f64) -> Result<(TorusField, TorusField)> {
        let v_mid = s.v.add(vp)?.scale(0.5);
        let gv = gradient(&v_mid)?;
        let f_new = s.f.axpy(dt, &gv)?;
        let dg = self.discrete_gradient_field(&s.f, &f_new)?;
        let mut r = vp.sub(&s.v)?.axpy(-dt, &divergence(&dg)?)?;
        if self.viscosity > 0.0 {
            r = r.axpy(-self.viscosity * dt, &divergence(&gv)?)?;
        }
        Ok((f_new, r))
    }

    pub fn discrete_gradient_field(&self, a: &TorusField, b: &TorusField) -> Result<TorusField> {
        let grid = *a.grid();
        let n = a.components();
        let cells = grid.cells();
        let per_cell: Vec<[f64; 9]> = (0..cells)
            .into_par_iter()
            .map(|cell| {
                let mut x = [0.0; 9];
                let mut y = [0.0; 9];
                let mut o = [0.0; 9];
                a.read_cell(cell, &mut x[..n]);
                b.read_cell(cell, &mut y[..n]);
                discrete_gradient(&self.model, &x[..n], &y[..n], &mut o[..n]);
                o
            })
            .collect();
        TorusField::from_cells(grid, Rank::Matrix, per_cell.iter().map(|c| &c[..n]))
    }

    /// Conjugate gradients on `δ + (dt²/4) ∇ᵀ H(F_mid) ∇δ + (ν dt/2) ∇ᵀ∇δ = rhs`.
    fn solve_linearized(&self, f_mid: &TorusField, rhs: &TorusField, dt: f64) -> Result<TorusField> {
        let apply = |x: &TorusField| -> Result<TorusField> {
            let g = gradient(x)?;
            let mut buf_a = [0.0; 9];
            let mut buf_x = [0.0; 9];
            let n = g.components();
            let hg = g.map_cells(Rank::Matrix, |cell, gx, out| {
                f_mid.read_cell(cell, &mut buf_a[..n]);
                buf_x[..n].copy_from_slice(gx);
                self.model.hessian_apply(&buf_a[..n], &buf_x[..n], out);
            })?;
            let mut y = x.axpy(-0.25 * dt * dt, &divergence(&hg)?)?;
            if self.viscosity > 0.0 {
                y = y.axpy(-0.5 * self.viscosity * dt, &divergence(&g)?)?;
            }
            Ok(y)
        };
        let bnorm = dot(rhs.values(), rhs.values()).sqrt();
        let mut x = TorusField::zeros(*rhs.grid(), Rank::Vector);
        if bnorm == 0.0 {
            return Ok(x);
        }
        let mut r = rhs.clone();
        let mut p = r.clone();
        let mut rr = dot(r.values(), r.values());
        let max_iter = 20 * rhs.values().len().max(10);
        for _ in 0..max_iter {
            if rr.sqrt() <= 1e-15 * bnorm {
                break;
            }
            let ap = apply(&p)?;
            let alpha = rr / dot(p.values(), ap.values());
            x = x.axpy(alpha, &p)?;
            r = r.axpy(-alpha, &ap)?;
            let rr_new = dot(r.values(), r.values());
            p = r.axpy(rr_new / rr, &p)?;
            rr = rr_new;
        }
        Ok(x)
    }

    /// Runs `steps` steps from `initial`.
    pub fn simulate(&self, initial: &ElasticState, dt: f64, steps: usize) -> Result<Trajectory> {
        if steps == 0 {
            return Err(Error::Parameter("steps must be at least 1".into()));
        }
        let e0 = self.model.total_energy(&initial.v, &initial.f)?;
        let mut states = Vec::with_capacity(steps + 1);
        let mut energy = Vec::with_capacity(steps + 1);
        let mut dissipation = Vec::with_capacity(steps + 1);
        states.push(initial.clone());
        energy.push(e0);
        dissipation.push(0.0);
        let mut cumulative = 0.0;
        for n in 0..steps {
            let out = self
                .step(&states[n], dt)
                .map_err(|e| Error::Step { step: n, source: Box::new(e) })?;
            cumulative += out.dissipation;
            // Node times are exact multiples of dt so trajectories replay identically.
            let mut state = out.state;
            state.t = initial.t + (n + 1) as f64 * dt;
            states.push(state);
            energy.push(e0 - cumulative);
            dissipation.push(cumulative);
        }
        Ok(Trajectory { states, energy, dt, dissipation })
    }
}

/// One step with the default (clamping) policy.
pub fn step(model: &ConvexElasticModel, s: &ElasticState, dt: f64, viscosity: f64) -> Result<ElasticState> {
    Ok(Integrator::new(model.clone(), viscosity)?.step(s, dt)?.state)
}

pub fn simulate(
    model: &ConvexElasticModel,
    initial: &ElasticState,
    dt: f64,
    steps: usize,
    viscosity: f64,
) -> Result<Trajectory> {
    Integrator::new(model.clone(), viscosity)?.simulate(initial, dt, steps)
}

impl Trajectory {
    /// Validates shapes and assembles a trajectory from stored parts.
    pub fn from_parts(states: Vec<ElasticState>, energy: Vec<f64>, dt: f64, dissipation: Vec<f64>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::Shape("trajectory has no nodes".into()));
        }
        if energy.len() != states.len() || dissipation.len() != states.len() {
            return Err(Error::Shape("energy and dissipation need one value per node".into()));
        }
        if !(dt.is_finite() && dt != 0.0) {
            return Err(Error::Parameter("trajectory time step must be finite and non-zero".into()));
        }
        let grid = *states[0].grid();
        if states.iter().any(|s| !s.grid().same_shape(&grid)) {
            return Err(Error::Shape("trajectory states live on different grids".into()));
        }
        Ok(Self { states, energy, dt, dissipation })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn grid(&self) -> &TorusGrid {
        self.states[0].grid()
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    /// `𝓔(v[n], F[n])` per node.
    pub fn discrete_energy(&self, model: &ConvexElasticModel) -> Result<Vec<f64>> {
        self.states.iter().map(|s| model.total_energy(&s.v, &s.f)).collect()
    }

    /// Same trajectory with `E` raised by a constant; `E ≥ 𝓔` is preserved.
    pub fn with_energy_surplus(&self, surplus: f64) -> Result<Self> {
        if !(surplus.is_finite() && surplus >= 0.0) {
            return Err(Error::Parameter("energy surplus must be non-negative".into()));
        }
        let mut out = self.clone();
        out.energy.iter_mut().for_each(|e| *e += surplus);
        Ok(out)
    }

    /// Largest increase of `E` between consecutive nodes (≤ 0 when non-increasing).
    pub fn max_energy_increase(&self) -> f64 {
        self.energy.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Standing wave `v = c cos(ωt) sin(κx)`, `F = c sin(ωt) cos(κx)` with
/// `ω = κ = 2π/L`, an exact solution for `G = ½|F|²` in one dimension.
pub fn manufactured_linear_solution(grid: &TorusGrid, t: f64, amplitude: f64) -> Result<ElasticState> {
    if grid.dim() != 1 {
        return Err(Error::Dimension("the manufactured solution is one-dimensional".into()));
    }
    let kappa = 2.0 * std::f64::consts::PI / grid.period(0);
    let v = TorusField::from_fn(*grid, Rank::Vector, |x, o| o[0] = amplitude * (kappa * t).cos() * (kappa * x[0]).sin())?;
    let f = TorusField::from_fn(*grid, Rank::Matrix, |x, o| o[0] = amplitude * (kappa * t).sin() * (kappa * x[0]).cos())?;
    ElasticState::new(v, f, t)
}

/// `F = I ± a e1⊗e1` alternating in runs of `wavelength_cells / 2` cells along
/// the first axis, `v = 0`. The wavelength must be even and divide the extent.
pub fn oscillatory_initial_data(grid: &TorusGrid, amplitude: f64, wavelength_cells: usize) -> Result<ElasticState> {
    let n0 = grid.extent()[0];
    if wavelength_cells < 2 || wavelength_cells % 2 != 0 || n0 % wavelength_cells != 0 {
        return Err(Error::Parameter(format!(
            "wavelength {wavelength_cells} must be even, at least 2, and divide the extent {n0}"
        )));
    }
    if !amplitude.is_finite() {
        return Err(Error::Parameter("amplitude must be finite".into()));
    }
    let d = grid.dim();
    let half = wavelength_cells / 2;
    let mut f = TorusField::zeros(*grid, Rank::Matrix);
    let mut cell_value = vec![0.0; d * d];
    for cell in 0..grid.cells() {
        let i = grid.multi_index(cell)[0];
        let sign = if (i / half) % 2 == 0 { 1.0 } else { -1.0 };
        cell_value.iter_mut().for_each(|x| *x = 0.0);
        for a in 0..d {
            cell_value[a * d + a] = 1.0;
        }
        cell_value[0] += sign * amplitude;
        f.write_cell(cell, &cell_value);
    }
    ElasticState::new(TorusField::zeros(*grid, Rank::Vector), f, 0.0)
}

/// The two matrix values taken by [`oscillatory_initial_data`].
pub fn oscillation_values(dim: usize, amplitude: f64) -> (Vec<f64>, Vec<f64>) {
    let mut a = crate::linalg::identity(dim);
    let mut b = a.clone();
    a[0] += amplitude;
    b[0] -= amplitude;
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> TorusGrid {
        TorusGrid::uniform(1, n, 1.0).unwrap()
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let grid = TorusGrid::uniform(2, 8, 1.0).unwrap();
        let model = ConvexElasticModel::regularized(2, 0.2).unwrap();
        let s = ElasticState::uniform(grid, &[1.2, 0.3, -0.1, 0.9]).unwrap();
        let out = Integrator::new(model, 0.0).unwrap().step(&s, 0.01).unwrap();
        assert_eq!(out.state.v.max_abs(), 0.0);
        assert_eq!(out.state.f, s.f);
    }

    #[test]
    fn discrete_gradient_identity() {
        let model = ConvexElasticModel::regularized(2, 0.7).unwrap();
        let a = [0.3, -1.2, 0.5, 2.0];
        for scale in [1.0, 1e-3, 1e-6, 1e-9] {
            let b: Vec<f64> = a.iter().enumerate().map(|(k, x)| x + scale * (k as f64 - 1.5)).collect();
            let mut dg = [0.0; 4];
            discrete_gradient(&model, &a, &b, &mut dg);
            let delta: Vec<f64> = a.iter().zip(&b).map(|(x, y)| y - x).collect();
            let lhs = dot(&dg, &delta);
            let rhs = model.energy(&b) - model.energy(&a);
            assert!((lhs - rhs).abs() <= 1e-15 * (1.0 + model.energy(&a)), "scale {scale}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn linear_wave_conserves_energy() {
        let grid = line(64);
        let model = ConvexElasticModel::quadratic(1).unwrap();
        let s0 = manufactured_linear_solution(&grid, 0.0, 1.0).unwrap();
        let h = grid.spacing()[0];
        let traj = simulate(&model, &s0, h / 4.0, 200, 0.0).unwrap();
        let e = traj.discrete_energy(&model).unwrap();
        assert!((e[200] - e[0]).abs() <= 1e-10);
    }

    #[test]
    fn reject_policy_refuses_large_steps() {
        let grid = line(16);
        let model = ConvexElasticModel::quadratic(1).unwrap();
        let s0 = manufactured_linear_solution(&grid, 0.0, 1.0).unwrap();
        let it = Integrator::new(model.clone(), 0.0).unwrap().with_cap_policy(CapPolicy::Reject);
        assert!(matches!(it.step(&s0, 1.0), Err(Error::StabilityCap { .. })));
        let clamped = Integrator::new(model, 0.0).unwrap().step(&s0, 1.0).unwrap();
        assert!(clamped.substeps > 1);
        assert!((clamped.state.t - 1.0).abs() < 1e-15);
    }

    #[test]
    fn viscous_backward_step_is_rejected() {
        let grid = line(8);
        let model = ConvexElasticModel::quadratic(1).unwrap();
        let s0 = manufactured_linear_solution(&grid, 0.0, 1.0).unwrap();
        assert!(step(&model, &s0, -0.01, 0.1).is_err());
        assert!(step(&model, &s0, 0.0, 0.0).is_err());
    }

    #[test]
    fn oscillatory_pattern() {
        let grid = TorusGrid::uniform(2, 8, 1.0).unwrap();
        let s = oscillatory_initial_data(&grid, 0.5, 4).unwrap();
        let (a, b) = oscillation_values(2, 0.5);
        for cell in 0..grid.cells() {
            let c = s.f.cell(cell);
            assert!(c == a || c == b);
        }
        assert!(oscillatory_initial_data(&grid, 0.5, 3).is_err());
        assert!(oscillatory_initial_data(&grid, 0.5, 16).is_err());
        let flat = oscillatory_initial_data(&grid, 0.0, 2).unwrap();
        assert!(flat.f.values().chunks(64).all(|c| c.iter().all(|x| *x == c[0])));
    }
}
