//! Time-discrete assembly shared by all energy-variational residuals.
//!
//! Every residual has the form
//! `[E − θ P]_s^t + ∫_s^t (θ' P + θ H + |θ| W (𝓔 − E) + D) dτ`
//! where `P` pairs the state with the spatial test function, `H` collects the
//! flux pairings, `W` is the weight factor and `D` a dissipation rate. Time
//! integrals use the trapezoidal rule on the trajectory nodes and the
//! profile `θ` is linear between nodes.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::torus::TorusGrid;

use super::basis::{Profile, SpatialFunction, TestBasis, TestFields};

/// Profile-independent node data of one spatial test function.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSeries {
    pub pairing: Vec<f64>,
    pub flux: Vec<f64>,
    pub weight: Vec<f64>,
}

impl NodeSeries {
    pub fn zeros(n: usize) -> Self {
        Self { pairing: vec![0.0; n], flux: vec![0.0; n], weight: vec![0.0; n] }
    }
}

/// Node data that does not depend on the test function.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedSeries {
    /// Auxiliary energy `E`.
    pub energy: Vec<f64>,
    /// `𝓔(state) − E`.
    pub gap: Vec<f64>,
    /// Dissipation rate appearing inside the time integral (zero when `E`
    /// already accounts for it).
    pub dissipation: Vec<f64>,
    pub dt: f64,
}

impl SharedSeries {
    pub fn len(&self) -> usize {
        self.energy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energy.is_empty()
    }
}

/// Cumulative residual parts at every node; the residual between nodes
/// `s < t` is `total(t) − total(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualProfile {
    /// `E_n` plus the integrated dissipation up to node `n`.
    pub energy: Vec<f64>,
    /// `−θ_n P_n` plus the integrated `θ' P + θ H`.
    pub linear: Vec<f64>,
    /// Integrated `|θ| W (𝓔 − E)`.
    pub weight: Vec<f64>,
}

impl ResidualProfile {
    pub fn total(&self, n: usize) -> f64 {
        self.energy[n] + self.linear[n] + self.weight[n]
    }

    pub fn residual(&self, s: usize, t: usize) -> f64 {
        self.total(t) - self.total(s)
    }

    pub fn linear_residual(&self, s: usize, t: usize) -> f64 {
        self.linear[t] - self.linear[s]
    }

    /// Largest `residual(s, t)` over `s < t` with its location.
    pub fn max_forward(&self) -> (f64, usize, usize) {
        let n = self.energy.len();
        let mut best = (f64::NEG_INFINITY, 0, 0);
        let mut min_at = (self.total(0), 0);
        for t in 1..n {
            let v = self.total(t);
            if v - min_at.0 > best.0 {
                best = (v - min_at.0, min_at.1, t);
            }
            if v < min_at.0 {
                min_at = (v, t);
            }
        }
        best
    }
}

pub fn assemble(shared: &SharedSeries, series: &NodeSeries, theta: &[f64]) -> ResidualProfile {
    let n = shared.len();
    let dt = shared.dt;
    let mut energy = vec![0.0; n];
    let mut linear = vec![0.0; n];
    let mut weight = vec![0.0; n];
    let (mut ce, mut cl, mut cw) = (0.0, 0.0, 0.0);
    for i in 0..n {
        if i > 0 {
            let j = i - 1;
            ce += 0.5 * dt * (shared.dissipation[j] + shared.dissipation[i]);
            cl += (theta[i] - theta[j]) * 0.5 * (series.pairing[j] + series.pairing[i])
                + 0.5 * dt * (theta[j] * series.flux[j] + theta[i] * series.flux[i]);
            cw += 0.5
                * dt
                * (theta[j].abs() * series.weight[j] * shared.gap[j] + theta[i].abs() * series.weight[i] * shared.gap[i]);
        }
        energy[i] = shared.energy[i] + ce;
        linear[i] = cl - theta[i] * series.pairing[i];
        weight[i] = cw;
    }
    ResidualProfile { energy, linear, weight }
}

/// A discrete solution candidate that can pair itself with test functions.
pub trait EviSystem: Sync {
    fn grid(&self) -> &TorusGrid;
    fn shared(&self) -> &SharedSeries;
    fn series(&self, fields: &TestFields) -> Result<NodeSeries>;
}

pub fn residual_profile<S: EviSystem + ?Sized>(
    system: &S,
    f: &SpatialFunction,
    profile: &Profile,
    basis_derivatives: super::basis::DerivativeMode,
) -> Result<ResidualProfile> {
    let fields = TestFields::evaluate(f, system.grid(), basis_derivatives)?;
    let series = system.series(&fields)?;
    let theta = profile.values(system.shared().len())?;
    Ok(assemble(system.shared(), &series, &theta))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViolationRow {
    pub function: String,
    pub profile: String,
    pub max_residual: f64,
    pub s: usize,
    pub t: usize,
}

/// Largest residual per (spatial function, profile) pair and overall.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationReport {
    pub rows: Vec<ViolationRow>,
    /// `max(0, max_residual)` over all rows.
    pub max_violation: f64,
    /// Row attaining the largest residual.
    pub argmax: Option<usize>,
    pub weight_constant: f64,
}

impl ViolationReport {
    pub fn from_rows(rows: Vec<ViolationRow>, weight_constant: f64) -> Self {
        let argmax = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.max_residual.is_finite())
            .max_by(|a, b| a.1.max_residual.total_cmp(&b.1.max_residual))
            .map(|(i, _)| i);
        let max_violation = argmax.map_or(0.0, |i| rows[i].max_residual.max(0.0));
        Self { rows, max_violation, argmax, weight_constant }
    }

    pub fn max_residual(&self) -> f64 {
        self.argmax.map_or(f64::NEG_INFINITY, |i| self.rows[i].max_residual)
    }
}

pub fn evaluate_basis<S: EviSystem + ?Sized>(system: &S, basis: &TestBasis, weight_constant: f64) -> Result<ViolationReport> {
    let n = system.shared().len();
    if n < 2 {
        return Err(Error::Shape("residuals need at least two time nodes".into()));
    }
    let thetas: Vec<Vec<f64>> = basis.profiles.iter().map(|p| p.values(n)).collect::<Result<_>>()?;
    let rows: Vec<Vec<ViolationRow>> = basis
        .spatial
        .par_iter()
        .map(|f| {
            let fields = TestFields::evaluate(f, system.grid(), basis.derivatives)?;
            let series = system.series(&fields)?;
            Ok(basis
                .profiles
                .iter()
                .zip(&thetas)
                .map(|(p, theta)| {
                    let (max_residual, s, t) = assemble(system.shared(), &series, theta).max_forward();
                    ViolationRow { function: f.label.clone(), profile: p.label(), max_residual, s, t }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(ViolationReport::from_rows(rows.into_iter().flatten().collect(), weight_constant))
}

/// `α · residual(f/α)` between the first and last node together with the
/// linear-plus-weight part of `residual(f)` it approaches as `α → 0`.
pub fn scaling_limit<S: EviSystem + ?Sized>(
    system: &S,
    f: &SpatialFunction,
    profile: &Profile,
    alpha: f64,
    derivatives: super::basis::DerivativeMode,
) -> Result<(f64, f64)> {
    if !(alpha > 0.0) {
        return Err(Error::Parameter("alpha must be positive".into()));
    }
    let last = system.shared().len() - 1;
    let scaled = residual_profile(system, &f.scaled(1.0 / alpha), profile, derivatives)?;
    let base = residual_profile(system, f, profile, derivatives)?;
    let limit = base.linear_residual(0, last) + base.weight[last] - base.weight[0];
    Ok((alpha * scaled.residual(0, last), limit))
}

pub(crate) fn check_uniform_times(times: &[f64], dt: f64) -> Result<()> {
    for (n, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs().max(1.0) {
            return Err(Error::Shape(format!("time nodes {n} and {} are not {dt} apart", n + 1)));
        }
    }
    Ok(())
}
