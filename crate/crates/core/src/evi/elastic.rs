//! Residuals for convex and polyconvex elastodynamics and for measure-valued
//! solutions built from coarse-grained data.

use crate::coarse::{eta, measure_moment, CoarseData};
use crate::energy::{cofactor, determinant, ConvexElasticModel, PolyconvexModel};
use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::linalg::{dot, vecmat};
use crate::torus::{cross_vec_mat, Rank, TorusField, TorusGrid};

use super::basis::{Slot, TestBasis, TestFields};
use super::engine::{
    assemble, check_uniform_times, evaluate_basis, EviSystem, NodeSeries, SharedSeries, ViolationReport, ViolationRow,
};

fn pair(a: &TorusField, b: &Option<TorusField>) -> Result<f64> {
    b.as_ref().map_or(Ok(0.0), |b| a.inner(b))
}

fn check_weight(c: f64) -> Result<()> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::Parameter(format!("weight constant must be positive, got {c}")));
    }
    Ok(())
}

fn check_trajectory(traj: &Trajectory) -> Result<()> {
    if traj.len() < 2 {
        return Err(Error::Shape("residuals need at least two time nodes".into()));
    }
    check_uniform_times(&traj.times(), traj.dt)
}

fn reject_slots(fields: &TestFields, allowed: &[Slot]) -> Result<()> {
    let present = [
        (Slot::Velocity, fields.phi.is_some()),
        (Slot::Strain, fields.psi.is_some()),
        (Slot::Cofactor, fields.xi.is_some()),
        (Slot::Determinant, fields.phit.is_some()),
        (Slot::Director, fields.zeta.is_some()),
        (Slot::Molecular, fields.molecular.is_some()),
    ];
    match present.iter().find(|(s, p)| *p && !allowed.contains(s)) {
        Some((s, _)) => Err(Error::Shape(format!("test slot {s:?} does not apply to this system"))),
        None => Ok(()),
    }
}

/// Trajectory of the convex elastic system paired with `(φ, Ψ)` test functions.
pub struct ElasticEvi<'a> {
    traj: &'a Trajectory,
    stress: Vec<TorusField>,
    shared: SharedSeries,
    weight_constant: f64,
}

impl<'a> ElasticEvi<'a> {
    pub fn new(model: &ConvexElasticModel, traj: &'a Trajectory, weight_constant: f64) -> Result<Self> {
        check_weight(weight_constant)?;
        check_trajectory(traj)?;
        if traj.grid().dim() != model.dim() {
            return Err(Error::Shape("model and trajectory dimensions differ".into()));
        }
        let stress = traj.states.iter().map(|s| model.stress_field(&s.f)).collect::<Result<_>>()?;
        let discrete = traj.discrete_energy(model)?;
        let gap = discrete.iter().zip(&traj.energy).map(|(e, big)| e - big).collect();
        let shared = SharedSeries { energy: traj.energy.clone(), gap, dissipation: vec![0.0; traj.len()], dt: traj.dt };
        Ok(Self { traj, stress, shared, weight_constant })
    }
}

impl EviSystem for ElasticEvi<'_> {
    fn grid(&self) -> &TorusGrid {
        self.traj.grid()
    }

    fn shared(&self) -> &SharedSeries {
        &self.shared
    }

    fn series(&self, fields: &TestFields) -> Result<NodeSeries> {
        reject_slots(fields, &[Slot::Velocity, Slot::Strain])?;
        let n = self.traj.len();
        let mut out = NodeSeries::zeros(n);
        let w = fields.grad_phi.as_ref().map_or(0.0, |g| self.weight_constant * g.norm_l2());
        for (k, s) in self.traj.states.iter().enumerate() {
            out.pairing[k] = pair(&s.v, &fields.phi)? + pair(&s.f, &fields.psi)?;
            out.flux[k] = -(pair(&self.stress[k], &fields.grad_phi)? + pair(&s.v, &fields.div_psi)?);
            out.weight[k] = w;
        }
        Ok(out)
    }
}

/// Energy-variational residual of the convex elastic system; `weight_constant`
/// multiplies `‖∇φ‖_{L²}` in the relative-energy correction.
pub fn evi_residual_elastic(
    model: &ConvexElasticModel,
    traj: &Trajectory,
    basis: &TestBasis,
    weight_constant: f64,
) -> Result<ViolationReport> {
    evaluate_basis(&ElasticEvi::new(model, traj, weight_constant)?, basis, weight_constant)
}

/// Trajectory of `(∂ₜy, ∇y)` for the polyconvex system with cofactor and
/// determinant derived cellwise; test slots `φ, Ψ, Ξ, φ̃`.
pub struct PolyconvexEvi<'a> {
    traj: &'a Trajectory,
    cof: Vec<TorusField>,
    det: Vec<TorusField>,
    zeta: Vec<TorusField>,
    /// Transport flux of the cofactor, oriented so that `∂ₜ cof F + ∇×X = 0`
    /// for `F = ∇y`, `v = ∂ₜy`.
    cross: Vec<TorusField>,
    /// `(cof F)ᵀ v`.
    piola: Vec<TorusField>,
    shared: SharedSeries,
    weight_constant: f64,
    exponent: f64,
}

impl<'a> PolyconvexEvi<'a> {
    pub fn new(model: &PolyconvexModel, traj: &'a Trajectory, weight_constant: f64) -> Result<Self> {
        check_weight(weight_constant)?;
        if traj.grid().dim() != 3 {
            return Err(Error::Dimension("the polyconvex residual needs a three-dimensional grid".into()));
        }
        check_trajectory(traj)?;
        let mut cof = Vec::new();
        let mut det = Vec::new();
        let mut zeta = Vec::new();
        let mut cross = Vec::new();
        let mut piola = Vec::new();
        let mut gap = Vec::new();
        for (s, e) in traj.states.iter().zip(&traj.energy) {
            cof.push(s.f.map_cells(Rank::Matrix, |_, f, o| o.copy_from_slice(&cofactor(f)))?);
            det.push(s.f.map_cells(Rank::Scalar, |_, f, o| o[0] = determinant(f))?);
            zeta.push(s.f.map_cells(Rank::Matrix, |_, f, o| o.copy_from_slice(&model.zeta(f)))?);
            let c = cof.last().expect("just pushed");
            cross.push(s.f.map_cells(Rank::Matrix, |cell, f, o| {
                let x = cross_vec_mat(&s.v.cell(cell), f);
                o.iter_mut().zip(x).for_each(|(o, x)| *o = -x);
            })?);
            piola.push(s.v.map_cells(Rank::Vector, |cell, v, o| o.copy_from_slice(&vecmat(v, &c.cell(cell))))?);
            let kinetic = 0.5 * s.v.inner(&s.v)?;
            let elastic: f64 = (0..s.f.grid().cells()).map(|cell| model.sigma(&s.f.cell(cell))).sum::<f64>()
                * s.f.grid().cell_volume();
            gap.push(kinetic + elastic - e);
        }
        let shared = SharedSeries { energy: traj.energy.clone(), gap, dissipation: vec![0.0; traj.len()], dt: traj.dt };
        Ok(Self { traj, cof, det, zeta, cross, piola, shared, weight_constant, exponent: model.growth().p })
    }
}

/// `(∫ |A|^p)^{1/p}` with the Frobenius norm pointwise.
pub fn lp_norm(a: &TorusField, p: f64) -> f64 {
    let nc = a.components();
    let s: f64 = (0..a.grid().cells())
        .map(|c| {
            let m: f64 = (0..nc).map(|k| a.component(k)[c].powi(2)).sum();
            m.sqrt().powf(p)
        })
        .sum();
    (s * a.grid().cell_volume()).powf(1.0 / p)
}

impl EviSystem for PolyconvexEvi<'_> {
    fn grid(&self) -> &TorusGrid {
        self.traj.grid()
    }

    fn shared(&self) -> &SharedSeries {
        &self.shared
    }

    fn series(&self, fields: &TestFields) -> Result<NodeSeries> {
        reject_slots(fields, &[Slot::Velocity, Slot::Strain, Slot::Cofactor, Slot::Determinant])?;
        let n = self.traj.len();
        let mut out = NodeSeries::zeros(n);
        let w = fields.grad_phi.as_ref().map_or(0.0, |g| self.weight_constant * lp_norm(g, self.exponent));
        for (k, s) in self.traj.states.iter().enumerate() {
            out.pairing[k] = pair(&s.v, &fields.phi)?
                + pair(&s.f, &fields.psi)?
                + pair(&self.cof[k], &fields.xi)?
                + pair(&self.det[k], &fields.phit)?;
            out.flux[k] = -(pair(&self.zeta[k], &fields.grad_phi)?
                + pair(&s.v, &fields.div_psi)?
                + pair(&self.cross[k], &fields.curl_xi)?
                + pair(&self.piola[k], &fields.grad_phit)?);
            out.weight[k] = w;
        }
        Ok(out)
    }
}

/// Energy-variational residual of the polyconvex system with weight
/// `c ‖∇φ‖_{L^p}`, `p` the model's growth exponent.
pub fn evi_residual_polyconvex(
    model: &PolyconvexModel,
    traj: &Trajectory,
    basis: &TestBasis,
    weight_constant: f64,
) -> Result<ViolationReport> {
    evaluate_basis(&PolyconvexEvi::new(model, traj, weight_constant)?, basis, weight_constant)
}

/// Coarse data over time paired with `(ψ, Ψ)` through the measure-valued
/// weak equations; the auxiliary energy is `⟨ν, η⟩ + γ`.
pub struct MeasureValuedEvi<'a> {
    coarse: &'a [CoarseData],
    measure_stress: Vec<TorusField>,
    shared: SharedSeries,
}

impl<'a> MeasureValuedEvi<'a> {
    pub fn new(model: &ConvexElasticModel, coarse: &'a [CoarseData], dt: f64) -> Result<Self> {
        if coarse.len() < 2 {
            return Err(Error::Shape("residuals need at least two time nodes".into()));
        }
        let grid = *coarse[0].mean.grid();
        if coarse.iter().any(|c| !c.mean.grid().same_shape(&grid)) {
            return Err(Error::Shape("coarse data live on different grids".into()));
        }
        if grid.dim() != model.dim() {
            return Err(Error::Shape("model and data dimensions differ".into()));
        }
        check_uniform_times(&coarse.iter().map(|c| c.mean.t).collect::<Vec<_>>(), dt)?;
        let measure_stress = coarse
            .iter()
            .map(|c| measure_moment(&c.measure, Rank::Matrix, |_, big_s, out| model.stress_into(big_s, out)))
            .collect::<Result<_>>()?;
        let energy = coarse
            .iter()
            .map(|c| {
                let e = crate::coarse::measure_moment_scalar(&c.measure, |s, big_s| eta(model, s, big_s))?;
                let gamma: f64 = c.measure.gamma().iter().sum();
                Ok((e.values().iter().sum::<f64>() + gamma) * grid.cell_volume())
            })
            .collect::<Result<Vec<f64>>>()?;
        let n = coarse.len();
        let shared = SharedSeries { energy, gap: vec![0.0; n], dissipation: vec![0.0; n], dt };
        Ok(Self { coarse, measure_stress, shared })
    }

    /// `∫ ⟨ν, η⟩ + γ` per node.
    pub fn measure_energy(&self) -> &[f64] {
        &self.shared.energy
    }
}

impl EviSystem for MeasureValuedEvi<'_> {
    fn grid(&self) -> &TorusGrid {
        self.coarse[0].mean.grid()
    }

    fn shared(&self) -> &SharedSeries {
        &self.shared
    }

    fn series(&self, fields: &TestFields) -> Result<NodeSeries> {
        reject_slots(fields, &[Slot::Velocity, Slot::Strain])?;
        let mut out = NodeSeries::zeros(self.coarse.len());
        for (k, c) in self.coarse.iter().enumerate() {
            out.pairing[k] = pair(&c.mean.v, &fields.phi)? + pair(&c.mean.f, &fields.psi)?;
            out.flux[k] = -(pair(&self.measure_stress[k], &fields.grad_phi)? + pair(&c.mean.v, &fields.div_psi)?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MvsReport {
    /// `|residual|` of the two weak equations over the whole time interval.
    pub equations: ViolationReport,
    /// Positive part of the violated energy inequality per profile.
    pub energy: ViolationReport,
}

impl MvsReport {
    pub fn max_violation(&self) -> f64 {
        self.equations.max_violation.max(self.energy.max_violation)
    }
}

/// Residuals of the measure-valued formulation: the two weak equations
/// tested with `θ(t) ψ(x)` over `[t_0, t_N]` (boundary terms kept at both
/// ends) and `θ(0) e_0 − θ(T) e_T + ∫ θ' e ≥ 0` for every profile `θ ≥ 0`,
/// `e = ∫⟨ν, η⟩ + γ`.
pub fn mvs_residual_elastic(
    model: &ConvexElasticModel,
    coarse: &[CoarseData],
    dt: f64,
    basis: &TestBasis,
) -> Result<MvsReport> {
    let system = MeasureValuedEvi::new(model, coarse, dt)?;
    let n = coarse.len();
    let last = n - 1;
    let thetas: Vec<Vec<f64>> = basis.profiles.iter().map(|p| p.values(n)).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for f in &basis.spatial {
        let fields = TestFields::evaluate(f, system.grid(), basis.derivatives)?;
        let series = system.series(&fields)?;
        for (p, theta) in basis.profiles.iter().zip(&thetas) {
            let r = assemble(&system.shared, &series, theta).linear_residual(0, last).abs();
            rows.push(ViolationRow { function: f.label.clone(), profile: p.label(), max_residual: r, s: 0, t: last });
        }
    }
    let equations = ViolationReport::from_rows(rows, 0.0);
    let e = system.measure_energy();
    let mut energy_rows = Vec::new();
    for (p, theta) in basis.profiles.iter().zip(&thetas) {
        if theta.iter().any(|x| *x < 0.0) {
            continue;
        }
        let mut lhs = theta[0] * e[0] - theta[last] * e[last];
        for i in 0..last {
            lhs += (theta[i + 1] - theta[i]) * 0.5 * (e[i] + e[i + 1]);
        }
        energy_rows.push(ViolationRow { function: "energy".into(), profile: p.label(), max_residual: -lhs, s: 0, t: last });
    }
    Ok(MvsReport { equations, energy: ViolationReport::from_rows(energy_rows, 0.0) })
}

/// `∫ ½|v − ṽ|² + G(F) − G(F̃) − DG(F̃):(F − F̃)` per node, with an
/// exponential growth rate fitted to it.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeEnergy {
    pub values: Vec<f64>,
    /// `max_n ln((d_n + 1e-14)/(d_0 + 1e-14)) / (t_n − t_0)`.
    pub growth_rate: f64,
}

pub fn relative_energy(model: &ConvexElasticModel, traj: &Trajectory, reference: &Trajectory) -> Result<RelativeEnergy> {
    if traj.len() != reference.len() || !traj.grid().same_shape(reference.grid()) {
        return Err(Error::Shape("trajectory and reference differ in nodes or grid".into()));
    }
    if traj.grid().dim() != model.dim() {
        return Err(Error::Shape("model and trajectory dimensions differ".into()));
    }
    let vol = traj.grid().cell_volume();
    let values: Vec<f64> = traj
        .states
        .iter()
        .zip(&reference.states)
        .map(|(a, b)| {
            let dv = a.v.sub(&b.v)?;
            let mut s = 0.5 * dv.inner(&dv)?;
            let mut acc = 0.0;
            for cell in 0..a.f.grid().cells() {
                let f = a.f.cell(cell);
                let g = b.f.cell(cell);
                let dg = model.stress(&g);
                let diff: Vec<f64> = f.iter().zip(&g).map(|(x, y)| x - y).collect();
                acc += model.energy(&f) - model.energy(&g) - dot(&dg, &diff);
            }
            s += acc * vol;
            Ok(s)
        })
        .collect::<Result<_>>()?;
    let t0 = traj.states[0].t;
    let growth_rate = traj
        .states
        .iter()
        .zip(&values)
        .skip(1)
        .map(|(s, d)| ((d + 1e-14) / (values[0] + 1e-14)).ln() / (s.t - t0))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(RelativeEnergy { values, growth_rate: if growth_rate.is_finite() { growth_rate } else { 0.0 } })
}
