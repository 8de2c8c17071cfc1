//! Energy-variational residual of the Ericksen–Leslie director model with
//! test slots `φ` (divergence-free velocity), `ζ` (director) and `ψ`
//! (molecular field), no external forcing.

use crate::energy::{d_norm_primal, unit_director, LiquidCrystalModel};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, matvec, outer, skw, sym};
use crate::measure::negative_part;
use crate::torus::{cross3, divergence, gradient, Rank, TorusField, TorusGrid};

use super::basis::{Slot, TestBasis, TestFields};
use super::engine::{check_uniform_times, evaluate_basis, EviSystem, NodeSeries, SharedSeries, ViolationReport};

/// Velocity, director and (optionally) molecular field at uniform time nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectorTrajectory {
    pub v: Vec<TorusField>,
    pub d: Vec<TorusField>,
    /// Assembled from the director when absent.
    pub q: Option<Vec<TorusField>>,
    pub energy: Vec<f64>,
    pub t0: f64,
    pub dt: f64,
}

impl DirectorTrajectory {
    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }
}

/// `q = k (∇dᵀ∇d) d − div(K1 ∇d + k (∇d d) ⊗ d)` with grid operators.
pub fn molecular_field(model: &LiquidCrystalModel, d: &TorusField) -> Result<TorusField> {
    let gd = gradient(d)?;
    let mut d_dir = TorusField::zeros(*d.grid(), Rank::Vector);
    let mut d_grad = TorusField::zeros(*d.grid(), Rank::Matrix);
    let n = d.grid().cells();
    for cell in 0..n {
        let of = model.oseen_frank(&d.cell(cell), &gd.cell(cell))?;
        for i in 0..3 {
            d_dir.component_mut(i)[cell] = of.d_dir[i];
        }
        for k in 0..9 {
            d_grad.component_mut(k)[cell] = of.d_grad[k];
        }
    }
    d_dir.sub(&divergence(&d_grad)?)
}

struct Node {
    v: TorusField,
    d: TorusField,
    q: TorusField,
    /// `(v⊗v) + T^E − T^L`, paired with `∇φ`.
    momentum: TorusField,
    /// `(v·∇)d − skw(∇v)d + (I − d⊗d)(λ sym(∇v)d + q)`.
    director: TorusField,
    d_dir: TorusField,
    d_grad: TorusField,
}

pub struct LiquidCrystalEvi<'a> {
    model: &'a LiquidCrystalModel,
    grid: TorusGrid,
    nodes: Vec<Node>,
    shared: SharedSeries,
}

impl<'a> LiquidCrystalEvi<'a> {
    pub fn new(model: &'a LiquidCrystalModel, data: &DirectorTrajectory) -> Result<Self> {
        model.validate()?;
        let n = data.len();
        if n < 2 || data.v.len() != n || data.energy.len() != n || data.q.as_ref().is_some_and(|q| q.len() != n) {
            return Err(Error::Shape("velocity, director, q and energy need the same number (≥ 2) of nodes".into()));
        }
        if !(data.dt.is_finite() && data.dt > 0.0) {
            return Err(Error::Parameter("time step must be positive".into()));
        }
        let times: Vec<f64> = (0..n).map(|k| data.t0 + k as f64 * data.dt).collect();
        check_uniform_times(&times, data.dt)?;
        let grid = *data.d[0].grid();
        if grid.dim() != 3 {
            return Err(Error::Dimension("the director model needs a three-dimensional grid".into()));
        }
        let mut nodes = Vec::with_capacity(n);
        let mut gap = Vec::with_capacity(n);
        let mut dissipation = Vec::with_capacity(n);
        for k in 0..n {
            let (v, d) = (&data.v[k], &data.d[k]);
            if v.rank() != Rank::Vector || d.rank() != Rank::Vector || !v.grid().same_shape(&grid) || !d.grid().same_shape(&grid) {
                return Err(Error::Shape(format!("node {k}: velocity and director must be vector fields on one grid")));
            }
            for cell in 0..grid.cells() {
                if let Err(Error::Constraint { norm }) = unit_director(&d.cell(cell)) {
                    return Err(Error::Domain(format!("node {k}, cell {cell}: |d| = {norm}")));
                }
            }
            let q = match &data.q {
                Some(q) => q[k].clone(),
                None => molecular_field(model, d)?,
            };
            let (node, energy, rate) = Self::node(model, v.clone(), d.clone(), q)?;
            gap.push(energy - data.energy[k]);
            dissipation.push(rate);
            nodes.push(node);
        }
        let shared = SharedSeries { energy: data.energy.clone(), gap, dissipation, dt: data.dt };
        Ok(Self { model, grid, nodes, shared })
    }

    fn node(model: &LiquidCrystalModel, v: TorusField, d: TorusField, q: TorusField) -> Result<(Node, f64, f64)> {
        let grid = *d.grid();
        let gd = gradient(&d)?;
        let gv = gradient(&v)?;
        let mut momentum = TorusField::zeros(grid, Rank::Matrix);
        let mut director = TorusField::zeros(grid, Rank::Vector);
        let mut d_dir = TorusField::zeros(grid, Rank::Vector);
        let mut d_grad = TorusField::zeros(grid, Rank::Matrix);
        let (mut energy, mut rate) = (0.0, 0.0);
        for cell in 0..grid.cells() {
            let (vc, dc, qc) = (v.cell(cell), unit_director(&d.cell(cell))?, q.cell(cell));
            let (gdc, gvc) = (gd.cell(cell), gv.cell(cell));
            let of = model.oseen_frank(&dc, &gdc)?;
            let (te, tl) = model.leslie_stress_eval(&dc, &gdc, &gvc, &qc)?;
            let mut m = outer(&vc, &vc);
            axpy(1.0, &te, &mut m);
            axpy(-1.0, &tl, &mut m);
            let mut r = matvec(&gdc, &vc);
            axpy(-1.0, &matvec(&skw(&gvc), &dc), &mut r);
            let mut inner = matvec(&sym(&gvc), &dc);
            inner.iter_mut().for_each(|x| *x *= model.lambda);
            axpy(1.0, &qc, &mut inner);
            let along = dot(&dc, &inner);
            for i in 0..3 {
                r[i] += inner[i] - along * dc[i];
            }
            for k in 0..9 {
                momentum.component_mut(k)[cell] = m[k];
                d_grad.component_mut(k)[cell] = of.d_grad[k];
            }
            for i in 0..3 {
                director.component_mut(i)[cell] = r[i];
                d_dir.component_mut(i)[cell] = of.d_dir[i];
            }
            energy += 0.5 * dot(&vc, &vc) + of.value;
            let dq = cross3(&dc, &qc);
            rate += model.leslie_dissipation(&dc, &gvc) + dot(&dq, &dq);
        }
        let vol = grid.cell_volume();
        Ok((Node { v, d, q, momentum, director, d_dir, d_grad }, energy * vol, rate * vol))
    }

    /// `2 max_cells ‖(∇φ + k d⊗(∇φ d + ψ))_{sym,−}‖_d` at one node.
    fn weight(&self, node: &Node, fields: &TestFields) -> Result<f64> {
        if fields.grad_phi.is_none() && fields.molecular.is_none() {
            return Ok(0.0);
        }
        let k = self.model.k();
        let mut worst: f64 = 0.0;
        for cell in 0..self.grid.cells() {
            let dc = node.d.cell(cell);
            let gp = fields.grad_phi.as_ref().map_or(vec![0.0; 9], |g| g.cell(cell));
            let mut inner = matvec(&gp, &dc);
            if let Some(psi) = &fields.molecular {
                axpy(1.0, &psi.cell(cell), &mut inner);
            }
            let mut a = gp;
            axpy(k, &outer(&dc, &inner), &mut a);
            let neg = negative_part(&sym(&a));
            worst = worst.max(d_norm_primal(&dc, k, &neg)?);
        }
        Ok(2.0 * worst)
    }

    /// `∫ (μ1+λ²)(d·Dd)² + μ4|D|² + (μ5+μ6−λ²)|Dd|² + |d×q|²` per node.
    pub fn dissipation_rate(&self) -> &[f64] {
        &self.shared.dissipation
    }
}

fn pair(a: &TorusField, b: &Option<TorusField>) -> Result<f64> {
    b.as_ref().map_or(Ok(0.0), |b| a.inner(b))
}

impl EviSystem for LiquidCrystalEvi<'_> {
    fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    fn shared(&self) -> &SharedSeries {
        &self.shared
    }

    fn series(&self, fields: &TestFields) -> Result<NodeSeries> {
        if fields.psi.is_some() || fields.xi.is_some() || fields.phit.is_some() {
            return Err(Error::Shape("only velocity, director and molecular slots apply to the director model".into()));
        }
        let mut out = NodeSeries::zeros(self.nodes.len());
        for (k, node) in self.nodes.iter().enumerate() {
            out.pairing[k] = pair(&node.v, &fields.phi)? + pair(&node.d, &fields.zeta)?;
            let consistency = match &fields.molecular {
                Some(psi) => {
                    node.q.inner(psi)? - node.d_dir.inner(psi)? - pair(&node.d_grad, &fields.grad_molecular)?
                }
                None => 0.0,
            };
            out.flux[k] = pair(&node.momentum, &fields.grad_phi)? - pair(&node.director, &fields.zeta)? - consistency;
            out.weight[k] = self.weight(node, fields)?;
        }
        Ok(out)
    }
}

/// Requires divergence-free velocity modes (`∫|div φ|² ≤ 1e-12`).
pub fn evi_residual_liquid_crystal(
    model: &LiquidCrystalModel,
    data: &DirectorTrajectory,
    basis: &TestBasis,
) -> Result<ViolationReport> {
    let system = LiquidCrystalEvi::new(model, data)?;
    if basis.spatial.iter().any(|f| f.uses(Slot::Velocity)) && !basis.velocity_is_divergence_free(&system.grid)? {
        return Err(Error::Parameter("velocity test modes must be divergence-free".into()));
    }
    evaluate_basis(&system, basis, 2.0)
}
