//! Block coarse-graining of fine states into mean fields, empirical Young
//! measures, flux defects and energy surpluses.

use rayon::prelude::*;

use crate::energy::ConvexElasticModel;
use crate::error::{Error, Result};
use crate::integrator::ElasticState;
use crate::linalg::dot;
use crate::torus::{Rank, TorusField, TorusGrid};

/// One point mass of a per-cell measure on states `(s, S)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub weight: f64,
    pub s: Vec<f64>,
    pub big_s: Vec<f64>,
}

/// Per-cell atomic probability measures plus a non-negative singular mass per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct YoungMeasureField {
    grid: TorusGrid,
    atoms: Vec<Vec<Atom>>,
    gamma: Vec<f64>,
}

/// Tolerance on per-cell weight sums.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

impl YoungMeasureField {
    pub fn new(grid: TorusGrid, atoms: Vec<Vec<Atom>>, gamma: Vec<f64>) -> Result<Self> {
        let cells = grid.cells();
        if atoms.len() != cells || gamma.len() != cells {
            return Err(Error::Shape(format!("measure needs {cells} cells of atoms and gamma")));
        }
        let d = grid.dim();
        for (cell, list) in atoms.iter().enumerate() {
            if list.is_empty() {
                return Err(Error::Shape(format!("cell {cell} has no atoms")));
            }
            let mut total = 0.0;
            for a in list {
                if a.s.len() != d || a.big_s.len() != d * d {
                    return Err(Error::Shape(format!("atom in cell {cell} has the wrong state size")));
                }
                if !(a.weight > 0.0 && a.weight <= 1.0 + NORMALIZATION_TOLERANCE) {
                    return Err(Error::Parameter(format!("atom weight {} in cell {cell} outside (0, 1]", a.weight)));
                }
                if a.s.iter().chain(&a.big_s).any(|x| !x.is_finite()) {
                    return Err(Error::Evaluation(format!("atom in cell {cell} is not finite")));
                }
                total += a.weight;
            }
            if (total - 1.0).abs() > NORMALIZATION_TOLERANCE * list.len().max(1) as f64 {
                return Err(Error::Parameter(format!("weights in cell {cell} sum to {total}")));
            }
        }
        if gamma.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::Parameter("gamma must be finite and non-negative".into()));
        }
        Ok(Self { grid, atoms, gamma })
    }

    /// Point masses at the state's own values.
    pub fn dirac(state: &ElasticState) -> Result<Self> {
        let grid = *state.grid();
        let atoms = (0..grid.cells())
            .map(|c| vec![Atom { weight: 1.0, s: state.v.cell(c), big_s: state.f.cell(c) }])
            .collect();
        Self::new(grid, atoms, vec![0.0; grid.cells()])
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn atoms(&self, cell: usize) -> &[Atom] {
        &self.atoms[cell]
    }

    pub fn all_atoms(&self) -> &[Vec<Atom>] {
        &self.atoms
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.iter().map(Vec::len).sum()
    }

    /// Largest deviation of a per-cell weight sum from one.
    pub fn normalization_error(&self) -> f64 {
        self.atoms
            .iter()
            .map(|l| (l.iter().map(|a| a.weight).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Merges atoms in the same cell whose states differ by at most `tol`
    /// (max norm), adding their weights. First moments are preserved exactly
    /// only for `tol = 0`; otherwise up to `tol`.
    pub fn merged(&self, tol: f64) -> Self {
        let atoms = self
            .atoms
            .iter()
            .map(|list| {
                let mut out: Vec<Atom> = Vec::new();
                for a in list {
                    let close = out.iter_mut().find(|b| {
                        a.s.iter().zip(&b.s).chain(a.big_s.iter().zip(&b.big_s)).all(|(x, y)| (x - y).abs() <= tol)
                    });
                    match close {
                        Some(b) => b.weight += a.weight,
                        None => out.push(a.clone()),
                    }
                }
                out
            })
            .collect();
        Self { grid: self.grid, atoms, gamma: self.gamma.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoarseData {
    pub mean: ElasticState,
    pub measure: YoungMeasureField,
    /// `⟨ν, DG(S)⟩ − DG(mean F)` per coarse cell.
    pub defect: TorusField,
    /// `⟨ν, η⟩ − η(mean)` per coarse cell, `η = ½|s|² + G(S)`.
    pub surplus: Vec<f64>,
}

impl CoarseData {
    /// `∫ surplus`.
    pub fn total_surplus(&self) -> f64 {
        self.surplus.iter().sum::<f64>() * self.mean.grid().cell_volume()
    }
}

/// `η(s, S) = ½|s|² + G(S)`.
pub fn eta(model: &ConvexElasticModel, s: &[f64], big_s: &[f64]) -> f64 {
    0.5 * dot(s, s) + model.energy(big_s)
}

/// Averages `fine` over `block^dim` blocks of cells.
pub fn coarsen(model: &ConvexElasticModel, fine: &ElasticState, block: usize) -> Result<CoarseData> {
    let fgrid = *fine.grid();
    if fgrid.dim() != model.dim() {
        return Err(Error::Dimension("model and state dimensions differ".into()));
    }
    let cgrid = fgrid.coarsen(block)?;
    let d = fgrid.dim();
    let nm = d * d;
    let mut members: Vec<Vec<usize>> = vec![Vec::with_capacity(block.pow(d as u32)); cgrid.cells()];
    for cell in 0..fgrid.cells() {
        let idx = fgrid.multi_index(cell);
        let mut cidx = [0usize; 3];
        for a in 0..d {
            cidx[a] = idx[a] / block;
        }
        members[cgrid.linear_index(cidx)].push(cell);
    }
    struct CellResult {
        atoms: Vec<Atom>,
        v: Vec<f64>,
        f: Vec<f64>,
        defect: Vec<f64>,
        surplus: f64,
    }
    let results: Vec<CellResult> = members
        .par_iter()
        .map(|list| {
            let w = 1.0 / list.len() as f64;
            let mut v = vec![0.0; d];
            let mut f = vec![0.0; nm];
            let mut mean_dg = vec![0.0; nm];
            let mut mean_eta = 0.0;
            let mut atoms = Vec::with_capacity(list.len());
            for &cell in list {
                let s = fine.v.cell(cell);
                let big_s = fine.f.cell(cell);
                let dg = model.stress(&big_s);
                for k in 0..d {
                    v[k] += w * s[k];
                }
                for k in 0..nm {
                    f[k] += w * big_s[k];
                    mean_dg[k] += w * dg[k];
                }
                mean_eta += w * eta(model, &s, &big_s);
                atoms.push(Atom { weight: w, s, big_s });
            }
            let dg_mean = model.stress(&f);
            let defect = mean_dg.iter().zip(&dg_mean).map(|(a, b)| a - b).collect();
            let surplus = mean_eta - eta(model, &v, &f);
            CellResult { atoms, v, f, defect, surplus }
        })
        .collect();
    let v = TorusField::from_cells(cgrid, Rank::Vector, results.iter().map(|r| r.v.as_slice()))?;
    let f = TorusField::from_cells(cgrid, Rank::Matrix, results.iter().map(|r| r.f.as_slice()))?;
    let defect = TorusField::from_cells(cgrid, Rank::Matrix, results.iter().map(|r| r.defect.as_slice()))?;
    let surplus = results.iter().map(|r| r.surplus).collect();
    let atoms = results.into_iter().map(|r| r.atoms).collect();
    let measure = YoungMeasureField::new(cgrid, atoms, vec![0.0; cgrid.cells()])?;
    Ok(CoarseData { mean: ElasticState::new(v, f, fine.t)?, measure, defect, surplus })
}

/// Per-cell `Σ weight · f(s, S)` for a map with values of the given rank.
pub fn measure_moment<F>(measure: &YoungMeasureField, rank: Rank, f: F) -> Result<TorusField>
where
    F: Fn(&[f64], &[f64], &mut [f64]) + Sync,
{
    let grid = *measure.grid();
    let nc = rank.components(grid.dim());
    let per_cell: Vec<Vec<f64>> = measure
        .atoms
        .par_iter()
        .map(|list| {
            let mut acc = vec![0.0; nc];
            let mut buf = vec![0.0; nc];
            for a in list {
                buf.iter_mut().for_each(|x| *x = 0.0);
                f(&a.s, &a.big_s, &mut buf);
                for k in 0..nc {
                    acc[k] += a.weight * buf[k];
                }
            }
            acc
        })
        .collect();
    TorusField::from_cells(grid, rank, per_cell.iter().map(Vec::as_slice))
}

/// Scalar convenience form of [`measure_moment`].
pub fn measure_moment_scalar<F>(measure: &YoungMeasureField, f: F) -> Result<TorusField>
where
    F: Fn(&[f64], &[f64]) -> f64 + Sync,
{
    measure_moment(measure, Rank::Scalar, |s, big_s, out| out[0] = f(s, big_s))
}
