//! Varifolds on cells × unit sphere built from eigendecompositions of a PSD
//! defect and from the gradient of a phase indicator.

use crate::error::{Error, Result};
use crate::linalg::{norm, sym_eigen};
use crate::torus::{gradient, Rank, TorusField, TorusGrid};

use super::defect::{DefectField, PSD_SLACK};

#[derive(Debug, Clone, PartialEq)]
pub struct VarifoldAtom {
    pub cell: usize,
    pub direction: Vec<f64>,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Varifold {
    pub grid: TorusGrid,
    pub atoms: Vec<VarifoldAtom>,
}

/// Phase indicator with the direction and magnitude of its discrete gradient
/// on every cell where that gradient is non-zero.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceData {
    pub chi: TorusField,
    /// `(cell, ∇χ/|∇χ|, |∇χ|)`.
    pub cells: Vec<(usize, Vec<f64>, f64)>,
}

impl InterfaceData {
    pub fn from_indicator(chi: TorusField) -> Result<Self> {
        if chi.rank() != Rank::Scalar {
            return Err(Error::UnsupportedRank(chi.rank()));
        }
        if chi.values().iter().any(|v| *v != 0.0 && *v != 1.0) {
            return Err(Error::Parameter("indicator values must be 0 or 1".into()));
        }
        let g = gradient(&chi)?;
        let mut cells = Vec::new();
        for cell in 0..chi.grid().cells() {
            let v = g.cell(cell);
            let m = norm(&v);
            if m > 0.0 {
                cells.push((cell, v.iter().map(|x| x / m).collect(), m));
            }
        }
        Ok(Self { chi, cells })
    }

    /// `∫ |∇χ|`.
    pub fn total_mass(&self) -> f64 {
        self.cells.iter().map(|c| c.2).sum::<f64>() * self.chi.grid().cell_volume()
    }
}

impl Varifold {
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    pub fn cell_mass(&self, cell: usize) -> f64 {
        self.atoms.iter().filter(|a| a.cell == cell).map(|a| a.mass).sum()
    }

    /// `Σ mass · direction` over the atoms of one cell.
    pub fn first_moment(&self, cell: usize) -> Vec<f64> {
        let mut m = vec![0.0; self.grid.dim()];
        for a in self.atoms.iter().filter(|a| a.cell == cell) {
            for (x, y) in m.iter_mut().zip(&a.direction) {
                *x += a.mass * y;
            }
        }
        m
    }

    /// Atoms of one cell with masses divided by their total, when that total
    /// exceeds `1e-14`; the directional part of the varifold.
    pub fn normalized(&self, cell: usize) -> Option<Vec<VarifoldAtom>> {
        let total = self.cell_mass(cell);
        (total > 1e-14).then(|| {
            self.atoms
                .iter()
                .filter(|a| a.cell == cell)
                .map(|a| VarifoldAtom { cell, direction: a.direction.clone(), mass: a.mass / total })
                .collect()
        })
    }
}

/// Emits `(cell, ±e_i, λ_i/2 · cell volume)` for each positive eigenpair of
/// the defect and, when given, `(cell, normal, |∇χ| · cell volume)` for the
/// interface.
pub fn build_varifold(defect: &DefectField, interface: Option<&InterfaceData>) -> Result<Varifold> {
    let grid = *defect.r.grid();
    let vol = grid.cell_volume();
    let mut atoms = Vec::new();
    let mut buf = vec![0.0; defect.r.components()];
    for cell in 0..grid.cells() {
        defect.r.read_cell(cell, &mut buf);
        let scale = buf.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
        if crate::linalg::asymmetry(&buf) > 1e-12 * scale {
            return Err(Error::Domain(format!("defect in cell {cell} is not symmetric")));
        }
        let (vals, vecs) = sym_eigen(&buf);
        if vals[0] < -PSD_SLACK * scale {
            return Err(Error::Domain(format!("defect in cell {cell} has eigenvalue {}", vals[0])));
        }
        for (l, e) in vals.iter().zip(vecs) {
            if *l > 0.0 {
                let neg: Vec<f64> = e.iter().map(|x| -x).collect();
                atoms.push(VarifoldAtom { cell, direction: e, mass: 0.5 * l * vol });
                atoms.push(VarifoldAtom { cell, direction: neg, mass: 0.5 * l * vol });
            }
        }
    }
    if let Some(iface) = interface {
        if !iface.chi.grid().same_shape(&grid) {
            return Err(Error::Shape("interface and defect live on different grids".into()));
        }
        for (cell, normal, mass) in &iface.cells {
            atoms.push(VarifoldAtom { cell: *cell, direction: normal.clone(), mass: mass * vol });
        }
    }
    Ok(Varifold { grid, atoms })
}
