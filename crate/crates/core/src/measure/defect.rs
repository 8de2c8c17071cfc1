//! Least-norm recovery of a matrix defect field from its pairings with a
//! finite family of test gradients, followed by projection onto symmetric
//! positive semi-definite matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, identity, outer, sym_eigen};
use crate::torus::{Rank, TorusField};

/// Smallest admissible ratio of extreme Gram eigenvalues.
pub const GRAM_CONDITION_LIMIT: f64 = 1e-12;
/// Eigenvalues above `−PSD_SLACK` (relative to the cell's spectral scale) count as non-negative.
pub const PSD_SLACK: f64 = 1e-10;

/// Norm in which the defect is sought. All variants are realized through a
/// cellwise weighted Frobenius inner product `∫ tr(Aᵀ B M)`.
#[derive(Debug, Clone, PartialEq)]
pub enum NormKind {
    L2,
    /// Dual of `L^p`; approximated by the `L²` inner product.
    LpDual { p: f64 },
    /// Dual director norm with weight `M = I + k d⊗d` per cell.
    TraceD { director: TorusField, k: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefectField {
    pub r: TorusField,
    pub norm_kind: NormKind,
}

impl DefectField {
    /// Checks symmetry (`1e-12`) and eigenvalues (`≥ −1e-10`) cell by cell.
    pub fn new(r: TorusField, norm_kind: NormKind) -> Result<Self> {
        if r.rank() != Rank::Matrix {
            return Err(Error::UnsupportedRank(r.rank()));
        }
        let mut buf = vec![0.0; r.components()];
        for cell in 0..r.grid().cells() {
            r.read_cell(cell, &mut buf);
            if crate::linalg::asymmetry(&buf) > 1e-12 {
                return Err(Error::Domain(format!("defect in cell {cell} is not symmetric")));
            }
            let (vals, _) = sym_eigen(&buf);
            if vals[0] < -PSD_SLACK {
                return Err(Error::Domain(format!("defect in cell {cell} has eigenvalue {}", vals[0])));
            }
        }
        Ok(Self { r, norm_kind })
    }

    /// `∫ tr R`.
    pub fn total_trace(&self) -> f64 {
        let d = self.r.grid().dim();
        let s: f64 = (0..d).flat_map(|i| self.r.component(i * d + i).iter()).sum();
        s * self.r.grid().cell_volume()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefectRecovery {
    /// Least-norm solution before projection.
    pub raw: TorusField,
    pub projected: DefectField,
    /// `L²` distance between `raw` and its projection.
    pub projection_distance: f64,
    /// Largest `|⟨−raw, ∇ψ_j⟩ − r_j|`.
    pub constraint_error: f64,
    /// Multipliers of the Gram system.
    pub coefficients: Vec<f64>,
}

/// Cellwise weight matrices `M` (inverse applied during recovery).
fn weights(kind: &NormKind, grid_cells: usize, d: usize) -> Result<Vec<Vec<f64>>> {
    match kind {
        NormKind::L2 => Ok(vec![identity(d); grid_cells]),
        NormKind::LpDual { p } => {
            if !(p.is_finite() && *p >= 1.0) {
                return Err(Error::Parameter(format!("dual exponent p must be at least 1, got {p}")));
            }
            Ok(vec![identity(d); grid_cells])
        }
        NormKind::TraceD { director, k } => {
            if !(k.is_finite() && *k >= 0.0) {
                return Err(Error::Parameter("k must be non-negative".into()));
            }
            if director.rank() != Rank::Vector || director.grid().cells() != grid_cells {
                return Err(Error::Shape("director field does not match the defect grid".into()));
            }
            (0..grid_cells)
                .map(|c| {
                    let dv = crate::energy::unit_director(&director.cell(c))?;
                    let mut m = identity(d);
                    axpy(*k, &outer(&dv, &dv), &mut m);
                    Ok(m)
                })
                .collect()
        }
    }
}

/// Solves `min ‖R‖_M` subject to `−∫ R : ∇ψ_j = residual_j` for every basis gradient.
pub fn recover_defect(residuals: &[f64], basis: &[TorusField], norm_kind: NormKind) -> Result<DefectRecovery> {
    if basis.is_empty() || residuals.len() != basis.len() {
        return Err(Error::Shape(format!(
            "{} residuals for {} basis gradients",
            residuals.len(),
            basis.len()
        )));
    }
    let grid = *basis[0].grid();
    if basis.iter().any(|g| g.rank() != Rank::Matrix || !g.grid().same_shape(&grid)) {
        return Err(Error::Shape("basis gradients must be matrix fields on one grid".into()));
    }
    let d = grid.dim();
    let cells = grid.cells();
    let vol = grid.cell_volume();
    let ms = weights(&norm_kind, cells, d)?;
    let minv: Vec<DMatrix<f64>> = ms
        .iter()
        .map(|m| DMatrix::from_row_slice(d, d, m).try_inverse().expect("weight matrices are positive definite"))
        .collect();
    // W_j = G_j M⁻¹ cellwise.
    let weighted: Vec<TorusField> = basis
        .iter()
        .map(|g| {
            g.map_cells(Rank::Matrix, |cell, a, out| {
                let prod = DMatrix::from_row_slice(d, d, a) * &minv[cell];
                for i in 0..d {
                    for j in 0..d {
                        out[i * d + j] = prod[(i, j)];
                    }
                }
            })
        })
        .collect::<Result<_>>()?;
    let nb = basis.len();
    let mut gram = DMatrix::zeros(nb, nb);
    for j in 0..nb {
        for k in 0..=j {
            let v = dot(weighted[k].values(), basis[j].values()) * vol;
            gram[(j, k)] = v;
            gram[(k, j)] = v;
        }
    }
    let eig = SymmetricEigen::new(gram.clone());
    let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let lmin = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !(lmax > 0.0) || lmin < GRAM_CONDITION_LIMIT * lmax {
        return Err(Error::Conditioning(format!(
            "Gram matrix eigenvalues span [{lmin:e}, {lmax:e}]"
        )));
    }
    let c = gram
        .cholesky()
        .ok_or_else(|| Error::Conditioning("Gram matrix is not positive definite".into()))?
        .solve(&DVector::from_column_slice(residuals));
    let mut raw = TorusField::zeros(grid, Rank::Matrix);
    for (j, w) in weighted.iter().enumerate() {
        raw = raw.axpy(-c[j], w)?;
    }
    let constraint_error = basis
        .iter()
        .zip(residuals)
        .map(|(g, r)| (-dot(raw.values(), g.values()) * vol - r).abs())
        .fold(0.0, f64::max);
    let projected_field = raw.map_cells(Rank::Matrix, |_, a, out| out.copy_from_slice(&psd_projection(a)))?;
    let projection_distance = raw.sub(&projected_field)?.norm_l2();
    Ok(DefectRecovery {
        raw,
        projected: DefectField { r: projected_field, norm_kind },
        projection_distance,
        constraint_error,
        coefficients: c.iter().copied().collect(),
    })
}

/// Nearest symmetric positive semi-definite matrix in the Frobenius norm.
pub fn psd_projection(a: &[f64]) -> Vec<f64> {
    let (vals, vecs) = sym_eigen(a);
    let mut out = vec![0.0; a.len()];
    for (l, e) in vals.iter().zip(&vecs) {
        if *l > 0.0 {
            axpy(*l, &outer(e, e), &mut out);
        }
    }
    out
}

/// `Σ_{λ<0} (−λ) e⊗e` over the eigenpairs of the symmetric part.
pub fn negative_part(a: &[f64]) -> Vec<f64> {
    let (vals, vecs) = sym_eigen(a);
    let mut out = vec![0.0; a.len()];
    for (l, e) in vals.iter().zip(&vecs) {
        if *l < 0.0 {
            axpy(-*l, &outer(e, e), &mut out);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{gradient, TorusGrid};
    use std::f64::consts::PI;

    fn sine_gradient(grid: TorusGrid, k: f64) -> TorusField {
        let psi = TorusField::from_fn(grid, Rank::Vector, |x, o| {
            o[0] = (2.0 * PI * k * x[0]).sin();
            o[1] = (2.0 * PI * x[1]).cos();
        })
        .unwrap();
        gradient(&psi).unwrap()
    }

    #[test]
    fn zero_residuals_give_zero_defect() {
        let grid = TorusGrid::uniform(2, 8, 1.0).unwrap();
        let out = recover_defect(&[0.0, 0.0], &[sine_gradient(grid, 1.0), sine_gradient(grid, 2.0)], NormKind::L2).unwrap();
        assert_eq!(out.raw.max_abs(), 0.0);
    }

    #[test]
    fn single_mode_closed_form() {
        let grid = TorusGrid::uniform(2, 8, 1.0).unwrap();
        let g = sine_gradient(grid, 1.0);
        let r = 0.7;
        let out = recover_defect(&[r], std::slice::from_ref(&g), NormKind::L2).unwrap();
        let gg = dot(g.values(), g.values()) * grid.cell_volume();
        let expected = g.scale(-r / gg);
        assert!(out.raw.sub(&expected).unwrap().max_abs() < 1e-14);
        assert!(out.constraint_error < 1e-12);
    }

    #[test]
    fn dependent_basis_is_rejected() {
        let grid = TorusGrid::uniform(2, 8, 1.0).unwrap();
        let g = sine_gradient(grid, 1.0);
        let err = recover_defect(&[1.0, 2.0], &[g.clone(), g.scale(2.0)], NormKind::L2).unwrap_err();
        assert!(matches!(err, Error::Conditioning(_)));
    }

    #[test]
    fn projections() {
        let a = [1.0, 0.0, 0.0, -2.0];
        assert_eq!(psd_projection(&a), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(negative_part(&a), vec![0.0, 0.0, 0.0, 2.0]);
    }
}
