//! Uniform periodic grids in one to three dimensions, cell-centred fields on
//! them, and the second-order central difference operators used everywhere
//! else in the crate.
//!
//! Fields are stored component-major: component `c` of cell `i` lives at
//! `values[c * cells + i]`. Matrix components are row-major, so entry
//! `(i, j)` is component `i * dim + j`. Cells are numbered with the first
//! axis varying fastest.
//!
//! Index conventions: `(∇f)_{ij} = ∂f_i/∂x_j`, `(div A)_i = Σ_j ∂A_{ij}/∂x_j`,
//! `(∇×d)_i = ε_{ijk} ∂_j d_k` and `(∇×A)_{ij} = ε_{jkl} ∂_k A_{il}`.

use crate::error::{Error, Result};

/// Smallest admissible number of cells per axis.
pub const MIN_EXTENT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusGrid {
    dim: usize,
    extent: [usize; 3],
    spacing: [f64; 3],
}

impl TorusGrid {
    /// Grid with `extent[a]` cells spanning a period of `period[a]` along each axis.
    pub fn new(extent: &[usize], period: &[f64]) -> Result<Self> {
        let dim = extent.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::Dimension(format!("grid dimension must be 1, 2 or 3, got {dim}")));
        }
        if period.len() != dim {
            return Err(Error::Shape(format!(
                "{} periods given for a {dim}-dimensional grid",
                period.len()
            )));
        }
        let mut e = [1usize; 3];
        let mut h = [1.0f64; 3];
        for a in 0..dim {
            if extent[a] < MIN_EXTENT {
                return Err(Error::Parameter(format!(
                    "extent along axis {a} is {}, need at least {MIN_EXTENT}",
                    extent[a]
                )));
            }
            if !(period[a].is_finite() && period[a] > 0.0) {
                return Err(Error::Parameter(format!("period along axis {a} must be positive")));
            }
            e[a] = extent[a];
            h[a] = period[a] / extent[a] as f64;
        }
        Ok(Self { dim, extent: e, spacing: h })
    }

    /// `n` cells per axis on a cube of side `period`.
    pub fn uniform(dim: usize, n: usize, period: f64) -> Result<Self> {
        Self::new(&vec![n; dim], &vec![period; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extent(&self) -> &[usize] {
        &self.extent[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    pub fn period(&self, axis: usize) -> f64 {
        self.spacing[axis] * self.extent[axis] as f64
    }

    pub fn cells(&self) -> usize {
        self.extent().iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn multi_index(&self, cell: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        let mut rest = cell;
        for a in 0..self.dim {
            idx[a] = rest % self.extent[a];
            rest /= self.extent[a];
        }
        idx
    }

    pub fn linear_index(&self, idx: [usize; 3]) -> usize {
        let mut cell = 0;
        for a in (0..self.dim).rev() {
            cell = cell * self.extent[a] + idx[a] % self.extent[a];
        }
        cell
    }

    /// Cell reached from `cell` by moving `offset` cells along `axis`, with wraparound.
    pub fn shift(&self, cell: usize, axis: usize, offset: isize) -> usize {
        let mut idx = self.multi_index(cell);
        let n = self.extent[axis] as isize;
        idx[axis] = (idx[axis] as isize + offset).rem_euclid(n) as usize;
        self.linear_index(idx)
    }

    /// Physical coordinates of the centre of `cell`; unused axes are zero.
    pub fn center(&self, cell: usize) -> [f64; 3] {
        let idx = self.multi_index(cell);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = (idx[a] as f64 + 0.5) * self.spacing[a];
        }
        x
    }

    /// Grid whose cells are `block`-wide blocks of this one's.
    pub fn coarsen(&self, block: usize) -> Result<Self> {
        if block == 0 {
            return Err(Error::Parameter("block must be at least 1".into()));
        }
        let mut extent = Vec::with_capacity(self.dim);
        let mut period = Vec::with_capacity(self.dim);
        for a in 0..self.dim {
            if self.extent[a] % block != 0 {
                return Err(Error::Parameter(format!(
                    "block {block} does not divide extent {} along axis {a}",
                    self.extent[a]
                )));
            }
            extent.push(self.extent[a] / block);
            period.push(self.period(a));
        }
        // Coarse grids may legitimately fall below MIN_EXTENT.
        let mut e = [1usize; 3];
        let mut h = [1.0f64; 3];
        for a in 0..self.dim {
            if extent[a] == 0 {
                return Err(Error::Parameter("coarse extent is zero".into()));
            }
            e[a] = extent[a];
            h[a] = period[a] / extent[a] as f64;
        }
        Ok(Self { dim: self.dim, extent: e, spacing: h })
    }

    /// Same dimension, extents and spacings.
    pub fn same_shape(&self, other: &TorusGrid) -> bool {
        self.dim == other.dim
            && self.extent() == other.extent()
            && self
                .spacing()
                .iter()
                .zip(other.spacing())
                .all(|(a, b)| (a - b).abs() <= 1e-14 * a.abs().max(b.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rank {
    Scalar,
    Vector,
    Matrix,
}

impl Rank {
    pub fn components(self, dim: usize) -> usize {
        match self {
            Rank::Scalar => 1,
            Rank::Vector => dim,
            Rank::Matrix => dim * dim,
        }
    }

    pub fn raised(self) -> Result<Rank> {
        match self {
            Rank::Scalar => Ok(Rank::Vector),
            Rank::Vector => Ok(Rank::Matrix),
            Rank::Matrix => Err(Error::UnsupportedRank(Rank::Matrix)),
        }
    }

    pub fn lowered(self) -> Result<Rank> {
        match self {
            Rank::Scalar => Err(Error::UnsupportedRank(Rank::Scalar)),
            Rank::Vector => Ok(Rank::Scalar),
            Rank::Matrix => Ok(Rank::Vector),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorusField {
    grid: TorusGrid,
    rank: Rank,
    values: Vec<f64>,
}

impl TorusField {
    pub fn zeros(grid: TorusGrid, rank: Rank) -> Self {
        let len = grid.cells() * rank.components(grid.dim());
        Self { grid, rank, values: vec![0.0; len] }
    }

    /// Field with every cell set to `value` (length must match the rank).
    pub fn constant(grid: TorusGrid, rank: Rank, value: &[f64]) -> Result<Self> {
        if value.len() != rank.components(grid.dim()) {
            return Err(Error::Shape(format!("constant value has {} entries", value.len())));
        }
        Self::from_fn(grid, rank, |_, out| out.copy_from_slice(value))
    }

    /// Samples `f(x, out)` at every cell centre. Panics in `f` on a wrong
    /// output length are avoided by handing it a slice of the right size.
    pub fn from_fn<F>(grid: TorusGrid, rank: Rank, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64; 3], &mut [f64]),
    {
        let nc = rank.components(grid.dim());
        let cells = grid.cells();
        let mut values = vec![0.0; nc * cells];
        let mut buf = vec![0.0; nc];
        for cell in 0..cells {
            f(&grid.center(cell), &mut buf);
            for (c, v) in buf.iter().enumerate() {
                values[c * cells + cell] = *v;
            }
        }
        Self::from_values(grid, rank, values)
    }

    pub fn from_values(grid: TorusGrid, rank: Rank, values: Vec<f64>) -> Result<Self> {
        let expected = grid.cells() * rank.components(grid.dim());
        if values.len() != expected {
            return Err(Error::Shape(format!(
                "{} values supplied, {expected} expected for a {rank:?} field",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Evaluation(format!("field entry {pos} is not finite")));
        }
        Ok(Self { grid, rank, values })
    }

    /// Builds a field cell by cell from per-cell value vectors.
    pub fn from_cells<'a, I>(grid: TorusGrid, rank: Rank, cells: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let nc = rank.components(grid.dim());
        let n = grid.cells();
        let mut values = vec![0.0; nc * n];
        let mut count = 0;
        for (cell, v) in cells.into_iter().enumerate() {
            if v.len() != nc || cell >= n {
                return Err(Error::Shape("per-cell value list does not match the grid".into()));
            }
            for c in 0..nc {
                values[c * n + cell] = v[c];
            }
            count += 1;
        }
        if count != n {
            return Err(Error::Shape(format!("{count} cells supplied, {n} expected")));
        }
        Self::from_values(grid, rank, values)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn rank(&self) -> Rank {
        self.rank
    }

    pub fn components(&self) -> usize {
        self.rank.components(self.grid.dim())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.grid.cells();
        &self.values[c * n..(c + 1) * n]
    }

    pub(crate) fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.grid.cells();
        &mut self.values[c * n..(c + 1) * n]
    }

    /// Copies the components of `cell` into `out`.
    pub fn read_cell(&self, cell: usize, out: &mut [f64]) {
        let n = self.grid.cells();
        for (c, o) in out.iter_mut().enumerate().take(self.components()) {
            *o = self.values[c * n + cell];
        }
    }

    pub fn cell(&self, cell: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.components()];
        self.read_cell(cell, &mut out);
        out
    }

    pub(crate) fn write_cell(&mut self, cell: usize, v: &[f64]) {
        let n = self.grid.cells();
        for (c, x) in v.iter().enumerate() {
            self.values[c * n + cell] = *x;
        }
    }

    /// Applies `f(input, output)` cell by cell, producing a field of rank `rank`.
    pub fn map_cells<F>(&self, rank: Rank, mut f: F) -> Result<TorusField>
    where
        F: FnMut(usize, &[f64], &mut [f64]),
    {
        let mut out = TorusField::zeros(self.grid, rank);
        let mut a = vec![0.0; self.components()];
        let mut b = vec![0.0; out.components()];
        for cell in 0..self.grid.cells() {
            self.read_cell(cell, &mut a);
            b.iter_mut().for_each(|x| *x = 0.0);
            f(cell, &a, &mut b);
            out.write_cell(cell, &b);
        }
        if out.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation("cellwise map produced a non-finite value".into()));
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    fn check_compatible(&self, other: &TorusField) -> Result<()> {
        if self.rank != other.rank || !self.grid.same_shape(&other.grid) {
            return Err(Error::Shape("fields live on different grids or have different ranks".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &TorusField) -> Result<TorusField> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &TorusField) -> Result<TorusField> {
        self.axpy(-1.0, other)
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &TorusField) -> Result<TorusField> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| x + a * y).collect();
        Ok(TorusField { grid: self.grid, rank: self.rank, values })
    }

    pub fn scale(&self, a: f64) -> TorusField {
        TorusField {
            grid: self.grid,
            rank: self.rank,
            values: self.values.iter().map(|x| a * x).collect(),
        }
    }

    /// `∫ f : g` by midpoint quadrature (full contraction over components).
    pub fn inner(&self, other: &TorusField) -> Result<f64> {
        self.check_compatible(other)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(x, y)| x * y).sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn norm_l2(&self) -> f64 {
        (self.values.iter().map(|x| x * x).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    /// Field translated by `k` cells along `axis`: `out[i] = self[i - k]`.
    pub fn shifted(&self, axis: usize, k: isize) -> TorusField {
        let mut out = self.clone();
        let n = self.grid.cells();
        for c in 0..self.components() {
            let src = self.component(c);
            let dst = &mut out.values[c * n..(c + 1) * n];
            for (cell, d) in dst.iter_mut().enumerate() {
                *d = src[self.grid.shift(cell, axis, -k)];
            }
        }
        out
    }
}

/// Central difference `∂_axis u` of one scalar component with periodic wraparound.
pub fn partial_into(grid: &TorusGrid, u: &[f64], axis: usize, out: &mut [f64]) {
    let inv = 0.5 / grid.spacing[axis];
    let stride: usize = grid.extent[..axis].iter().product();
    let n = grid.extent[axis];
    let block = stride * n;
    for base in (0..u.len()).step_by(block) {
        for i in 0..n {
            let ip = if i + 1 == n { 0 } else { i + 1 };
            let im = if i == 0 { n - 1 } else { i - 1 };
            for s in 0..stride {
                out[base + i * stride + s] =
                    (u[base + ip * stride + s] - u[base + im * stride + s]) * inv;
            }
        }
    }
}

fn partial_add(grid: &TorusGrid, u: &[f64], axis: usize, sign: f64, out: &mut [f64], scratch: &mut [f64]) {
    partial_into(grid, u, axis, scratch);
    for (o, s) in out.iter_mut().zip(scratch.iter()) {
        *o += sign * s;
    }
}

/// Central-difference gradient; raises the rank by one.
pub fn gradient(f: &TorusField) -> Result<TorusField> {
    let grid = *f.grid();
    let d = grid.dim();
    let rank = f.rank().raised()?;
    let mut out = TorusField::zeros(grid, rank);
    for i in 0..f.components() {
        for j in 0..d {
            let src = f.component(i).to_vec();
            partial_into(&grid, &src, j, out.component_mut(i * d + j));
        }
    }
    Ok(out)
}

/// Central-difference divergence; lowers the rank by one (row-wise for matrices).
pub fn divergence(f: &TorusField) -> Result<TorusField> {
    let grid = *f.grid();
    let d = grid.dim();
    let rank = f.rank().lowered()?;
    let mut out = TorusField::zeros(grid, rank);
    let mut scratch = vec![0.0; grid.cells()];
    let rows = out.components();
    for i in 0..rows {
        let mut acc = vec![0.0; grid.cells()];
        for j in 0..d {
            let c = if f.rank() == Rank::Vector { j } else { i * d + j };
            partial_add(&grid, f.component(c), j, 1.0, &mut acc, &mut scratch);
        }
        out.component_mut(i).copy_from_slice(&acc);
    }
    Ok(out)
}

/// `∇·∇` with the wide central stencil.
pub fn laplacian(f: &TorusField) -> Result<TorusField> {
    divergence(&gradient(f)?)
}

/// Levi–Civita symbol on indices `0..3`.
pub fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

fn require_3d(grid: &TorusGrid) -> Result<()> {
    if grid.dim() != 3 {
        return Err(Error::Dimension(format!("operation needs a 3-dimensional grid, got {}", grid.dim())));
    }
    Ok(())
}

/// Discrete curl of a vector or matrix field on a 3-d grid.
pub fn curl(f: &TorusField) -> Result<TorusField> {
    let grid = *f.grid();
    require_3d(&grid)?;
    let n = grid.cells();
    let mut scratch = vec![0.0; n];
    match f.rank() {
        Rank::Vector => {
            let mut out = TorusField::zeros(grid, Rank::Vector);
            for i in 0..3 {
                let mut acc = vec![0.0; n];
                for j in 0..3 {
                    for k in 0..3 {
                        let e = levi_civita(i, j, k);
                        if e != 0.0 {
                            partial_add(&grid, f.component(k), j, e, &mut acc, &mut scratch);
                        }
                    }
                }
                out.component_mut(i).copy_from_slice(&acc);
            }
            Ok(out)
        }
        Rank::Matrix => {
            let mut out = TorusField::zeros(grid, Rank::Matrix);
            for i in 0..3 {
                for j in 0..3 {
                    let mut acc = vec![0.0; n];
                    for k in 0..3 {
                        for l in 0..3 {
                            let e = levi_civita(j, k, l);
                            if e != 0.0 {
                                partial_add(&grid, f.component(i * 3 + l), k, e, &mut acc, &mut scratch);
                            }
                        }
                    }
                    out.component_mut(i * 3 + j).copy_from_slice(&acc);
                }
            }
            Ok(out)
        }
        Rank::Scalar => Err(Error::UnsupportedRank(Rank::Scalar)),
    }
}

pub fn cross3(a: &[f64], b: &[f64]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// `(a × A)_{ij} = ε_{ikl} a_k A_{lj}` for a row-major 3×3 `A`.
pub fn cross_vec_mat(a: &[f64], m: &[f64]) -> [f64; 9] {
    let mut out = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            let mut s = 0.0;
            for k in 0..3 {
                for l in 0..3 {
                    let e = levi_civita(i, k, l);
                    if e != 0.0 {
                        s += e * a[k] * m[l * 3 + j];
                    }
                }
            }
            out[i * 3 + j] = s;
        }
    }
    out
}

/// Pointwise cross product of two vector fields on a 3-d grid.
pub fn cross(a: &TorusField, b: &TorusField) -> Result<TorusField> {
    require_3d(a.grid())?;
    if a.rank() != Rank::Vector || b.rank() != Rank::Vector || !a.grid().same_shape(b.grid()) {
        return Err(Error::Shape("cross needs two vector fields on one grid".into()));
    }
    let mut bv = [0.0; 3];
    a.map_cells(Rank::Vector, |cell, av, out| {
        b.read_cell(cell, &mut bv);
        out.copy_from_slice(&cross3(av, &bv));
    })
}

/// Pointwise `a × A` for a vector field `a` and matrix field `A` on a 3-d grid.
pub fn cross_matrix(a: &TorusField, m: &TorusField) -> Result<TorusField> {
    require_3d(a.grid())?;
    if a.rank() != Rank::Vector || m.rank() != Rank::Matrix || !a.grid().same_shape(m.grid()) {
        return Err(Error::Shape("cross_matrix needs a vector and a matrix field on one grid".into()));
    }
    let mut mv = [0.0; 9];
    a.map_cells(Rank::Matrix, |cell, av, out| {
        m.read_cell(cell, &mut mv);
        out.copy_from_slice(&cross_vec_mat(av, &mv));
    })
}

/// Midpoint quadrature `Σ f · cell volume` of a scalar field.
pub fn integrate(f: &TorusField) -> Result<f64> {
    if f.rank() != Rank::Scalar {
        return Err(Error::UnsupportedRank(f.rank()));
    }
    Ok(f.values().iter().sum::<f64>() * f.grid().cell_volume())
}
