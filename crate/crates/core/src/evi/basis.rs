//! Trigonometric test functions in space times piecewise-linear profiles in time.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::torus::{curl, divergence, gradient, levi_civita, Rank, TorusField, TorusGrid};

/// `cos(2π k·x/L)` or `sin(2π k·x/L)` for an integer wave vector `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrigMode {
    pub wave: [i32; 3],
    pub kind: TrigKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrigKind {
    Cos,
    Sin,
}

impl TrigMode {
    pub fn constant() -> Self {
        Self { wave: [0; 3], kind: TrigKind::Cos }
    }

    pub fn is_constant(&self) -> bool {
        self.wave == [0; 3]
    }

    /// Physical wave vector `2π k_a / L_a`.
    pub fn wave_vector(&self, grid: &TorusGrid) -> [f64; 3] {
        let mut w = [0.0; 3];
        for (a, x) in w.iter_mut().enumerate().take(grid.dim()) {
            *x = 2.0 * PI * self.wave[a] as f64 / grid.period(a);
        }
        w
    }

    pub fn value(&self, grid: &TorusGrid, x: &[f64; 3]) -> f64 {
        let w = self.wave_vector(grid);
        let phase: f64 = (0..grid.dim()).map(|a| w[a] * x[a]).sum();
        match self.kind {
            TrigKind::Cos => phase.cos(),
            TrigKind::Sin => phase.sin(),
        }
    }

    pub fn gradient(&self, grid: &TorusGrid, x: &[f64; 3]) -> [f64; 3] {
        let w = self.wave_vector(grid);
        let phase: f64 = (0..grid.dim()).map(|a| w[a] * x[a]).sum();
        let c = match self.kind {
            TrigKind::Cos => -phase.sin(),
            TrigKind::Sin => phase.cos(),
        };
        [c * w[0], c * w[1], c * w[2]]
    }

    /// All modes with `|k_a| ≤ max_index`, one representative of each `±k`
    /// pair, constant first.
    pub fn enumerate(dim: usize, max_index: u32) -> Vec<TrigMode> {
        let m = max_index as i32;
        let range = |a: usize| if a < dim { -m..=m } else { 0..=0 };
        let mut out = vec![TrigMode::constant()];
        for k0 in range(0) {
            for k1 in range(1) {
                for k2 in range(2) {
                    let wave = [k0, k1, k2];
                    let first = wave.iter().find(|k| **k != 0);
                    if matches!(first, Some(k) if *k > 0) {
                        out.push(TrigMode { wave, kind: TrigKind::Cos });
                        out.push(TrigMode { wave, kind: TrigKind::Sin });
                    }
                }
            }
        }
        out
    }
}

/// Which unknown a spatial mode is paired with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    /// `φ`, paired with the velocity.
    Velocity,
    /// `Ψ`, paired with the deformation gradient.
    Strain,
    /// `Ξ`, paired with the cofactor.
    Cofactor,
    /// `φ̃`, paired with the determinant.
    Determinant,
    /// `ζ`, paired with the director.
    Director,
    /// `ψ`, paired with the molecular field.
    Molecular,
}

impl Slot {
    pub fn rank(self) -> Rank {
        match self {
            Slot::Velocity | Slot::Director | Slot::Molecular => Rank::Vector,
            Slot::Strain | Slot::Cofactor => Rank::Matrix,
            Slot::Determinant => Rank::Scalar,
        }
    }
}

/// One trigonometric mode times a constant coefficient of the slot's rank.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMode {
    pub mode: TrigMode,
    pub slot: Slot,
    pub coefficient: Vec<f64>,
}

/// A finite sum of spatial modes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialFunction {
    pub label: String,
    pub modes: Vec<SpatialMode>,
}

impl SpatialFunction {
    pub fn zero() -> Self {
        Self { label: "zero".into(), modes: Vec::new() }
    }

    pub fn single(label: impl Into<String>, mode: SpatialMode) -> Self {
        Self { label: label.into(), modes: vec![mode] }
    }

    pub fn scaled(&self, a: f64) -> Self {
        let modes = self
            .modes
            .iter()
            .map(|m| SpatialMode { coefficient: m.coefficient.iter().map(|c| a * c).collect(), ..m.clone() })
            .collect();
        Self { label: format!("{}*{a}", self.label), modes }
    }

    pub fn uses(&self, slot: Slot) -> bool {
        self.modes.iter().any(|m| m.slot == slot)
    }
}

/// Time profile `θ ≥ 0` (custom profiles may take any sign), linear between nodes.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Constant,
    /// One at the given node, zero at every other node.
    Hat(usize),
    Custom(Vec<f64>),
}

impl Profile {
    pub fn values(&self, nodes: usize) -> Result<Vec<f64>> {
        match self {
            Profile::Constant => Ok(vec![1.0; nodes]),
            Profile::Hat(n) => {
                if *n >= nodes {
                    return Err(Error::Shape(format!("hat at node {n} on {nodes} nodes")));
                }
                let mut v = vec![0.0; nodes];
                v[*n] = 1.0;
                Ok(v)
            }
            Profile::Custom(v) => {
                if v.len() != nodes {
                    return Err(Error::Shape(format!("profile has {} values for {nodes} nodes", v.len())));
                }
                Ok(v.clone())
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Profile::Constant => "const".into(),
            Profile::Hat(n) => format!("hat{n}"),
            Profile::Custom(_) => "custom".into(),
        }
    }
}

/// How spatial derivatives of test functions are taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DerivativeMode {
    /// Grid operators applied to the sampled mode; summation by parts then
    /// holds exactly against the discrete dynamics.
    #[default]
    Discrete,
    /// Exact derivatives of the trigonometric mode sampled at cell centers.
    Analytic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestBasis {
    pub spatial: Vec<SpatialFunction>,
    pub profiles: Vec<Profile>,
    pub derivatives: DerivativeMode,
}

/// Options for [`TestBasis::trigonometric`].
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec {
    pub max_index: u32,
    pub slots: Vec<Slot>,
    /// Restrict velocity modes to divergence-free ones.
    pub divergence_free: bool,
    /// Add `−f` for every spatial function `f`.
    pub both_signs: bool,
    /// Hat profiles every `hat_stride` nodes (0 disables hats).
    pub hat_stride: usize,
    pub constant_profile: bool,
    pub derivatives: DerivativeMode,
}

impl Default for BasisSpec {
    fn default() -> Self {
        Self {
            max_index: 3,
            slots: vec![Slot::Velocity, Slot::Strain],
            divergence_free: false,
            both_signs: true,
            hat_stride: 1,
            constant_profile: true,
            derivatives: DerivativeMode::Discrete,
        }
    }
}

impl TestBasis {
    pub fn new(spatial: Vec<SpatialFunction>, profiles: Vec<Profile>, derivatives: DerivativeMode) -> Self {
        Self { spatial, profiles, derivatives }
    }

    /// Every trigonometric mode up to `max_index` in every listed slot, with
    /// each coefficient a unit vector or unit matrix; `nodes` is the number
    /// of trajectory nodes the hats live on.
    pub fn trigonometric(grid: &TorusGrid, nodes: usize, spec: &BasisSpec) -> Result<Self> {
        let dim = grid.dim();
        let mut spatial = Vec::new();
        for &slot in &spec.slots {
            for mode in TrigMode::enumerate(dim, spec.max_index) {
                let coefficients = if slot == Slot::Velocity && spec.divergence_free {
                    divergence_free_coefficients(grid, &mode)
                } else {
                    unit_coefficients(slot.rank().components(dim))
                };
                for (c, coefficient) in coefficients.into_iter().enumerate() {
                    let label = format!("{slot:?}{:?}{:?}#{c}", mode.kind, &mode.wave[..dim]);
                    let f = SpatialFunction::single(label, SpatialMode { mode, slot, coefficient });
                    if spec.both_signs {
                        let mut neg = f.scaled(-1.0);
                        neg.label = format!("-{}", f.label);
                        spatial.push(f);
                        spatial.push(neg);
                    } else {
                        spatial.push(f);
                    }
                }
            }
        }
        let mut profiles = Vec::new();
        if spec.constant_profile {
            profiles.push(Profile::Constant);
        }
        if spec.hat_stride > 0 {
            profiles.extend((0..nodes).step_by(spec.hat_stride).map(Profile::Hat));
        }
        Ok(Self { spatial, profiles, derivatives: spec.derivatives })
    }

    /// Checks `∫|div φ|² ≤ 1e-12` for every velocity mode.
    pub fn velocity_is_divergence_free(&self, grid: &TorusGrid) -> Result<bool> {
        for f in &self.spatial {
            let fields = TestFields::evaluate(f, grid, self.derivatives)?;
            if let Some(g) = &fields.grad_phi {
                let d = grid.dim();
                let div: f64 = (0..grid.cells())
                    .map(|c| {
                        let m = g.cell(c);
                        let t: f64 = (0..d).map(|i| m[i * d + i]).sum();
                        t * t
                    })
                    .sum::<f64>()
                    * grid.cell_volume();
                if div > 1e-12 {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

fn unit_coefficients(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        })
        .collect()
}

/// Unit vectors orthogonal to the wave vector (all unit vectors for the constant mode).
fn divergence_free_coefficients(grid: &TorusGrid, mode: &TrigMode) -> Vec<Vec<f64>> {
    let d = grid.dim();
    if mode.is_constant() {
        return unit_coefficients(d);
    }
    let w = mode.wave_vector(grid);
    let n = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
    let k = [w[0] / n, w[1] / n, w[2] / n];
    match d {
        1 => Vec::new(),
        2 => vec![vec![-k[1], k[0]]],
        _ => {
            // Two orthonormal directions spanning the plane normal to k.
            let pivot = if k[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
            let a = crate::torus::cross3(&k, &pivot);
            let an = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
            let a = [a[0] / an, a[1] / an, a[2] / an];
            let b = crate::torus::cross3(&k, &a);
            vec![a.to_vec(), b.to_vec()]
        }
    }
}

/// Sampled test fields and the derivatives the residuals need; absent slots are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFields {
    pub phi: Option<TorusField>,
    pub grad_phi: Option<TorusField>,
    pub psi: Option<TorusField>,
    pub div_psi: Option<TorusField>,
    pub xi: Option<TorusField>,
    pub curl_xi: Option<TorusField>,
    pub phit: Option<TorusField>,
    pub grad_phit: Option<TorusField>,
    pub zeta: Option<TorusField>,
    pub molecular: Option<TorusField>,
    pub grad_molecular: Option<TorusField>,
}

impl TestFields {
    pub fn evaluate(f: &SpatialFunction, grid: &TorusGrid, mode: DerivativeMode) -> Result<Self> {
        let sample = |slot: Slot| -> Result<Option<TorusField>> {
            let modes: Vec<&SpatialMode> = f.modes.iter().filter(|m| m.slot == slot).collect();
            if modes.is_empty() {
                return Ok(None);
            }
            let n = slot.rank().components(grid.dim());
            for m in &modes {
                if m.coefficient.len() != n {
                    return Err(Error::Shape(format!(
                        "{slot:?} coefficient has {} entries, expected {n}",
                        m.coefficient.len()
                    )));
                }
            }
            TorusField::from_fn(*grid, slot.rank(), |x, out| {
                out.iter_mut().for_each(|o| *o = 0.0);
                for m in &modes {
                    let s = m.mode.value(grid, x);
                    for (o, c) in out.iter_mut().zip(&m.coefficient) {
                        *o += s * c;
                    }
                }
            })
            .map(Some)
        };
        let d = grid.dim();
        // Analytic derivative of the slot's modes: `op(coefficient, ∇mode, out)`.
        let analytic = |slot: Slot, rank: Rank, op: &dyn Fn(&[f64], &[f64; 3], &mut [f64])| -> Result<TorusField> {
            let modes: Vec<&SpatialMode> = f.modes.iter().filter(|m| m.slot == slot).collect();
            let mut tmp = vec![0.0; rank.components(d)];
            TorusField::from_fn(*grid, rank, |x, out| {
                out.iter_mut().for_each(|o| *o = 0.0);
                for m in &modes {
                    let g = m.mode.gradient(grid, x);
                    op(&m.coefficient, &g, &mut tmp);
                    for (o, t) in out.iter_mut().zip(&tmp) {
                        *o += t;
                    }
                }
            })
        };
        let outer_grad = |c: &[f64], g: &[f64; 3], out: &mut [f64]| {
            let n = c.len();
            for i in 0..n {
                for j in 0..d {
                    out[i * d + j] = c[i] * g[j];
                }
            }
        };
        let phi = sample(Slot::Velocity)?;
        let psi = sample(Slot::Strain)?;
        let xi = sample(Slot::Cofactor)?;
        let phit = sample(Slot::Determinant)?;
        let zeta = sample(Slot::Director)?;
        let molecular = sample(Slot::Molecular)?;
        let (grad_phi, div_psi, curl_xi, grad_phit, grad_molecular) = match mode {
            DerivativeMode::Discrete => (
                phi.as_ref().map(gradient).transpose()?,
                psi.as_ref().map(divergence).transpose()?,
                xi.as_ref().map(curl).transpose()?,
                phit.as_ref().map(gradient).transpose()?,
                molecular.as_ref().map(gradient).transpose()?,
            ),
            DerivativeMode::Analytic => {
                let grad_phi = phi.as_ref().map(|_| analytic(Slot::Velocity, Rank::Matrix, &outer_grad)).transpose()?;
                let div_psi = psi
                    .as_ref()
                    .map(|_| {
                        analytic(Slot::Strain, Rank::Vector, &|c, g, out| {
                            for i in 0..d {
                                out[i] = (0..d).map(|j| c[i * d + j] * g[j]).sum();
                            }
                        })
                    })
                    .transpose()?;
                let curl_xi = match &xi {
                    Some(_) => {
                        if d != 3 {
                            return Err(Error::Dimension("curl needs a three-dimensional grid".into()));
                        }
                        Some(analytic(Slot::Cofactor, Rank::Matrix, &|c, g, out| {
                            for i in 0..3 {
                                for j in 0..3 {
                                    let mut s = 0.0;
                                    for k in 0..3 {
                                        for l in 0..3 {
                                            s += levi_civita(j, k, l) * g[k] * c[i * 3 + l];
                                        }
                                    }
                                    out[i * 3 + j] = s;
                                }
                            }
                        })?)
                    }
                    None => None,
                };
                let grad_phit = phit
                    .as_ref()
                    .map(|_| analytic(Slot::Determinant, Rank::Vector, &|c, g, out| out.copy_from_slice(&[c[0] * g[0], c[0] * g[1], c[0] * g[2]][..d])))
                    .transpose()?;
                let grad_molecular =
                    molecular.as_ref().map(|_| analytic(Slot::Molecular, Rank::Matrix, &outer_grad)).transpose()?;
                (grad_phi, div_psi, curl_xi, grad_phit, grad_molecular)
            }
        };
        Ok(Self { phi, grad_phi, psi, div_psi, xi, curl_xi, phit, grad_phit, zeta, molecular, grad_molecular })
    }
}
