use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::torus::{integrate, Rank, TorusField};

/// Multiplier applied to sampled convexity constants before they are used as
/// a verifier weight.
pub const SAFETY_MARGIN: f64 = 1.1;

const SAMPLING_SEED: u64 = 0x5eed_c0de;

/// Stored-energy densities on `d×d` matrices with Hessian eigenvalues in `[m, M]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConvexDensity {
    /// `½|F|²`.
    Quadratic,
    /// `½|F|² + δ(√(1+|F|²) − 1)`.
    Regularized { delta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexElasticModel {
    density: ConvexDensity,
    dim: usize,
}

/// Energy, first and second derivative at one point. The Hessian is stored
/// as an `n×n` row-major array over flattened matrix indices, `n = d²`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexEval {
    pub g: f64,
    pub dg: Vec<f64>,
    pub d2g: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityEstimate {
    pub min: f64,
    pub max: f64,
    pub samples: usize,
    pub radius: f64,
}

impl ConvexityEstimate {
    /// `M/m` inflated by [`SAFETY_MARGIN`].
    pub fn evi_weight(&self) -> f64 {
        SAFETY_MARGIN * self.max / self.min
    }
}

impl ConvexElasticModel {
    pub fn new(dim: usize, density: ConvexDensity) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Dimension(format!("model dimension must be 1, 2 or 3, got {dim}")));
        }
        if let ConvexDensity::Regularized { delta } = density {
            if !(delta.is_finite() && delta >= 0.0) {
                return Err(Error::Parameter(format!("delta must be finite and non-negative, got {delta}")));
            }
        }
        Ok(Self { density, dim })
    }

    pub fn quadratic(dim: usize) -> Result<Self> {
        Self::new(dim, ConvexDensity::Quadratic)
    }

    pub fn regularized(dim: usize, delta: f64) -> Result<Self> {
        Self::new(dim, ConvexDensity::Regularized { delta })
    }

    pub fn density(&self) -> ConvexDensity {
        self.density
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of matrix entries, `d²`.
    pub fn components(&self) -> usize {
        self.dim * self.dim
    }

    /// Short identifier used in file headers.
    pub fn id(&self) -> String {
        match self.density {
            ConvexDensity::Quadratic => "quadratic".into(),
            ConvexDensity::Regularized { delta } => format!("regularized(delta={delta:e})"),
        }
    }

    /// Exact Hessian eigenvalue bounds over all of matrix space.
    pub fn bounds(&self) -> (f64, f64) {
        match self.density {
            ConvexDensity::Quadratic => (1.0, 1.0),
            ConvexDensity::Regularized { delta } => (1.0, 1.0 + delta),
        }
    }

    pub fn energy(&self, f: &[f64]) -> f64 {
        let n2 = dot(f, f);
        match self.density {
            ConvexDensity::Quadratic => 0.5 * n2,
            ConvexDensity::Regularized { delta } => {
                // √(1+x) − 1 written as x / (√(1+x) + 1) keeps G(0) = 0 and small |F| accurate.
                0.5 * n2 + delta * n2 / ((1.0 + n2).sqrt() + 1.0)
            }
        }
    }

    pub fn stress_into(&self, f: &[f64], out: &mut [f64]) {
        match self.density {
            ConvexDensity::Quadratic => out.copy_from_slice(f),
            ConvexDensity::Regularized { delta } => {
                let c = 1.0 + delta / (1.0 + dot(f, f)).sqrt();
                for (o, x) in out.iter_mut().zip(f) {
                    *o = c * x;
                }
            }
        }
    }

    pub fn stress(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        self.stress_into(f, &mut out);
        out
    }

    /// `D²G(F)[X]`.
    pub fn hessian_apply(&self, f: &[f64], x: &[f64], out: &mut [f64]) {
        match self.density {
            ConvexDensity::Quadratic => out.copy_from_slice(x),
            ConvexDensity::Regularized { delta } => {
                let s = (1.0 + dot(f, f)).sqrt();
                let fx = dot(f, x);
                for i in 0..x.len() {
                    out[i] = x[i] + delta * (x[i] / s - f[i] * fx / (s * s * s));
                }
            }
        }
    }

    pub fn hessian(&self, f: &[f64]) -> Vec<f64> {
        let n = f.len();
        let mut h = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            self.hessian_apply(f, &e, &mut col);
            for i in 0..n {
                h[i * n + j] = col[i];
            }
        }
        h
    }

    pub fn eval(&self, f: &[f64]) -> ConvexEval {
        ConvexEval { g: self.energy(f), dg: self.stress(f), d2g: self.hessian(f) }
    }

    /// Per-cell `DG(F)` for a matrix field.
    pub fn stress_field(&self, f: &TorusField) -> Result<TorusField> {
        self.check_field(f)?;
        f.map_cells(Rank::Matrix, |_, a, out| self.stress_into(a, out))
    }

    /// Per-cell `G(F)`.
    pub fn energy_field(&self, f: &TorusField) -> Result<TorusField> {
        self.check_field(f)?;
        f.map_cells(Rank::Scalar, |_, a, out| out[0] = self.energy(a))
    }

    /// `∫ ½|v|² + G(F)`.
    pub fn total_energy(&self, v: &TorusField, f: &TorusField) -> Result<f64> {
        self.check_field(f)?;
        if v.rank() != Rank::Vector || !v.grid().same_shape(f.grid()) {
            return Err(Error::Shape("velocity must be a vector field on the deformation grid".into()));
        }
        let density = f.map_cells(Rank::Scalar, |cell, a, out| {
            let vv: f64 = (0..self.dim).map(|c| v.component(c)[cell].powi(2)).sum();
            out[0] = 0.5 * vv + self.energy(a);
        })?;
        integrate(&density)
    }

    fn check_field(&self, f: &TorusField) -> Result<()> {
        if f.rank() != Rank::Matrix {
            return Err(Error::UnsupportedRank(f.rank()));
        }
        if f.grid().dim() != self.dim {
            return Err(Error::Dimension(format!(
                "model is {}-dimensional, field grid is {}-dimensional",
                self.dim,
                f.grid().dim()
            )));
        }
        Ok(())
    }
}

/// Smallest and largest Hessian eigenvalue over `sample_count` points drawn
/// uniformly from the ball of the given radius (fixed internal seed).
pub fn estimate_convexity_constants(
    model: &ConvexElasticModel,
    sample_count: usize,
    radius: f64,
) -> Result<ConvexityEstimate> {
    if sample_count == 0 {
        return Err(Error::Parameter("sample_count must be at least 1".into()));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::Parameter(format!("radius must be positive, got {radius}")));
    }
    let n = model.components();
    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLING_SEED);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for _ in 0..sample_count {
        let mut f: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let len = dot(&f, &f).sqrt().max(f64::MIN_POSITIVE);
        let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
        f.iter_mut().for_each(|x| *x *= r / len);
        let h = model.hessian(&f);
        if h.iter().any(|x| !x.is_finite()) {
            return Err(Error::Evaluation("Hessian sample is not finite".into()));
        }
        let eig = SymmetricEigen::new(DMatrix::from_row_slice(n, n, &h));
        for &l in eig.eigenvalues.iter() {
            lo = lo.min(l);
            hi = hi.max(l);
        }
    }
    Ok(ConvexityEstimate { min: lo, max: hi, samples: sample_count, radius })
}
