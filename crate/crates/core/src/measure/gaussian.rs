//! Equally weighted Gaussian samples `S_j = A + d^{-1/2} Ξ_j B^{1/2}` whose
//! expected first and second moments are `A` and `AᵀA + B`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{axpy, matmul, outer, side, sym_eigen, transpose};

use crate::energy::is_psd;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMeasure {
    pub atoms: Vec<Vec<f64>>,
}

impl GaussianMeasure {
    pub fn weight(&self) -> f64 {
        1.0 / self.atoms.len() as f64
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.atoms[0].len()];
        for a in &self.atoms {
            axpy(self.weight(), a, &mut m);
        }
        m
    }

    /// `⟨ν, SᵀS⟩`.
    pub fn second_moment(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.atoms[0].len()];
        for a in &self.atoms {
            axpy(self.weight(), &matmul(&transpose(a), a), &mut m);
        }
        m
    }
}

/// Symmetric square root of a PSD matrix.
pub fn psd_sqrt(b: &[f64]) -> Result<Vec<f64>> {
    if !is_psd(b) {
        return Err(Error::Domain("covariance must be symmetric positive semi-definite".into()));
    }
    let (vals, vecs) = sym_eigen(b);
    let mut out = vec![0.0; b.len()];
    for (l, e) in vals.iter().zip(&vecs) {
        if *l > 0.0 {
            axpy(l.sqrt(), &outer(e, e), &mut out);
        }
    }
    Ok(out)
}

/// `AᵀA + B`, the exact expected second moment.
pub fn exact_second_moment(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut m = matmul(&transpose(a), a);
    axpy(1.0, b, &mut m);
    m
}

pub fn gaussian_measure(a: &[f64], b: &[f64], sample_count: usize, seed: u64) -> Result<GaussianMeasure> {
    if sample_count == 0 {
        return Err(Error::Parameter("sample_count must be at least 1".into()));
    }
    if a.len() != b.len() {
        return Err(Error::Shape("mean and covariance must have the same size".into()));
    }
    let d = side(a);
    let root = psd_sqrt(b)?;
    let scale = 1.0 / (d as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut atoms = Vec::with_capacity(sample_count);
    let mut xi = vec![0.0; d * d];
    for _ in 0..sample_count {
        xi.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
        let mut s = a.to_vec();
        axpy(scale, &matmul(&xi, &root), &mut s);
        atoms.push(s);
    }
    Ok(GaussianMeasure { atoms })
}
