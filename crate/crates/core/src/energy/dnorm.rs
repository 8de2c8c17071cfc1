//! Director-dependent matrix norm
//! `|A|_d² = max{ inf_λ |A − λ d⊗d|₂², (1/(k+1)) d·Ad }` and the dual
//! expression `tr A + k d·Ad` on symmetric positive semi-definite matrices.

use crate::error::{Error, Result};
use crate::linalg::{asymmetry, axpy, dot, matvec, outer, spectral_norm, sym_eigen, trace};

use super::liquid_crystal::unit_director;

/// Absolute tolerance on the minimizing multiplier.
pub const LAMBDA_TOLERANCE: f64 = 1e-12;

/// Largest negative eigenvalue magnitude (relative to the spectral norm) still
/// accepted as positive semi-definite.
pub const PSD_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DNorm {
    pub primal: f64,
    /// `None` when `A` is not symmetric positive semi-definite.
    pub dual_psd: Option<f64>,
}

/// `inf_λ |A − λ d⊗d|₂` by golden-section search on `[−2|A|₂, 2|A|₂]`.
pub fn projected_spectral_norm(d: &[f64], a: &[f64]) -> f64 {
    let dd = outer(d, d);
    let bound = 2.0 * spectral_norm(a);
    if bound == 0.0 {
        return 0.0;
    }
    let phi = |l: f64| {
        let mut m = a.to_vec();
        axpy(-l, &dd, &mut m);
        spectral_norm(&m)
    };
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (-bound, bound);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (phi(x1), phi(x2));
    while hi - lo > LAMBDA_TOLERANCE * (1.0 + bound) {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = phi(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = phi(x2);
        }
    }
    f1.min(f2).min(phi(0.5 * (lo + hi)))
}

pub fn d_norm_primal(d: &[f64], k: f64, a: &[f64]) -> Result<f64> {
    check_k(k)?;
    let d = unit_director(d)?;
    let first = projected_spectral_norm(&d, a);
    let second = dot(&d, &matvec(a, &d)) / (k + 1.0);
    Ok((first * first).max(second).max(0.0).sqrt())
}

/// `√(tr A + k d·Ad)`, defined only for symmetric positive semi-definite `A`.
pub fn d_norm_dual(d: &[f64], k: f64, a: &[f64]) -> Result<f64> {
    check_k(k)?;
    let d = unit_director(d)?;
    if !is_psd(a) {
        return Err(Error::Domain("dual d-norm is only defined for symmetric positive semi-definite matrices".into()));
    }
    Ok((trace(a) + k * dot(&d, &matvec(a, &d))).max(0.0).sqrt())
}

pub fn d_norm(d: &[f64], k: f64, a: &[f64]) -> Result<DNorm> {
    let primal = d_norm_primal(d, k, a)?;
    let dual_psd = match d_norm_dual(d, k, a) {
        Ok(v) => Some(v),
        Err(Error::Domain(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(DNorm { primal, dual_psd })
}

pub fn is_psd(a: &[f64]) -> bool {
    let scale = spectral_norm(a).max(1.0);
    if asymmetry(a) > 1e-12 * scale {
        return false;
    }
    let (vals, _) = sym_eigen(a);
    vals[0] >= -PSD_TOLERANCE * scale
}

fn check_k(k: f64) -> Result<()> {
    if !(k.is_finite() && k >= 0.0) {
        return Err(Error::Parameter(format!("k must be finite and non-negative, got {k}")));
    }
    Ok(())
}
