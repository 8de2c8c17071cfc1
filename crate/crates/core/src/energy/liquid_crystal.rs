//! Oseen–Frank energy with `K1 = K2`, `K4 = 0`, and the Ericksen and Leslie
//! stresses of the director model.
//!
//! Gradients follow the crate convention `(∇d)_{ij} = ∂_j d_i`, so the
//! directional derivative `(d·∇)d` is the matrix-vector product `∇d d`.

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, matmul, matvec, outer, skw, sym, transpose, vecmat};
use crate::torus::levi_civita;

use super::polyconvex::Mat3;

/// Allowed deviation of `|d|` from one.
pub const UNIT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiquidCrystalModel {
    pub k1: f64,
    pub k3: f64,
    pub lambda: f64,
    pub mu1: f64,
    pub mu4: f64,
    pub mu5: f64,
    pub mu6: f64,
}

/// Oseen–Frank energy at one point in both forms, plus its partial derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct OseenFrank {
    /// Reduced form `K1/2 |∇d|² + k/2 |∇d d|²`; this is the energy used everywhere.
    pub value: f64,
    /// `∂F/∂∇d = K1 ∇d + k (∇d d) ⊗ d`.
    pub d_grad: Mat3,
    /// `∂F/∂d = k (∇dᵀ ∇d) d`.
    pub d_dir: [f64; 3],
    /// Splay, twist and bend terms plus the saddle-splay null Lagrangian with
    /// coefficient `K1`; equal to the reduced form whenever `∇dᵀ d = 0`.
    pub full: f64,
    pub reduced: f64,
    /// `tr(∇d²) − (div d)²`, which integrates to zero on the torus.
    pub saddle_splay: f64,
}

impl OseenFrank {
    /// Splay, twist and bend terms alone (`K4 = 0` taken pointwise).
    pub fn without_saddle_splay(&self, k1: f64) -> f64 {
        self.full - 0.5 * k1 * self.saddle_splay
    }
}

impl LiquidCrystalModel {
    pub fn new(k1: f64, k3: f64, lambda: f64, mu1: f64, mu4: f64, mu5: f64, mu6: f64) -> Result<Self> {
        let m = Self { k1, k3, lambda, mu1, mu4, mu5, mu6 };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.k1, self.k3, self.lambda, self.mu1, self.mu4, self.mu5, self.mu6];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parameter("liquid-crystal coefficients must be finite".into()));
        }
        if !(0.0 < self.k1 && self.k1 < self.k3) {
            return Err(Error::Parameter(format!("need 0 < K1 < K3, got K1={} K3={}", self.k1, self.k3)));
        }
        let l2 = self.lambda * self.lambda;
        if self.mu4 <= 0.0 {
            return Err(Error::Parameter("need mu4 > 0".into()));
        }
        if self.mu5 + self.mu6 - l2 < 0.0 {
            return Err(Error::Parameter("need mu5 + mu6 - lambda^2 >= 0".into()));
        }
        if self.mu1 + l2 < 0.0 {
            return Err(Error::Parameter("need mu1 + lambda^2 >= 0".into()));
        }
        Ok(())
    }

    /// `k = K3 − K1`.
    pub fn k(&self) -> f64 {
        self.k3 - self.k1
    }

    pub fn oseen_frank(&self, d: &[f64], gd: &[f64]) -> Result<OseenFrank> {
        let d = unit_director(d)?;
        let k = self.k();
        let div = gd[0] + gd[4] + gd[8];
        let mut curl = [0.0; 3];
        for (i, c) in curl.iter_mut().enumerate() {
            for j in 0..3 {
                for l in 0..3 {
                    *c += levi_civita(i, j, l) * gd[l * 3 + j];
                }
            }
        }
        let twist = dot(&d, &curl);
        let dxc = crate::torus::cross3(&d, &curl);
        let tr_sq: f64 = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| gd[i * 3 + j] * gd[j * 3 + i]).sum();
        let saddle_splay = tr_sq - div * div;
        let full = 0.5 * self.k1 * div * div
            + 0.5 * self.k1 * twist * twist
            + 0.5 * self.k3 * dot(&dxc, &dxc)
            + 0.5 * self.k1 * saddle_splay;

        let gdd = matvec(gd, &d);
        let reduced = 0.5 * self.k1 * dot(gd, gd) + 0.5 * k * dot(&gdd, &gdd);

        let mut d_grad = [0.0; 9];
        for (o, g) in d_grad.iter_mut().zip(gd) {
            *o = self.k1 * g;
        }
        axpy(k, &outer(&gdd, &d), &mut d_grad);
        // k ∇dᵀ (∇d d)
        let v = vecmat(&gdd, gd);
        let d_dir = [k * v[0], k * v[1], k * v[2]];
        Ok(OseenFrank { value: reduced, d_grad, d_dir, full, reduced, saddle_splay })
    }

    /// `T^E = ∇dᵀ ∇d (K1 I + k d⊗d)`.
    pub fn ericksen_stress(&self, d: &[f64], gd: &[f64]) -> Result<Mat3> {
        let d = unit_director(d)?;
        let gtg = matmul(&transpose(gd), gd);
        let mut right = outer(&d, &d);
        right.iter_mut().for_each(|x| *x *= self.k());
        for i in 0..3 {
            right[i * 4] += self.k1;
        }
        Ok(to_mat3(&matmul(&gtg, &right)))
    }

    /// Leslie stress for velocity gradient `dv` and molecular field `q`.
    pub fn leslie_stress(&self, d: &[f64], dv: &[f64], q: &[f64]) -> Result<Mat3> {
        let d = unit_director(d)?;
        let l2 = self.lambda * self.lambda;
        let a = sym(dv);
        let ad = matvec(&a, &d);
        let dad = dot(&d, &ad);
        let mut t = vec![0.0; 9];
        axpy((self.mu1 + l2) * dad, &outer(&d, &d), &mut t);
        axpy(self.mu4, &a, &mut t);
        axpy(self.mu5 + self.mu6 - l2, &sym(&outer(&d, &ad)), &mut t);
        let dq = dot(&d, q);
        let proj_q: Vec<f64> = (0..3).map(|i| q[i] - d[i] * dq).collect();
        axpy(-self.lambda, &sym(&outer(&d, &proj_q)), &mut t);
        axpy(-1.0, &skw(&outer(&d, q)), &mut t);
        Ok(to_mat3(&t))
    }

    /// Both stresses at once.
    pub fn leslie_stress_eval(&self, d: &[f64], gd: &[f64], dv: &[f64], q: &[f64]) -> Result<(Mat3, Mat3)> {
        Ok((self.ericksen_stress(d, gd)?, self.leslie_stress(d, dv, q)?))
    }

    /// `(μ1+λ²)(d·Dd)² + μ4|D|² + (μ5+μ6−λ²)|Dd|²` with `D = (∇v)_sym`,
    /// which equals `T^L : ∇v` when `q = 0`.
    pub fn leslie_dissipation(&self, d: &[f64], dv: &[f64]) -> f64 {
        let l2 = self.lambda * self.lambda;
        let a = sym(dv);
        let ad = matvec(&a, d);
        let dad = dot(d, &ad);
        (self.mu1 + l2) * dad * dad + self.mu4 * dot(&a, &a) + (self.mu5 + self.mu6 - l2) * dot(&ad, &ad)
    }
}

/// Renormalizes `d` when `||d| − 1| ≤ UNIT_TOLERANCE`, rejects it otherwise.
pub fn unit_director(d: &[f64]) -> Result<[f64; 3]> {
    if d.len() != 3 {
        return Err(Error::Shape(format!("director must have 3 components, got {}", d.len())));
    }
    let n = dot(d, d).sqrt();
    if !((n - 1.0).abs() <= UNIT_TOLERANCE) {
        return Err(Error::Constraint { norm: n });
    }
    Ok([d[0] / n, d[1] / n, d[2] / n])
}

fn to_mat3(v: &[f64]) -> Mat3 {
    let mut m = [0.0; 9];
    m.copy_from_slice(v);
    m
}
