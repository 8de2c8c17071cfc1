//! Determinant/cofactor kinematics of 3×3 deformation gradients and the
//! polyconvex example density `α|F|⁶ + |F|² + β|Z|³ + |Z|² + w²`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::torus::levi_civita;

pub type Mat3 = [f64; 9];

/// `cof F`, `det F` and their derivatives at one point. `dcof` is stored as
/// a 9×9 array with `dcof[(i*3+α)*9 + (j*3+β)] = ∂(cof F)_{iα}/∂F_{jβ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kinematics {
    pub cof: Mat3,
    pub det: f64,
    pub ddet: Mat3,
    pub dcof: [f64; 81],
}

/// `(cof F)_{iα} = ½ ε_{ijk} ε_{αβγ} F_{jβ} F_{kγ}`.
pub fn cofactor(f: &[f64]) -> Mat3 {
    let mut c = [0.0; 9];
    for i in 0..3 {
        for a in 0..3 {
            let mut s = 0.0;
            for j in 0..3 {
                for k in 0..3 {
                    let e1 = levi_civita(i, j, k);
                    if e1 == 0.0 {
                        continue;
                    }
                    for b in 0..3 {
                        for g in 0..3 {
                            let e2 = levi_civita(a, b, g);
                            if e2 != 0.0 {
                                s += e1 * e2 * f[j * 3 + b] * f[k * 3 + g];
                            }
                        }
                    }
                }
            }
            c[i * 3 + a] = 0.5 * s;
        }
    }
    c
}

/// `det F = ⅓ (cof F) : F`.
pub fn determinant(f: &[f64]) -> f64 {
    dot(&cofactor(f), f) / 3.0
}

pub fn polyconvex_kinematics(f: &[f64]) -> Kinematics {
    let cof = cofactor(f);
    let det = dot(&cof, f) / 3.0;
    let mut dcof = [0.0; 81];
    for i in 0..3 {
        for a in 0..3 {
            for j in 0..3 {
                for b in 0..3 {
                    let mut s = 0.0;
                    for k in 0..3 {
                        let e1 = levi_civita(i, j, k);
                        if e1 == 0.0 {
                            continue;
                        }
                        for g in 0..3 {
                            s += e1 * levi_civita(a, b, g) * f[k * 3 + g];
                        }
                    }
                    dcof[(i * 3 + a) * 9 + j * 3 + b] = s;
                }
            }
        }
    }
    Kinematics { cof, det, ddet: cof, dcof }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyPartials {
    pub df: Mat3,
    pub dz: Mat3,
    pub dw: f64,
}

/// Growth exponents of the density. `p` falls back to 2 when `α = 0`, which
/// is below the admissible range `p > 4`; `p_admissible` records that.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Growth {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub p_admissible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyconvexModel {
    alpha: f64,
    beta: f64,
}

impl PolyconvexModel {
    pub fn example(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0 && beta.is_finite() && beta >= 0.0) {
            return Err(Error::Parameter(format!(
                "alpha and beta must be non-negative, got {alpha} and {beta}"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn growth(&self) -> Growth {
        let p = if self.alpha > 0.0 { 6.0 } else { 2.0 };
        Growth { p, q: if self.beta > 0.0 { 3.0 } else { 2.0 }, r: 2.0, p_admissible: p > 4.0 }
    }

    /// Lower bound on the Hessian of the density in `(F, Z, w)`.
    pub fn convexity_margin(&self) -> f64 {
        2.0
    }

    pub fn value(&self, f: &[f64], z: &[f64], w: f64) -> f64 {
        let f2 = dot(f, f);
        let z2 = dot(z, z);
        self.alpha * f2 * f2 * f2 + f2 + self.beta * z2 * z2.sqrt() + z2 + w * w
    }

    pub fn partials(&self, f: &[f64], z: &[f64], w: f64) -> PolyPartials {
        let f2 = dot(f, f);
        let zn = dot(z, z).sqrt();
        let cf = 6.0 * self.alpha * f2 * f2 + 2.0;
        let cz = 3.0 * self.beta * zn + 2.0;
        let mut df = [0.0; 9];
        let mut dz = [0.0; 9];
        for k in 0..9 {
            df[k] = cf * f[k];
            dz[k] = cz * z[k];
        }
        PolyPartials { df, dz, dw: 2.0 * w }
    }

    /// `σ(F) = G(F, cof F, det F)`.
    pub fn sigma(&self, f: &[f64]) -> f64 {
        let cof = cofactor(f);
        self.value(f, &cof, dot(&cof, f) / 3.0)
    }

    /// `ζ_{iα} = ∂_F G + Σ ∂_{Z_{kγ}} G ε_{ijk} ε_{αβγ} F_{jβ} + (cof F)_{iα} ∂_w G`
    /// with all partials taken at `(F, cof F, det F)`.
    pub fn zeta(&self, f: &[f64]) -> Mat3 {
        let cof = cofactor(f);
        let det = dot(&cof, f) / 3.0;
        let p = self.partials(f, &cof, det);
        let mut out = [0.0; 9];
        for i in 0..3 {
            for a in 0..3 {
                let mut s = p.df[i * 3 + a] + cof[i * 3 + a] * p.dw;
                for j in 0..3 {
                    for k in 0..3 {
                        let e1 = levi_civita(i, j, k);
                        if e1 == 0.0 {
                            continue;
                        }
                        for b in 0..3 {
                            for g in 0..3 {
                                let e2 = levi_civita(a, b, g);
                                if e2 != 0.0 {
                                    s += p.dz[k * 3 + g] * e1 * e2 * f[j * 3 + b];
                                }
                            }
                        }
                    }
                }
                out[i * 3 + a] = s;
            }
        }
        out
    }

    /// `(|∂_F G|^{p/(p−1)} + |∂_Z G|^{p/(p−2)} + |∂_w G|^{p/(p−3)}) / (|F|^p + |Z|^q + |w|^r + 1)`.
    /// Uses `p = 6` in the dual exponents whatever `α` is, so the ratio stays
    /// meaningful for the flagged `α = 0` case.
    pub fn growth_ratio(&self, f: &[f64], z: &[f64], w: f64) -> f64 {
        let g = self.growth();
        let p = g.p.max(6.0);
        let d = self.partials(f, z, w);
        let num = dot(&d.df, &d.df).sqrt().powf(p / (p - 1.0))
            + dot(&d.dz, &d.dz).sqrt().powf(p / (p - 2.0))
            + d.dw.abs().powf(p / (p - 3.0));
        let den = dot(f, f).sqrt().powf(g.p) + dot(z, z).sqrt().powf(g.q) + w.abs().powf(g.r) + 1.0;
        num / den
    }

    /// Smallest `chord − midpoint − γ|Δ|²/8` over random segments in `(F, Z, w)`
    /// space; positive means every sampled segment passed.
    pub fn strict_convexity_slack(&self, segments: usize, radius: f64, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gamma = self.convexity_margin();
        let mut worst = f64::INFINITY;
        for _ in 0..segments {
            let a: Vec<f64> = (0..19).map(|_| radius * (2.0 * rng.random::<f64>() - 1.0)).collect();
            let b: Vec<f64> = (0..19).map(|_| radius * (2.0 * rng.random::<f64>() - 1.0)).collect();
            let m: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let eval = |x: &[f64]| self.value(&x[..9], &x[9..18], x[18]);
            let delta2: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
            let slack = 0.5 * (eval(&a) + eval(&b)) - eval(&m) - gamma * delta2 / 8.0;
            worst = worst.min(slack / (1.0 + eval(&a).abs() + eval(&b).abs()));
        }
        worst
    }
}
