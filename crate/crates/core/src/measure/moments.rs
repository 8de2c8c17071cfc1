//! Atomic probability measures with prescribed first moment, flux moment and
//! energy, assembled by non-negative least squares over candidate atoms.

use nalgebra::{DMatrix, DVector};

use crate::energy::ConvexElasticModel;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::nnls::nnls;

/// Tolerance on the first-moment and flux-moment residuals.
pub const MOMENT_TOLERANCE: f64 = 1e-10;
/// Tolerance on the energy residual.
pub const ENERGY_TOLERANCE: f64 = 1e-8;

/// Convex density `η`, flux map `g` and the dual norm used to price flux defects.
pub trait MomentModel: Sync {
    fn state_dim(&self) -> usize;
    fn flux_dim(&self) -> usize;
    fn eta(&self, x: &[f64]) -> f64;
    fn flux(&self, x: &[f64], out: &mut [f64]);

    fn dual_norm(&self, y: &[f64]) -> f64 {
        norm(y)
    }

    /// A state near `around` whose flux equals `target`, when one is known.
    fn flux_preimage(&self, _target: &[f64], _around: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// `η(s) = s²` on the real line with no flux.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScalarToy;

impl MomentModel for ScalarToy {
    fn state_dim(&self) -> usize {
        1
    }
    fn flux_dim(&self) -> usize {
        0
    }
    fn eta(&self, x: &[f64]) -> f64 {
        x[0] * x[0]
    }
    fn flux(&self, _x: &[f64], _out: &mut [f64]) {}
}

/// States `(s, S)` flattened as `[s; S]`, `η = ½|s|² + G(S)`, `g = DG(S)`.
#[derive(Debug, Clone)]
pub struct ElasticMoments {
    pub model: ConvexElasticModel,
}

impl ElasticMoments {
    /// Minimizes `G(S) − A:S` by Newton's method, i.e. solves `DG(S) = A`.
    pub fn stress_preimage(&self, target: &[f64]) -> Option<Vec<f64>> {
        let n = target.len();
        let mut s = target.to_vec();
        for _ in 0..100 {
            let g = self.model.stress(&s);
            let r: Vec<f64> = g.iter().zip(target).map(|(a, b)| a - b).collect();
            if norm(&r) <= 1e-15 * (1.0 + norm(target)) {
                return Some(s);
            }
            let h = DMatrix::from_row_slice(n, n, &self.model.hessian(&s));
            let step = h.cholesky()?.solve(&DVector::from_vec(r));
            for k in 0..n {
                s[k] -= step[k];
            }
        }
        let g = self.model.stress(&s);
        let err: f64 = g.iter().zip(target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        (err <= 1e-12 * (1.0 + norm(target))).then_some(s)
    }
}

impl MomentModel for ElasticMoments {
    fn state_dim(&self) -> usize {
        let d = self.model.dim();
        d + d * d
    }
    fn flux_dim(&self) -> usize {
        self.model.components()
    }
    fn eta(&self, x: &[f64]) -> f64 {
        let d = self.model.dim();
        0.5 * dot(&x[..d], &x[..d]) + self.model.energy(&x[d..])
    }
    fn flux(&self, x: &[f64], out: &mut [f64]) {
        self.model.stress_into(&x[self.model.dim()..], out);
    }
    fn flux_preimage(&self, target: &[f64], around: &[f64]) -> Option<Vec<f64>> {
        let d = self.model.dim();
        let s = self.stress_preimage(target)?;
        let mut x = around[..d].to_vec();
        x.extend(s);
        Some(x)
    }
}

/// Which candidate set produced the measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchStage {
    Dirac,
    SymmetricPairs,
    Ladder,
    LadderWithGamma,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentResiduals {
    pub normalization: f64,
    pub mean: f64,
    pub flux: f64,
    pub energy: f64,
}

impl MomentResiduals {
    fn acceptable(&self) -> bool {
        self.normalization <= MOMENT_TOLERANCE
            && self.mean <= MOMENT_TOLERANCE
            && self.flux <= MOMENT_TOLERANCE
            && self.energy <= ENERGY_TOLERANCE
    }

    fn size(&self) -> f64 {
        self.normalization.max(self.mean).max(self.flux).max(self.energy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentMatch {
    /// `(weight, state)` pairs with positive weights summing to one.
    pub atoms: Vec<(f64, Vec<f64>)>,
    pub gamma: f64,
    pub residuals: MomentResiduals,
    pub stage: MatchStage,
    /// `η(mean) + ‖g_target − g(mean)‖ + surplus`.
    pub energy_target: f64,
}

struct Targets<'a> {
    mean: &'a [f64],
    flux: &'a [f64],
    energy: f64,
}

/// Finds `ν = Σ w_j δ_{x_j}` and `γ ≥ 0` with `⟨ν, id⟩ = mean`,
/// `⟨ν, g⟩ = g_target` and `⟨ν, η⟩ + γ = η(mean) + ‖g_target − g(mean)‖ + surplus`.
///
/// Candidate sets grow in stages (the mean alone, energy-matched symmetric
/// pairs, a radial ladder including flux preimages); `γ` is only introduced
/// when no atomic measure on the ladder matches the energy exactly.
pub fn match_moments<M: MomentModel + ?Sized>(
    model: &M,
    mean: &[f64],
    g_target: &[f64],
    surplus: f64,
    atom_budget: usize,
) -> Result<MomentMatch> {
    let n = model.state_dim();
    let m = model.flux_dim();
    if mean.len() != n || g_target.len() != m {
        return Err(Error::Shape(format!(
            "expected a mean of length {n} and a flux target of length {m}, got {} and {}",
            mean.len(),
            g_target.len()
        )));
    }
    if !(surplus.is_finite() && surplus >= 0.0) {
        return Err(Error::Parameter(format!("surplus must be non-negative, got {surplus}")));
    }
    if atom_budget < 3 {
        return Err(Error::Parameter("atom budget must be at least 3".into()));
    }
    let mut g_mean = vec![0.0; m];
    model.flux(mean, &mut g_mean);
    let gap: Vec<f64> = g_target.iter().zip(&g_mean).map(|(a, b)| a - b).collect();
    let eta_mean = model.eta(mean);
    let energy = eta_mean + model.dual_norm(&gap) + surplus;
    let targets = Targets { mean, flux: g_target, energy };
    let mut best = f64::INFINITY;

    let mut candidates = vec![mean.to_vec()];
    let attempt = |cands: &[Vec<f64>], with_gamma: bool, stage: MatchStage, best: &mut f64| -> Option<MomentMatch> {
        let found = solve_stage(model, cands, &targets, with_gamma, stage);
        *best = best.min(found.residuals.size());
        (found.residuals.acceptable() && found.atoms.len() <= atom_budget).then_some(found)
    };
    if let Some(found) = attempt(&candidates, false, MatchStage::Dirac, &mut best) {
        return Ok(found);
    }

    let excess = energy - eta_mean;
    let mut radii = Vec::with_capacity(n);
    if excess > 0.0 {
        for i in 0..n {
            if let Some(r) = pair_radius(model, mean, i, energy) {
                radii.push(r);
                for sign in [1.0, -1.0] {
                    let mut x = mean.to_vec();
                    x[i] += sign * r;
                    candidates.push(x);
                }
            }
        }
        if let Some(found) = attempt(&candidates, false, MatchStage::SymmetricPairs, &mut best) {
            return Ok(found);
        }
    }

    let base = if radii.is_empty() { 1.0 + norm(mean) } else { radii.iter().copied().fold(0.0, f64::max) };
    for k in -4..=3 {
        let r = base * 2f64.powi(k);
        for i in 0..n {
            for sign in [1.0, -1.0] {
                let mut x = mean.to_vec();
                x[i] += sign * r;
                candidates.push(x);
            }
        }
    }
    if m > 0 {
        if let Some(p) = model.flux_preimage(g_target, mean) {
            for t in [-3.0, -2.0, -1.0, -0.5, 0.5, 1.0, 1.5, 2.0, 3.0] {
                candidates.push(mean.iter().zip(&p).map(|(a, b)| a + t * (b - a)).collect());
            }
            // Reflections of the preimage about the mean along each axis.
            for i in 0..n {
                let mut x = p.clone();
                x[i] = 2.0 * mean[i] - p[i];
                candidates.push(x);
            }
        }
    }
    if let Some(found) = attempt(&candidates, false, MatchStage::Ladder, &mut best) {
        return Ok(found);
    }
    if let Some(found) = attempt(&candidates, true, MatchStage::LadderWithGamma, &mut best) {
        return Ok(found);
    }
    Err(Error::Infeasible { residual: best })
}

/// Radius `r` with `½(η(m + r e_i) + η(m − r e_i)) = target`, by bisection.
fn pair_radius<M: MomentModel + ?Sized>(model: &M, mean: &[f64], i: usize, target: f64) -> Option<f64> {
    let phi = |r: f64| {
        let mut a = mean.to_vec();
        let mut b = mean.to_vec();
        a[i] += r;
        b[i] -= r;
        0.5 * (model.eta(&a) + model.eta(&b))
    };
    let mut hi = 1.0;
    let mut grow = 0;
    while phi(hi) < target {
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return None;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    let r = 0.5 * (lo + hi);
    (r > 0.0).then_some(r)
}

fn solve_stage<M: MomentModel + ?Sized>(
    model: &M,
    cands: &[Vec<f64>],
    t: &Targets,
    with_gamma: bool,
    stage: MatchStage,
) -> MomentMatch {
    let n = model.state_dim();
    let m = model.flux_dim();
    let rows = 2 + n + m;
    let cols = cands.len() + usize::from(with_gamma);
    let mut a = DMatrix::zeros(rows, cols);
    let mut g = vec![0.0; m];
    for (j, x) in cands.iter().enumerate() {
        a[(0, j)] = 1.0;
        for k in 0..n {
            a[(1 + k, j)] = x[k];
        }
        model.flux(x, &mut g);
        for k in 0..m {
            a[(1 + n + k, j)] = g[k];
        }
        a[(rows - 1, j)] = model.eta(x);
    }
    if with_gamma {
        a[(rows - 1, cols - 1)] = 1.0;
    }
    let mut b = DVector::zeros(rows);
    b[0] = 1.0;
    for k in 0..n {
        b[1 + k] = t.mean[k];
    }
    for k in 0..m {
        b[1 + n + k] = t.flux[k];
    }
    b[rows - 1] = t.energy;
    let sol = nnls(&a, &b, 10 * cols + 50);

    let total: f64 = (0..cands.len()).map(|j| sol.x[j]).sum();
    let mut atoms = Vec::new();
    if total > 0.0 {
        for (j, x) in cands.iter().enumerate() {
            if sol.x[j] > 0.0 {
                atoms.push((sol.x[j] / total, x.clone()));
            }
        }
    }
    let gamma = if with_gamma { sol.x[cols - 1] } else { 0.0 };
    let residuals = evaluate_residuals(model, &atoms, gamma, t);
    MomentMatch { atoms, gamma, residuals, stage, energy_target: t.energy }
}

fn evaluate_residuals<M: MomentModel + ?Sized>(
    model: &M,
    atoms: &[(f64, Vec<f64>)],
    gamma: f64,
    t: &Targets,
) -> MomentResiduals {
    let n = model.state_dim();
    let m = model.flux_dim();
    let mut w_sum = 0.0;
    let mut first = vec![0.0; n];
    let mut flux = vec![0.0; m];
    let mut energy = gamma;
    let mut g = vec![0.0; m];
    for (w, x) in atoms {
        w_sum += w;
        for k in 0..n {
            first[k] += w * x[k];
        }
        model.flux(x, &mut g);
        for k in 0..m {
            flux[k] += w * g[k];
        }
        energy += w * model.eta(x);
    }
    let max_diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    MomentResiduals {
        normalization: (w_sum - 1.0).abs(),
        mean: max_diff(&first, t.mean),
        flux: max_diff(&flux, t.flux),
        energy: (energy - t.energy).abs(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirac_when_nothing_to_match() {
        let model = ElasticMoments { model: ConvexElasticModel::regularized(1, 0.3).unwrap() };
        let mean = [0.2, 1.4];
        let mut g = [0.0];
        model.flux(&mean, &mut g);
        let out = match_moments(&model, &mean, &g, 0.0, 3).unwrap();
        assert_eq!(out.stage, MatchStage::Dirac);
        assert_eq!(out.atoms, vec![(1.0, mean.to_vec())]);
        assert_eq!(out.gamma, 0.0);
    }

    #[test]
    fn scalar_toy_gives_symmetric_pair() {
        let out = match_moments(&ScalarToy, &[0.0], &[], 1.0, 3).unwrap();
        assert_eq!(out.gamma, 0.0);
        assert_eq!(out.atoms.len(), 2);
        for (w, x) in &out.atoms {
            assert!((w - 0.5).abs() < 1e-12);
            assert!((x[0].abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_surplus_is_rejected() {
        assert!(matches!(match_moments(&ScalarToy, &[0.0], &[], -1.0, 3), Err(Error::Parameter(_))));
    }

    #[test]
    fn stress_preimage_inverts_the_stress() {
        let em = ElasticMoments { model: ConvexElasticModel::regularized(2, 0.8).unwrap() };
        let target = [1.0, -0.5, 0.25, 2.0];
        let s = em.stress_preimage(&target).unwrap();
        let g = em.model.stress(&s);
        for (a, b) in g.iter().zip(&target) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
