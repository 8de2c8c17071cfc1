//! Lawson–Hanson active-set solver for `min |Ax − b|₂` subject to `x ≥ 0`.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution {
    pub x: DVector<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Solves the non-negative least-squares problem. `max_iter` bounds the
/// number of outer iterations (3n is ample in practice).
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>, max_iter: usize) -> NnlsSolution {
    let (m, n) = a.shape();
    assert_eq!(b.len(), m, "right-hand side length must match the row count");
    let scale = a.amax().max(b.amax()).max(1.0);
    let tol = 10.0 * f64::EPSILON * scale * (m.max(n) as f64);
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let mut iterations = 0;
    let mut w = a.tr_mul(&(b - a * &x));
    while iterations < max_iter {
        // Most promising inactive column.
        let mut best = None;
        let mut best_w = tol;
        for j in 0..n {
            if !passive[j] && w[j] > best_w {
                best_w = w[j];
                best = Some(j);
            }
        }
        let Some(j) = best else { break };
        passive[j] = true;
        loop {
            iterations += 1;
            let z = solve_passive(a, b, &passive);
            let feasible = (0..n).all(|k| !passive[k] || z[k] > 0.0);
            if feasible {
                x = z;
                break;
            }
            // Step back toward the feasible region until a passive entry hits zero.
            let mut alpha = f64::INFINITY;
            for k in 0..n {
                if passive[k] && z[k] <= 0.0 {
                    let denom = x[k] - z[k];
                    if denom > 0.0 {
                        alpha = alpha.min(x[k] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for k in 0..n {
                if passive[k] {
                    x[k] += alpha * (z[k] - x[k]);
                    if x[k] <= tol * 1e-3 {
                        x[k] = 0.0;
                        passive[k] = false;
                    }
                }
            }
            if iterations >= max_iter || !passive.iter().any(|p| *p) {
                break;
            }
        }
        w = a.tr_mul(&(b - a * &x));
    }
    let residual = (b - a * &x).norm();
    NnlsSolution { x, residual, iterations }
}

/// Unconstrained least squares restricted to the passive columns.
fn solve_passive(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let cols: Vec<usize> = (0..passive.len()).filter(|&k| passive[k]).collect();
    let sub = a.select_columns(&cols);
    let svd = sub.svd(true, true);
    let eps = f64::EPSILON * svd.singular_values.max() * (a.nrows().max(cols.len()) as f64);
    let sol = svd.solve(b, eps).unwrap_or_else(|_| DVector::zeros(cols.len()));
    let mut z = DVector::zeros(passive.len());
    for (i, &k) in cols.iter().enumerate() {
        z[k] = sol[i];
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_a_nonnegative_solution_exactly() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 2.0, 0.0, 1.0, 1.0, 1.0, 1.0, 0.0]);
        let x_true = DVector::from_vec(vec![0.5, 0.0, 1.5]);
        let b = &a * &x_true;
        let s = nnls(&a, &b, 100);
        assert!((s.x - x_true).amax() < 1e-12);
        assert!(s.residual < 1e-12);
    }

    #[test]
    fn clips_negative_unconstrained_solution() {
        let a = DMatrix::identity(2, 2);
        let b = DVector::from_vec(vec![-1.0, 2.0]);
        let s = nnls(&a, &b, 100);
        assert_eq!(s.x[0], 0.0);
        assert!((s.x[1] - 2.0).abs() < 1e-14);
        assert!((s.residual - 1.0).abs() < 1e-14);
    }

    #[test]
    fn underdetermined_system() {
        let a = DMatrix::from_row_slice(2, 4, &[1.0, 1.0, 1.0, 1.0, -1.0, 1.0, -2.0, 2.0]);
        let b = DVector::from_vec(vec![1.0, 0.0]);
        let s = nnls(&a, &b, 100);
        assert!(s.residual < 1e-13);
        assert!(s.x.iter().all(|v| *v >= 0.0));
    }
}
