//! Small dense helpers for row-major `d×d` matrices stored as flat slices.

use nalgebra::{DMatrix, SymmetricEigen};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Side length of a square matrix stored flat.
pub fn side(a: &[f64]) -> usize {
    let d = (a.len() as f64).sqrt().round() as usize;
    debug_assert_eq!(d * d, a.len());
    d
}

pub fn identity(d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = 1.0;
    }
    m
}

pub fn transpose(a: &[f64]) -> Vec<f64> {
    let d = side(a);
    let mut t = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            t[j * d + i] = a[i * d + j];
        }
    }
    t
}

pub fn matmul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let d = side(a);
    let mut c = vec![0.0; d * d];
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            for j in 0..d {
                c[i * d + j] += aik * b[k * d + j];
            }
        }
    }
    c
}

pub fn matvec(a: &[f64], x: &[f64]) -> Vec<f64> {
    let d = x.len();
    (0..d).map(|i| dot(&a[i * d..(i + 1) * d], x)).collect()
}

/// `xᵀ A`, i.e. `Aᵀ x`.
pub fn vecmat(x: &[f64], a: &[f64]) -> Vec<f64> {
    let d = x.len();
    (0..d).map(|j| (0..d).map(|i| x[i] * a[i * d + j]).sum()).collect()
}

pub fn outer(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut m = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            m.push(x * y);
        }
    }
    m
}

pub fn sym(a: &[f64]) -> Vec<f64> {
    let d = side(a);
    let mut s = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            s[i * d + j] = 0.5 * (a[i * d + j] + a[j * d + i]);
        }
    }
    s
}

pub fn skw(a: &[f64]) -> Vec<f64> {
    let d = side(a);
    let mut s = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            s[i * d + j] = 0.5 * (a[i * d + j] - a[j * d + i]);
        }
    }
    s
}

pub fn trace(a: &[f64]) -> f64 {
    let d = side(a);
    (0..d).map(|i| a[i * d + i]).sum()
}

pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn to_dmatrix(a: &[f64]) -> DMatrix<f64> {
    let d = side(a);
    DMatrix::from_row_slice(d, d, a)
}

pub fn from_dmatrix(m: &DMatrix<f64>) -> Vec<f64> {
    let (r, c) = m.shape();
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Largest singular value.
pub fn spectral_norm(a: &[f64]) -> f64 {
    let m = to_dmatrix(a);
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

/// Eigenvalues (ascending) and matching unit eigenvectors of the symmetric part of `a`.
pub fn sym_eigen(a: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = side(a);
    let eig = SymmetricEigen::new(to_dmatrix(&sym(a)));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    (values, vectors)
}

/// Largest absolute deviation from symmetry.
pub fn asymmetry(a: &[f64]) -> f64 {
    let d = side(a);
    let mut m = 0.0f64;
    for i in 0..d {
        for j in 0..i {
            m = m.max((a[i * d + j] - a[j * d + i]).abs());
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_pairs_reconstruct() {
        let a = [2.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 1.0];
        let (vals, vecs) = sym_eigen(&a);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let mut r = vec![0.0; 9];
        for (l, e) in vals.iter().zip(&vecs) {
            axpy(*l, &outer(e, e), &mut r);
        }
        for (x, y) in r.iter().zip(&a) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        assert!((spectral_norm(&[3.0, 0.0, 0.0, -4.0]) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn products() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(matmul(&a, &identity(2)), a.to_vec());
        assert_eq!(matvec(&a, &[1.0, 1.0]), vec![3.0, 7.0]);
        assert_eq!(vecmat(&[1.0, 1.0], &a), vec![4.0, 6.0]);
        assert_eq!(transpose(&a), vec![1.0, 3.0, 2.0, 4.0]);
        assert_eq!(trace(&a), 5.0);
    }
}
