//! Small dense linear-algebra helpers on top of nalgebra.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

/// Singular values below this use damped least squares.
pub const PINV_DAMPING_THRESHOLD: f64 = 1e-6;
/// Damping factor of the fallback.
pub const PINV_DAMPING: f64 = 1e-6;

/// Moore–Penrose pseudoinverse. Directions whose singular value falls below
/// [`PINV_DAMPING_THRESHOLD`] are inverted with damping `σ / (σ² + λ²)`.
pub fn pinv(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = a.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(c, r);
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let k = svd.singular_values.len();
    let mut out = DMatrix::zeros(c, r);
    let lambda2 = PINV_DAMPING * PINV_DAMPING;
    for i in 0..k {
        let s = svd.singular_values[i];
        let inv = if s > PINV_DAMPING_THRESHOLD { 1.0 / s } else { s / (s * s + lambda2) };
        if inv == 0.0 {
            continue;
        }
        out += vt.row(i).transpose() * u.column(i).transpose() * inv;
    }
    out
}

/// Smallest singular value (0 for empty matrices).
pub fn min_singular_value(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().singular_values();
    if sv.is_empty() {
        return 0.0;
    }
    sv.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Eigenvalues (descending) and eigenvectors (columns, same order) of a symmetric matrix.
pub fn symmetric_eigen_sorted(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap_or(core::cmp::Ordering::Equal));
    let values = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (k, &i) in idx.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
    }
    (values, vecs)
}

/// Pseudoinverse of a symmetric positive semi-definite matrix, keeping
/// eigenvalues at or above `floor`; returns the inverse and the kept rank.
pub fn spd_pinv(a: &DMatrix<f64>, floor: f64) -> (DMatrix<f64>, usize) {
    let (vals, vecs) = symmetric_eigen_sorted(a);
    let n = a.nrows();
    let mut out = DMatrix::zeros(n, n);
    let mut rank = 0;
    for (k, &v) in vals.iter().enumerate() {
        if v >= floor {
            rank += 1;
            let col = vecs.column(k);
            out += col * col.transpose() / v;
        }
    }
    (out, rank)
}

pub fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_full_rank_matrix() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, 3.0]);
        let p = pinv(&a);
        assert!((&a * &p - DMatrix::identity(2, 2)).norm() < 1e-12);
        assert!((&a * &p * &a - &a).norm() < 1e-12);
    }

    #[test]
    fn pinv_of_rank_deficient_matrix() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 0.0, 0.0]);
        let p = pinv(&a);
        assert!((&a * &p * &a - &a).norm() < 1e-10);
        assert!((&p * &a * &p - &p).norm() < 1e-10);
    }

    #[test]
    fn eigen_sorted_descending() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 5.0, 1.0, 0.0, 1.0, 5.0]);
        let (v, vecs) = symmetric_eigen_sorted(&a);
        assert!((v[0] - 6.0).abs() < 1e-12 && (v[1] - 4.0).abs() < 1e-12 && (v[2] - 2.0).abs() < 1e-12);
        for k in 0..3 {
            let col = vecs.column(k).into_owned();
            assert!((&a * &col - &col * v[k]).norm() < 1e-12);
        }
        let (inv, rank) = spd_pinv(&a, 1e-12);
        assert_eq!(rank, 3);
        assert!((&a * inv - DMatrix::identity(3, 3)).norm() < 1e-12);
    }
}
