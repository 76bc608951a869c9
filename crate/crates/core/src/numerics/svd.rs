//! Thin singular value decomposition by one-sided Jacobi rotations.
//!
//! Deliberately a different algorithm family from the tridiagonal
//! eigensolver so the two can cross-check each other: POD eigenpairs are
//! validated against `svd` throughout the test suite.

use super::{dot, Matrix};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 60;

/// Thin SVD: `q = u * diag(s) * v^T` with `s` non-negative descending,
/// `u` is `m x k`, `v` is `n x k`, `k = min(m, n)`.
///
/// Columns of `u`/`v` paired with a zero singular value are zero vectors
/// (they span nothing and are not needed to reproduce `q`).
pub fn svd(q: &Matrix) -> Result<(Matrix, Vec<f64>, Matrix)> {
    if q.rows() >= q.cols() {
        svd_tall(q)
    } else {
        let (u, s, v) = svd_tall(&q.transpose())?;
        Ok((v, s, u))
    }
}

fn svd_tall(a: &Matrix) -> Result<(Matrix, Vec<f64>, Matrix)> {
    let n = a.cols();
    let mut u = a.clone();
    let mut v = Matrix::identity(n);
    let scale = a.max_abs();
    if scale == 0.0 {
        return Ok((Matrix::zeros(a.rows(), n), vec![0.0; n], Matrix::zeros(n, n)));
    }

    let eps = 1e-15;
    let mut converged = false;
    let mut sweeps = 0;
    while !converged {
        sweeps += 1;
        if sweeps > MAX_SWEEPS {
            return Err(Error::NonConvergence { op: "jacobi svd", iterations: sweeps - 1 });
        }
        converged = true;
        for i in 0..n {
            for j in (i + 1)..n {
                let aii = dot(u.col(i), u.col(i));
                let ajj = dot(u.col(j), u.col(j));
                let aij = dot(u.col(i), u.col(j));
                if aij.abs() <= eps * (aii * ajj).sqrt() || aij == 0.0 {
                    continue;
                }
                converged = false;
                let zeta = (ajj - aii) / (2.0 * aij);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_cols(&mut u, i, j, c, s);
                rotate_cols(&mut v, i, j, c, s);
            }
        }
    }

    let mut sv: Vec<(f64, usize)> = (0..n)
        .map(|i| (dot(u.col(i), u.col(i)).sqrt(), i))
        .collect();
    sv.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    let tiny = 1e-300;
    let mut s_out = vec![0.0; n];
    let mut u_out = Matrix::zeros(a.rows(), n);
    let mut v_out = Matrix::zeros(n, n);
    for (rank, &(sigma, col)) in sv.iter().enumerate() {
        s_out[rank] = sigma;
        if sigma > tiny {
            let inv = 1.0 / sigma;
            for (dst, &src) in u_out.col_mut(rank).iter_mut().zip(u.col(col)) {
                *dst = src * inv;
            }
            for (dst, &src) in v_out.col_mut(rank).iter_mut().zip(v.col(col)) {
                *dst = src;
            }
        }
    }
    Ok((u_out, s_out, v_out))
}

/// Apply the Givens rotation [c -s; s c] to columns (i, j).
fn rotate_cols(m: &mut Matrix, i: usize, j: usize, c: f64, s: f64) {
    let rows = m.rows();
    debug_assert!(i < j);
    // Split the storage so both columns can be borrowed mutably.
    let (left, right) = m.data_mut().split_at_mut(j * rows);
    let ci = &mut left[i * rows..(i + 1) * rows];
    let cj = &mut right[..rows];
    for (a, b) in ci.iter_mut().zip(cj.iter_mut()) {
        let x = *a;
        let y = *b;
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{sym_eig, SeededRng};

    fn reassemble(u: &Matrix, s: &[f64], v: &Matrix) -> Matrix {
        let mut us = u.clone();
        for (j, &sj) in s.iter().enumerate() {
            for val in us.col_mut(j) {
                *val *= sj;
            }
        }
        us.a_bt(v)
    }

    #[test]
    fn zero_matrix_has_zero_singular_values() {
        let (_, s, _) = svd(&Matrix::zeros(3, 4)).unwrap();
        assert!(s.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn diagonal_singular_values() {
        let mut q = Matrix::zeros(2, 2);
        q.set(0, 0, 3.0);
        q.set(1, 1, 2.0);
        let (u, s, v) = svd(&q).unwrap();
        assert!((s[0] - 3.0).abs() < 1e-12 && (s[1] - 2.0).abs() < 1e-12);
        let err = reassemble(&u, &s, &v).sub(&q).max_abs();
        assert!(err < 1e-12);
    }

    #[test]
    fn random_rect_reconstructs_both_orientations() {
        let mut rng = SeededRng::new(17);
        for &(m, n) in &[(8usize, 100usize), (100, 8), (5, 5)] {
            let q = Matrix::from_fn(m, n, |_, _| rng.uniform(-1.0, 1.0));
            let (u, s, v) = svd(&q).unwrap();
            let rel = reassemble(&u, &s, &v).sub(&q).frobenius_norm() / q.frobenius_norm();
            assert!(rel < 1e-10, "{m}x{n}: relative error {rel}");
            for w in s.windows(2) {
                assert!(w[0] >= w[1]);
            }
            let k = m.min(n);
            let utu = u.at_b(&u);
            assert!(utu.sub(&Matrix::identity(k)).max_abs() < 1e-10);
        }
    }

    #[test]
    fn squared_singular_values_match_covariance_eigenvalues() {
        // Dual-route check: svd(Q) vs sym_eig(Q Q^T / (nt - 1)).
        let mut rng = SeededRng::new(23);
        let (n, nt) = (8, 100);
        let q = Matrix::from_fn(n, nt, |_, _| rng.normal());
        let (_, s, _) = svd(&q).unwrap();
        let mut c = q.a_bt(&q);
        c.scale(1.0 / (nt as f64 - 1.0));
        let (vals, _) = sym_eig(&c).unwrap();
        for i in 0..n {
            let from_svd = s[i] * s[i] / (nt as f64 - 1.0);
            assert!(
                (from_svd - vals[i]).abs() < 1e-8 * vals[0],
                "eigenvalue {i}: svd route {from_svd} vs eig route {}",
                vals[i]
            );
        }
    }
}
