//! Symmetric eigendecomposition: Householder reduction to tridiagonal form
//! followed by the implicit-shift QL iteration (the classic EISPACK
//! tred2/tql2 pair). Eigenvalues are returned in descending order with the
//! matching orthonormal eigenvectors as matrix columns.

use super::Matrix;
use crate::error::{Error, Result};

const MAX_QL_ITERATIONS: usize = 64;

/// Decompose a square symmetric matrix `c` into eigenvalues (descending)
/// and an orthonormal eigenvector matrix whose column `i` pairs with
/// eigenvalue `i`.
///
/// Fails on non-square or asymmetric input (tolerance `1e-10 * max|c|`) and
/// when the QL iteration does not converge.
pub fn sym_eig(c: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = c.rows();
    if n != c.cols() {
        return Err(Error::Contract(format!(
            "sym_eig needs a square matrix, got {}x{}",
            c.rows(),
            c.cols()
        )));
    }
    if n == 0 {
        return Err(Error::Contract("sym_eig needs a non-empty matrix".into()));
    }
    let tol = 1e-10 * c.max_abs();
    for i in 0..n {
        for j in (i + 1)..n {
            if (c.get(i, j) - c.get(j, i)).abs() > tol {
                return Err(Error::Contract(format!(
                    "sym_eig input is asymmetric at ({i},{j}): {} vs {}",
                    c.get(i, j),
                    c.get(j, i)
                )));
            }
        }
    }

    // Work on the symmetrized copy so round-off asymmetry cannot leak in.
    let mut v = Matrix::from_fn(n, n, |i, j| 0.5 * (c.get(i, j) + c.get(j, i)));
    let mut d = vec![0.0; n]; // diagonal
    let mut e = vec![0.0; n]; // off-diagonal
    tred2(&mut v, &mut d, &mut e);
    tql2(&mut v, &mut d, &mut e)?;

    // tql2 sorts ascending; flip to descending.
    let mut order: Vec<usize> = (0..n).collect();
    order.reverse();
    let eigenvalues: Vec<f64> = order.iter().map(|&k| d[k]).collect();
    let eigenvectors = Matrix::from_fn(n, n, |i, j| v.get(i, order[j]));
    Ok((eigenvalues, eigenvectors))
}

/// Householder reduction of the symmetric matrix in `v` to tridiagonal form,
/// accumulating the orthogonal transformation in `v`.
fn tred2(v: &mut Matrix, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v.get(n - 1, j);
    }

    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for item in d.iter().take(i) {
            scale += item.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v.get(i - 1, j);
                v.set(i, j, 0.0);
                v.set(j, i, 0.0);
            }
        } else {
            for item in d.iter_mut().take(i) {
                *item /= scale;
                h += *item * *item;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for item in e.iter_mut().take(i) {
                *item = 0.0;
            }

            for j in 0..i {
                f = d[j];
                v.set(j, i, f);
                g = e[j] + v.get(j, j) * f;
                for k in (j + 1)..i {
                    g += v.get(k, j) * d[k];
                    e[k] += v.get(k, j) * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    let val = v.get(k, j) - (f * e[k] + g * d[k]);
                    v.set(k, j, val);
                }
                d[j] = v.get(i - 1, j);
                v.set(i, j, 0.0);
            }
        }
        d[i] = h;
    }

    for i in 0..(n - 1) {
        v.set(n - 1, i, v.get(i, i));
        v.set(i, i, 1.0);
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v.get(k, i + 1) / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v.get(k, i + 1) * v.get(k, j);
                }
                for k in 0..=i {
                    let val = v.get(k, j) - g * d[k];
                    v.set(k, j, val);
                }
            }
        }
        for k in 0..=i {
            v.set(k, i + 1, 0.0);
        }
    }
    for j in 0..n {
        d[j] = v.get(n - 1, j);
        v.set(n - 1, j, 0.0);
    }
    v.set(n - 1, n - 1, 1.0);
    e[0] = 0.0;
}

/// Implicit-shift QL iteration on the tridiagonal matrix (d, e), updating the
/// eigenvector accumulator `v`. Leaves eigenvalues ascending in `d`.
fn tql2(v: &mut Matrix, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0f64;
    let mut tst1 = 0.0f64;
    let eps = 2.0f64.powi(-52);
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }

        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(Error::NonConvergence { op: "sym_eig QL iteration", iterations: iter });
                }

                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for item in d.iter_mut().take(n).skip(l + 2) {
                    *item -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    for k in 0..n {
                        h = v.get(k, i + 1);
                        v.set(k, i + 1, s * v.get(k, i) + c * h);
                        v.set(k, i, c * v.get(k, i) - s * h);
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;

                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    // Selection sort ascending, swapping eigenvector columns along.
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for j in (i + 1)..n {
            if d[j] < p {
                k = j;
                p = d[j];
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            for j in 0..n {
                let tmp = v.get(j, i);
                v.set(j, i, v.get(j, k));
                v.set(j, k, tmp);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;

    fn reconstruct(vals: &[f64], vecs: &Matrix) -> Matrix {
        let n = vals.len();
        let mut lam = Matrix::zeros(n, n);
        for i in 0..n {
            lam.set(i, i, vals[i]);
        }
        vecs.matmul(&lam).a_bt(vecs)
    }

    #[test]
    fn identity_has_unit_eigenvalues_and_orthonormal_vectors() {
        let (vals, vecs) = sym_eig(&Matrix::identity(3)).unwrap();
        for v in &vals {
            assert!((v - 1.0).abs() < 1e-12);
        }
        let vtv = vecs.at_b(&vecs);
        assert!(vtv.sub(&Matrix::identity(3)).max_abs() < 1e-12);
    }

    #[test]
    fn diagonal_case_sorted_descending_with_axis_vectors() {
        let mut c = Matrix::zeros(2, 2);
        c.set(0, 0, 1.0);
        c.set(1, 1, 2.0);
        let (vals, vecs) = sym_eig(&c).unwrap();
        assert!((vals[0] - 2.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
        // first eigenvector is +-e2, second +-e1
        assert!((vecs.get(1, 0).abs() - 1.0).abs() < 1e-14);
        assert!(vecs.get(0, 0).abs() < 1e-14);
        assert!((vecs.get(0, 1).abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_symmetric_reconstructs() {
        let mut rng = SeededRng::new(5);
        for trial in 0..10 {
            let n = 6;
            let raw = Matrix::from_fn(n, n, |_, _| rng.uniform(-1.0, 1.0));
            let c = Matrix::from_fn(n, n, |i, j| 0.5 * (raw.get(i, j) + raw.get(j, i)));
            let (vals, vecs) = sym_eig(&c).unwrap();
            let err = reconstruct(&vals, &vecs).sub(&c).frobenius_norm() / c.frobenius_norm();
            assert!(err < 1e-8, "trial {trial}: reconstruction error {err}");
            for w in vals.windows(2) {
                assert!(w[0] >= w[1] - 1e-12, "not descending: {vals:?}");
            }
            let vtv = vecs.at_b(&vecs);
            assert!(vtv.sub(&Matrix::identity(n)).max_abs() < 1e-10);
            // residual per column: C v = lambda v
            for i in 0..n {
                let cv = c.matvec(vecs.col(i));
                let norm_c = c.frobenius_norm();
                for (k, &cvk) in cv.iter().enumerate() {
                    assert!((cvk - vals[i] * vecs.get(k, i)).abs() < 1e-8 * norm_c.max(1.0));
                }
            }
        }
    }

    #[test]
    fn rejects_asymmetric_and_non_square() {
        let bad = Matrix::from_col_major(2, 2, vec![1.0, 0.5, 0.0, 1.0]).unwrap();
        assert!(matches!(sym_eig(&bad), Err(Error::Contract(_))));
        let rect = Matrix::zeros(2, 3);
        assert!(matches!(sym_eig(&rect), Err(Error::Contract(_))));
    }

    #[test]
    fn one_by_one() {
        let mut c = Matrix::zeros(1, 1);
        c.set(0, 0, -3.5);
        let (vals, vecs) = sym_eig(&c).unwrap();
        assert_eq!(vals, vec![-3.5]);
        assert!((vecs.get(0, 0).abs() - 1.0).abs() < 1e-15);
    }
}
