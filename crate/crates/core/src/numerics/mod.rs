//! Dense real linear algebra: column-major `f64` matrices, a symmetric
//! eigensolver, a Jacobi SVD used as an independent cross-check, and seeded
//! pseudo-randomness. Everything else in the crate builds on this module.
//!
//! All operations are pure functions on immutable inputs (mutating methods
//! take `&mut self` and never share state), so they are safe to call from
//! multiple threads.

mod eig;
mod rng;
mod svd;

pub use eig::sym_eig;
pub use rng::SeededRng;
pub use svd::svd;

use crate::error::{Error, Result};

/// Dense real matrix, 64-bit floats, column-major storage.
///
/// Column-major means a snapshot stored one-per-column is contiguous in
/// memory, which is the access pattern of every hot loop in this crate.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Build from column-major data. Fails if the length does not match or
    /// any entry is non-finite.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Contract(format!(
                "matrix data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Contract(format!(
                "non-finite entry at flat index {pos} (row {}, col {})",
                pos % rows,
                pos / rows
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Build from a closure `f(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        if cols.is_empty() {
            return Err(Error::Contract("matrix needs at least one column".into()));
        }
        let rows = cols[0].len();
        if cols.iter().any(|c| c.len() != rows) {
            return Err(Error::Contract("columns have unequal lengths".into()));
        }
        let mut data = Vec::with_capacity(rows * cols.len());
        for c in cols {
            data.extend_from_slice(c);
        }
        Matrix::from_col_major(rows, cols.len(), data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[j * self.rows + i] = v;
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self.get(i, j)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Keep the first `k` columns.
    pub fn take_cols(&self, k: usize) -> Matrix {
        assert!(k <= self.cols);
        Matrix {
            rows: self.rows,
            cols: k,
            data: self.data[..k * self.rows].to_vec(),
        }
    }

    /// Keep the first `k` rows.
    pub fn take_rows(&self, k: usize) -> Matrix {
        assert!(k <= self.rows);
        Matrix::from_fn(k, self.cols, |i, j| self.get(i, j))
    }

    /// `self * other`. Column-major saxpy kernel: each output column is a
    /// linear combination of the columns of `self`.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let bcol = other.col(j);
            let ocol = out.col_mut(j);
            for (k, &bkj) in bcol.iter().enumerate() {
                if bkj == 0.0 {
                    continue;
                }
                let acol = &self.data[k * self.rows..(k + 1) * self.rows];
                for (o, &a) in ocol.iter_mut().zip(acol) {
                    *o += bkj * a;
                }
            }
        }
        out
    }

    /// `self^T * other`: contiguous dot products of columns.
    pub fn at_b(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "at_b shape mismatch");
        let mut out = Matrix::zeros(self.cols, other.cols);
        for j in 0..other.cols {
            let bcol = other.col(j);
            let ocol = out.col_mut(j);
            for (i, o) in ocol.iter_mut().enumerate() {
                *o = dot(self.col(i), bcol);
            }
        }
        out
    }

    /// `self * other^T`: accumulated rank-1 updates.
    pub fn a_bt(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "a_bt shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.rows);
        for b in 0..self.cols {
            let acol = self.col(b);
            for j in 0..other.rows {
                let w = other.get(j, b);
                if w == 0.0 {
                    continue;
                }
                let ocol = &mut out.data[j * self.rows..(j + 1) * self.rows];
                for (o, &a) in ocol.iter_mut().zip(acol) {
                    *o += w * a;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "matvec shape mismatch");
        let mut out = vec![0.0; self.rows];
        for (k, &xk) in x.iter().enumerate() {
            if xk == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.col(k)) {
                *o += xk * a;
            }
        }
        out
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Multiply row `i` by `s[i]` in place (diagonal scaling from the left).
    pub fn scale_rows(&mut self, s: &[f64]) {
        assert_eq!(s.len(), self.rows);
        for j in 0..self.cols {
            let rows = self.rows;
            let col = &mut self.data[j * rows..(j + 1) * rows];
            for (v, &si) in col.iter_mut().zip(s) {
                *v *= si;
            }
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormalize the columns of `a` with modified Gram-Schmidt (two passes
/// for numerical safety). Columns that collapse below `tol` times the
/// original norm are dropped.
pub fn orthonormalize_columns(a: &Matrix, tol: f64) -> Matrix {
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for j in 0..a.cols() {
        let mut v = a.col(j).to_vec();
        let orig = dot(&v, &v).sqrt();
        for _ in 0..2 {
            for q in &kept {
                let c = dot(&v, q);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > tol * orig.max(f64::MIN_POSITIVE) {
            for vi in &mut v {
                *vi /= norm;
            }
            kept.push(v);
        }
    }
    Matrix::from_columns(&kept).expect("orthonormalization kept at least one column")
}

/// Principal angles (radians, ascending) between the column spans of `a`
/// and `b`, computed from the singular values of `Qa^T Qb`.
pub fn principal_angles(a: &Matrix, b: &Matrix) -> Result<Vec<f64>> {
    let qa = orthonormalize_columns(a, 1e-12);
    let qb = orthonormalize_columns(b, 1e-12);
    let m = qa.at_b(&qb);
    let (_, s, _) = svd(&m)?;
    let mut angles: Vec<f64> = s.iter().map(|c| c.clamp(-1.0, 1.0).acos()).collect();
    angles.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(angles)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_against_hand_example() {
        // [1 2; 3 4] * [5 6; 7 8] = [19 22; 43 50]
        let a = Matrix::from_col_major(2, 2, vec![1.0, 3.0, 2.0, 4.0]).unwrap();
        let b = Matrix::from_col_major(2, 2, vec![5.0, 7.0, 6.0, 8.0]).unwrap();
        let c = a.matmul(&b);
        assert_eq!(c.data(), &[19.0, 43.0, 22.0, 50.0]);
    }

    #[test]
    fn transposed_products_agree_with_explicit_transpose() {
        let mut rng = SeededRng::new(11);
        let a = Matrix::from_fn(4, 3, |_, _| rng.uniform(-1.0, 1.0));
        let b = Matrix::from_fn(4, 5, |_, _| rng.uniform(-1.0, 1.0));
        let c = Matrix::from_fn(6, 3, |_, _| rng.uniform(-1.0, 1.0));
        let atb = a.at_b(&b);
        let expect = a.transpose().matmul(&b);
        assert!(atb.sub(&expect).max_abs() < 1e-14);
        let cbt = a.a_bt(&c); // (4x3)*(3x6)
        let expect2 = a.matmul(&c.transpose());
        assert!(cbt.sub(&expect2).max_abs() < 1e-14);
    }

    #[test]
    fn rejects_non_finite_and_bad_shape() {
        assert!(Matrix::from_col_major(2, 2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(Matrix::from_col_major(1, 2, vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn principal_angles_detect_shared_and_orthogonal_spans() {
        let e1 = Matrix::from_col_major(3, 1, vec![1.0, 0.0, 0.0]).unwrap();
        let e1b = Matrix::from_col_major(3, 1, vec![2.0, 0.0, 0.0]).unwrap();
        let e2 = Matrix::from_col_major(3, 1, vec![0.0, 1.0, 0.0]).unwrap();
        let same = principal_angles(&e1, &e1b).unwrap();
        assert!(same[0] < 1e-12);
        let orth = principal_angles(&e1, &e2).unwrap();
        assert!((orth[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }
}
