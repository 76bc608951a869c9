//! Weighted proper orthogonal decomposition of snapshot matrices.
//!
//! The covariance of a snapshot matrix `Q` (one snapshot per column) under a
//! diagonal weight matrix `W` is `C = W Q Q^T W^T / (nt - 1)`; its
//! eigenvectors are the POD modes, its eigenvalues the modal energies, and
//! the time coefficients are the plain projection `A = Phi^T Q`. The weight
//! entries are `sqrt(w_j)` with `w_j` the per-point quadrature weight (cell
//! area on a polar grid, 1 on a Cartesian grid), so `C` is the area-weighted
//! covariance. Mode orthonormality is Euclidean because `C` is symmetric.

use crate::error::{Error, Result};
use crate::numerics::{sym_eig, Matrix};

/// Eigenvalues below `RANK_TOL * lambda_1` are treated as numerical noise:
/// their modes and coefficients are dropped from the retained basis.
pub const RANK_TOL: f64 = 1e-12;

/// Grid metadata carried with a snapshot matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum GridMeta {
    /// Tensor-product 2-D grid, row index = ix * ny + iy.
    Cartesian2d { x: Vec<f64>, y: Vec<f64> },
    /// Polar sensor grid, row index = ir * n_azimuthal + itheta.
    Polar {
        radii: Vec<f64>,
        angles: Vec<f64>,
        /// Per-point cell area, ring-major like the data rows.
        cell_areas: Vec<f64>,
    },
}

impl GridMeta {
    pub fn n_points(&self) -> usize {
        match self {
            GridMeta::Cartesian2d { x, y } => x.len() * y.len(),
            GridMeta::Polar { radii, angles, .. } => radii.len() * angles.len(),
        }
    }

    /// POD weights w_j: cell areas for polar grids, 1 elsewhere.
    pub fn pod_weights(&self) -> Vec<f64> {
        match self {
            GridMeta::Cartesian2d { .. } => vec![1.0; self.n_points()],
            GridMeta::Polar { cell_areas, .. } => cell_areas.clone(),
        }
    }
}

/// A measured fluctuating field: one snapshot per column, plus grid
/// metadata, the sampling interval and the per-row POD weights.
#[derive(Debug, Clone)]
pub struct SnapshotMatrix {
    pub values: Matrix,
    pub grid: GridMeta,
    /// Sampling interval in the dataset's (nondimensional) time units.
    pub dt: f64,
    /// Diagonal POD weight entries w_j >= 0, one per row.
    pub weights: Vec<f64>,
    /// Temporal mean removed from each row, when mean removal has run.
    pub mean: Option<Vec<f64>>,
}

impl SnapshotMatrix {
    pub fn new(values: Matrix, grid: GridMeta, dt: f64) -> Result<Self> {
        if grid.n_points() != values.rows() {
            return Err(Error::Contract(format!(
                "grid has {} points but matrix has {} rows",
                grid.n_points(),
                values.rows()
            )));
        }
        if values.cols() < 1 {
            return Err(Error::Contract("need at least one snapshot".into()));
        }
        let weights = grid.pod_weights();
        Ok(SnapshotMatrix { values, grid, dt, weights, mean: None })
    }

    pub fn n_points(&self) -> usize {
        self.values.rows()
    }

    pub fn n_snapshots(&self) -> usize {
        self.values.cols()
    }

    pub fn mean_removed(&self) -> bool {
        self.mean.is_some()
    }

    /// Per-entry variance: mean square over all rows and snapshots
    /// (the field is assumed mean-free).
    pub fn variance(&self) -> f64 {
        let n = (self.values.rows() * self.values.cols()) as f64;
        self.values.data().iter().map(|v| v * v).sum::<f64>() / n
    }

    /// Total weighted variance `sum_j w_j var_j * (nt)/(nt-1)`-style energy:
    /// `||W Q||_F^2 / (nt - 1)`. Equals the sum of all POD eigenvalues.
    pub fn total_weighted_variance(&self) -> f64 {
        let nt = self.values.cols() as f64;
        let mut acc = 0.0;
        for j in 0..self.values.cols() {
            for (v, w) in self.values.col(j).iter().zip(&self.weights) {
                acc += w * v * v;
            }
        }
        acc / (nt - 1.0)
    }
}

/// POD modes, eigenvalues and time coefficients of a dataset.
///
/// `eigenvalues` holds the full spectrum (clamped at zero); `modes` and
/// `coeffs` keep only the `n_retained` modes above the rank threshold.
/// Coefficients are stored modes x time: row `i` is the time series of
/// mode `i`.
#[derive(Debug, Clone)]
pub struct PodBasis {
    /// Retained modes, one per column (n_points x n_retained).
    pub modes: Matrix,
    /// Full eigenvalue spectrum, descending, >= 0.
    pub eigenvalues: Vec<f64>,
    /// Time coefficients of the retained modes (n_retained x nt).
    pub coeffs: Matrix,
    /// The POD weights the basis was computed with.
    pub weights: Vec<f64>,
}

impl PodBasis {
    pub fn n_retained(&self) -> usize {
        self.modes.cols()
    }

    /// Build a basis directly from known modes/eigenvalues/coefficients.
    /// Used by tests and by analyses that work in an explicit mode basis.
    pub fn from_parts(modes: Matrix, eigenvalues: Vec<f64>, coeffs: Matrix, weights: Vec<f64>) -> Self {
        PodBasis { modes, eigenvalues, coeffs, weights }
    }
}

/// Weighted POD of a mean-removed snapshot matrix.
pub fn compute_pod(q: &SnapshotMatrix) -> Result<PodBasis> {
    if q.n_snapshots() < 2 {
        return Err(Error::Contract(format!(
            "POD needs at least 2 snapshots, got {}",
            q.n_snapshots()
        )));
    }
    if !q.mean_removed() {
        return Err(Error::Contract(
            "POD input must be mean-removed (run data::remove_mean first)".into(),
        ));
    }
    if q.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::Contract("POD weights must be finite and non-negative".into()));
    }

    let nt = q.n_snapshots() as f64;
    let sqrt_w: Vec<f64> = q.weights.iter().map(|w| w.sqrt()).collect();
    let mut wq = q.values.clone();
    wq.scale_rows(&sqrt_w);
    let mut cov = wq.a_bt(&wq);
    cov.scale(1.0 / (nt - 1.0));

    let (raw_vals, mut vecs) = sym_eig(&cov)?;
    let lead = raw_vals.first().copied().unwrap_or(0.0).max(0.0);
    let eigenvalues: Vec<f64> = raw_vals.iter().map(|&v| v.max(0.0)).collect();
    let n_retained = eigenvalues
        .iter()
        .take_while(|&&v| v > RANK_TOL * lead && v > 0.0)
        .count()
        .max(if lead > 0.0 { 1 } else { 0 });

    // Deterministic sign: the entry of largest magnitude in each retained
    // mode is made positive (first such entry wins ties).
    for j in 0..n_retained {
        let col = vecs.col(j);
        let mut best = 0usize;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() + 1e-300 {
                best = i;
            }
        }
        if col[best] < 0.0 {
            for v in vecs.col_mut(j) {
                *v = -*v;
            }
        }
    }

    let modes = vecs.take_cols(n_retained);
    let coeffs = modes.at_b(&q.values);
    Ok(PodBasis { modes, eigenvalues, coeffs, weights: q.weights.clone() })
}

/// Rank-`n_modes` reconstruction `sum_{i<=n} phi_i a_i` of the dataset the
/// basis was computed from.
pub fn reconstruct(basis: &PodBasis, n_modes: usize) -> Result<Matrix> {
    if n_modes == 0 || n_modes > basis.n_retained() {
        return Err(Error::Contract(format!(
            "n_modes must be in 1..={}, got {n_modes}",
            basis.n_retained()
        )));
    }
    let phi = basis.modes.take_cols(n_modes);
    let a = basis.coeffs.take_rows(n_modes);
    Ok(phi.matmul(&a))
}

/// Per-mode energy percentages and the cumulative curve, over the full
/// eigenvalue spectrum.
pub fn energy_spectrum(basis: &PodBasis) -> Result<(Vec<f64>, Vec<f64>)> {
    if basis.eigenvalues.is_empty() {
        return Err(Error::Contract("basis has no eigenvalues".into()));
    }
    let total: f64 = basis.eigenvalues.iter().sum();
    if total <= 0.0 {
        let zeros = vec![0.0; basis.eigenvalues.len()];
        return Ok((zeros.clone(), zeros));
    }
    let percent: Vec<f64> = basis.eigenvalues.iter().map(|v| 100.0 * v / total).collect();
    let mut cum = Vec::with_capacity(percent.len());
    let mut acc = 0.0;
    for p in &percent {
        acc += p;
        cum.push(acc);
    }
    Ok((percent, cum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::remove_mean;
    use crate::numerics::{principal_angles, svd, SeededRng};

    fn plain_snapshot(values: Matrix) -> SnapshotMatrix {
        let n = values.rows();
        let mut q = SnapshotMatrix::new(
            values,
            GridMeta::Cartesian2d { x: (0..n).map(|i| i as f64).collect(), y: vec![0.0] },
            1.0,
        )
        .unwrap();
        // Tests construct exactly mean-free data; flag it without touching it.
        q.mean = Some(vec![0.0; q.n_points()]);
        q
    }

    #[test]
    fn rank_one_antisymmetric_case() {
        // Q = [[1,-1],[-1,1]]: C has eigenvalues (4, 0).
        let q = plain_snapshot(Matrix::from_col_major(2, 2, vec![1.0, -1.0, -1.0, 1.0]).unwrap());
        let basis = compute_pod(&q).unwrap();
        assert!((basis.eigenvalues[0] - 4.0).abs() < 1e-12);
        assert!(basis.eigenvalues[1].abs() < 1e-12);
        assert_eq!(basis.n_retained(), 1);
        let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
        // Sign convention: first of the equal-magnitude entries is positive.
        assert!((basis.modes.get(0, 0) - inv_sqrt2).abs() < 1e-12);
        assert!((basis.modes.get(1, 0) + inv_sqrt2).abs() < 1e-12);
        let a = basis.coeffs.row(0);
        assert!((a[0] - 2.0f64.sqrt()).abs() < 1e-12);
        assert!((a[1] + 2.0f64.sqrt()).abs() < 1e-12);
        // rank-1 reconstruction is exact
        let rec = reconstruct(&basis, 1).unwrap();
        assert!(rec.sub(&q.values).max_abs() < 1e-12);
    }

    #[test]
    fn matches_svd_oracle_unweighted() {
        let mut rng = SeededRng::new(31);
        let (n, nt) = (8, 100);
        let values = Matrix::from_fn(n, nt, |_, _| rng.normal());
        let mut q = plain_snapshot(values);
        remove_mean(&mut q);
        let basis = compute_pod(&q).unwrap();
        let (u, s, _) = svd(&q.values).unwrap();
        for i in 0..n {
            let expect = s[i] * s[i] / (nt as f64 - 1.0);
            assert!((basis.eigenvalues[i] - expect).abs() < 1e-8 * basis.eigenvalues[0]);
        }
        for i in 0..n {
            // modes match left singular vectors up to sign
            let d = crate::numerics::dot(basis.modes.col(i), u.col(i)).abs();
            assert!(d > 1.0 - 1e-8, "mode {i}: |cos| = {d}");
        }
    }

    #[test]
    fn full_rank_reconstruction_identity_weights() {
        let mut rng = SeededRng::new(13);
        let values = Matrix::from_fn(6, 40, |_, _| rng.uniform(-2.0, 2.0));
        let mut q = plain_snapshot(values);
        remove_mean(&mut q);
        let basis = compute_pod(&q).unwrap();
        let rec = reconstruct(&basis, basis.n_retained()).unwrap();
        let rel = rec.sub(&q.values).frobenius_norm() / q.values.frobenius_norm();
        assert!(rel < 1e-10, "relative error {rel}");
    }

    #[test]
    fn two_mode_truncation_captures_the_pair_energy() {
        let cfg = crate::data::LaminarSurrogateConfig {
            nx: 12,
            ny: 8,
            n_t: 180,
            ..Default::default()
        };
        let q = crate::data::generate_laminar(&cfg).unwrap();
        let basis = compute_pod(&q).unwrap();
        let rec = reconstruct(&basis, 2).unwrap();
        let captured = rec.frobenius_norm().powi(2) / q.values.frobenius_norm().powi(2);
        let total: f64 = basis.eigenvalues.iter().sum();
        let expected = (basis.eigenvalues[0] + basis.eigenvalues[1]) / total;
        assert!(
            (captured - expected).abs() < 1e-6,
            "captured {captured} vs eigenvalue fraction {expected}"
        );
    }

    #[test]
    fn energy_spectrum_trivials() {
        let basis = PodBasis::from_parts(
            Matrix::identity(2),
            vec![4.0, 0.0],
            Matrix::zeros(2, 2),
            vec![1.0, 1.0],
        );
        let (p, c) = energy_spectrum(&basis).unwrap();
        assert_eq!(p, vec![100.0, 0.0]);
        assert_eq!(c, vec![100.0, 100.0]);

        let basis3 = PodBasis::from_parts(
            Matrix::identity(3),
            vec![2.0, 1.0, 1.0],
            Matrix::zeros(3, 2),
            vec![1.0; 3],
        );
        let (p3, c3) = energy_spectrum(&basis3).unwrap();
        assert!((p3[0] - 50.0).abs() < 1e-9 && (p3[1] - 25.0).abs() < 1e-9 && (p3[2] - 25.0).abs() < 1e-9);
        assert!((c3[2] - 100.0).abs() < 1e-9);
        assert!(c3.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }

    #[test]
    fn projection_idempotence_on_subspace_data() {
        // Data already inside a 3-mode subspace reconstructs exactly with 3 modes.
        let mut rng = SeededRng::new(77);
        let raw = Matrix::from_fn(10, 3, |_, _| rng.normal());
        let basis_vecs = crate::numerics::orthonormalize_columns(&raw, 1e-12);
        let coeffs = Matrix::from_fn(3, 50, |_, _| rng.normal());
        let mut q = plain_snapshot(basis_vecs.matmul(&coeffs));
        remove_mean(&mut q);
        let basis = compute_pod(&q).unwrap();
        assert!(basis.n_retained() <= 3);
        let rec = reconstruct(&basis, basis.n_retained()).unwrap();
        let rel = rec.sub(&q.values).frobenius_norm() / q.values.frobenius_norm();
        assert!(rel < 1e-8, "relative error {rel}");
    }

    #[test]
    fn truncation_beats_random_orthonormal_bases() {
        let mut rng = SeededRng::new(5);
        let values = Matrix::from_fn(12, 80, |_, _| rng.normal());
        let mut q = plain_snapshot(values);
        remove_mean(&mut q);
        let basis = compute_pod(&q).unwrap();
        for n in [1usize, 3, 6] {
            let rec = reconstruct(&basis, n).unwrap();
            let pod_err = rec.sub(&q.values).frobenius_norm();
            for _ in 0..5 {
                let raw = Matrix::from_fn(12, n, |_, _| rng.normal());
                let p = crate::numerics::orthonormalize_columns(&raw, 1e-12);
                let proj = p.matmul(&p.at_b(&q.values));
                let other_err = proj.sub(&q.values).frobenius_norm();
                assert!(
                    pod_err <= other_err + 1e-9,
                    "rank {n}: POD {pod_err} vs random basis {other_err}"
                );
            }
        }
    }

    #[test]
    fn unit_weights_equal_unweighted() {
        let mut rng = SeededRng::new(19);
        let values = Matrix::from_fn(7, 30, |_, _| rng.normal());
        let mut q = plain_snapshot(values.clone());
        remove_mean(&mut q);
        let unweighted = compute_pod(&q).unwrap();
        // same data declared on a polar grid with all-1 areas
        let mut qw = q.clone();
        qw.weights = vec![1.0; 7];
        let weighted = compute_pod(&qw).unwrap();
        assert_eq!(unweighted.eigenvalues.len(), weighted.eigenvalues.len());
        for (a, b) in unweighted.eigenvalues.iter().zip(&weighted.eigenvalues) {
            assert!((a - b).abs() < 1e-14 * unweighted.eigenvalues[0].max(1.0));
        }
        assert!(unweighted.modes.sub(&weighted.modes).max_abs() < 1e-12);
    }

    #[test]
    fn weighted_subspace_matches_weighted_svd() {
        let mut rng = SeededRng::new(41);
        let (n, nt) = (10, 60);
        let values = Matrix::from_fn(n, nt, |_, _| rng.normal());
        let mut q = plain_snapshot(values);
        remove_mean(&mut q);
        q.weights = (0..n).map(|_| rng.uniform(0.2, 3.0)).collect();
        let basis = compute_pod(&q).unwrap();
        let sqrt_w: Vec<f64> = q.weights.iter().map(|w| w.sqrt()).collect();
        let mut wq = q.values.clone();
        wq.scale_rows(&sqrt_w);
        let (u, s, _) = svd(&wq).unwrap();
        for i in 0..4 {
            let expect = s[i] * s[i] / (nt as f64 - 1.0);
            assert!((basis.eigenvalues[i] - expect).abs() < 1e-8 * basis.eigenvalues[0]);
        }
        let angles =
            principal_angles(&basis.modes.take_cols(4), &u.take_cols(4)).unwrap();
        assert!(angles.last().unwrap() < &1e-6);
    }

    #[test]
    fn rejects_single_snapshot_and_missing_mean() {
        let q1 = plain_snapshot(Matrix::zeros(3, 1));
        assert!(compute_pod(&q1).is_err());
        let mut q2 = plain_snapshot(Matrix::zeros(3, 4));
        q2.mean = None;
        assert!(compute_pod(&q2).is_err());
    }

    #[test]
    fn reconstruct_range_checked() {
        let q = plain_snapshot(Matrix::from_col_major(2, 2, vec![1.0, -1.0, -1.0, 1.0]).unwrap());
        let basis = compute_pod(&q).unwrap();
        assert!(reconstruct(&basis, 0).is_err());
        assert!(reconstruct(&basis, basis.n_retained() + 1).is_err());
    }
}
