//! Realized quadratic covariation of synchronously sampled paths and
//! eigenvalue-threshold rank estimation.
//!
//! For a path observed at `t_0 < ... < t_n` the realized quadratic
//! covariation matrix is the Gram matrix of the increment columns,
//!
//! ```text
//! [M]_T[i][j] = sum_k (M^i_{t_k} - M^i_{t_{k-1}}) (M^j_{t_k} - M^j_{t_{k-1}})
//! ```
//!
//! which is symmetric nonnegative by construction. Its rank estimates the
//! number of directions carrying genuine quadratic variation; the
//! orthogonal complement of those directions is pure drift.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{eigh_descending, Eigensystem};

/// A d-dimensional process sampled on a common time grid.
#[derive(Debug, Clone)]
pub struct MultiPath {
    /// Strictly increasing times `t_0 .. t_n` spanning the horizon.
    pub t_grid: DVector<f64>,
    /// Row `i` holds the observation at `t_i`; one column per component.
    pub values: DMatrix<f64>,
}

impl MultiPath {
    pub fn new(t_grid: DVector<f64>, values: DMatrix<f64>) -> Result<Self> {
        if t_grid.len() != values.nrows() {
            return Err(Error::InvalidInput(format!(
                "time grid has {} points but values has {} rows",
                t_grid.len(),
                values.nrows()
            )));
        }
        if t_grid.len() < 2 {
            return Err(Error::InsufficientData(
                "a path needs at least two observation times".into(),
            ));
        }
        for i in 1..t_grid.len() {
            if !(t_grid[i] > t_grid[i - 1]) {
                return Err(Error::InvalidInput(format!(
                    "time grid not strictly increasing at index {i}"
                )));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("path has non-finite values".into()));
        }
        Ok(MultiPath { t_grid, values })
    }

    /// Number of components `d`.
    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    /// Number of increments `n`.
    pub fn n_increments(&self) -> usize {
        self.t_grid.len() - 1
    }

    /// Horizon `T = t_n - t_0`.
    pub fn horizon(&self) -> f64 {
        self.t_grid[self.t_grid.len() - 1] - self.t_grid[0]
    }

    /// Matrix of increments, one row per step.
    pub fn increments(&self) -> DMatrix<f64> {
        let n = self.n_increments();
        let d = self.dim();
        let mut out = DMatrix::zeros(n, d);
        for k in 0..n {
            for j in 0..d {
                out[(k, j)] = self.values[(k + 1, j)] - self.values[(k, j)];
            }
        }
        out
    }
}

/// Realized quadratic-covariation matrix with its eigensystem.
#[derive(Debug, Clone)]
pub struct QvMatrix {
    pub matrix: DMatrix<f64>,
    pub eig: Eigensystem,
    pub horizon: f64,
}

impl QvMatrix {
    /// Wraps an externally computed quadratic-variation matrix (e.g. an
    /// exact integral in a deterministic fixture). Eigenvalues that are
    /// negative within `1e-10 * trace` roundoff are clamped to zero; more
    /// negative spectra are rejected.
    pub fn from_matrix(matrix: DMatrix<f64>, horizon: f64) -> Result<Self> {
        let mut eig = eigh_descending(&matrix)?;
        let trace = matrix.trace();
        let floor = -1e-10 * trace.abs().max(1e-300);
        for v in eig.values.iter_mut() {
            if *v < floor {
                return Err(Error::InvalidInput(format!(
                    "matrix has a negative eigenvalue {v:.3e}; not a quadratic-variation matrix"
                )));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(QvMatrix { matrix, eig, horizon })
    }

    /// Sum of eigenvalues (= total realized quadratic variation).
    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Realized quadratic covariation of a sampled path: the Gram matrix of
/// its increment columns (positive semidefinite by construction).
pub fn realized_qv(path: &MultiPath) -> Result<QvMatrix> {
    if path.n_increments() < 1 {
        return Err(Error::InsufficientData(
            "need at least one increment for realized quadratic variation".into(),
        ));
    }
    let inc = path.increments();
    let matrix = inc.transpose() * &inc;
    QvMatrix::from_matrix(matrix, path.horizon())
}

/// Quadratic form `v' Q v`: the realized quadratic variation of the linear
/// combination `v' M` with `v` held fixed over the window.
pub fn qv_quadratic_form(v: &DVector<f64>, q: &QvMatrix) -> Result<f64> {
    if v.len() != q.dim() {
        return Err(Error::InvalidInput(format!(
            "vector of length {} against a {}x{} matrix",
            v.len(),
            q.dim(),
            q.dim()
        )));
    }
    Ok((v.transpose() * &q.matrix * v)[(0, 0)])
}

/// Number of eigenvalues at or above `eps_rel` times the trace; zero for
/// the zero matrix. `eps_rel` must lie in `(0, 1)`.
pub fn rank_estimate(q: &QvMatrix, eps_rel: f64) -> Result<usize> {
    if !(eps_rel > 0.0 && eps_rel < 1.0) {
        return Err(Error::InvalidInput(format!(
            "relative eigenvalue threshold must lie in (0,1), got {eps_rel}"
        )));
    }
    let total: f64 = q.eig.values.iter().sum();
    if total <= 0.0 {
        return Ok(0);
    }
    Ok(q.eig.values.iter().filter(|&&v| v >= eps_rel * total).count())
}

/// Default relative threshold for [`rank_estimate`] at a sampling
/// resolution of `n_increments` steps: `n^(-1/3)`, matching the threshold
/// used by the Fourier rank estimator on rescaled time.
pub fn default_rank_eps(n_increments: usize) -> f64 {
    (n_increments as f64).powf(-1.0 / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn linear_path(n: usize) -> MultiPath {
        let t = DVector::from_fn(n + 1, |i, _| i as f64 / n as f64);
        let vals = DMatrix::from_fn(n + 1, 1, |i, _| i as f64 / n as f64);
        MultiPath::new(t, vals).unwrap()
    }

    #[test]
    fn deterministic_drift_has_vanishing_qv() {
        // M_t = t over [0,1] with n equal steps: sum of n squares of 1/n.
        let q = realized_qv(&linear_path(100)).unwrap();
        assert_abs_diff_eq!(q.matrix[(0, 0)], 0.01, epsilon = 1e-14);
    }

    #[test]
    fn constant_path_gives_zero_matrix() {
        let t = DVector::from_vec(vec![0.0, 0.5, 1.0]);
        let vals = DMatrix::from_element(3, 2, 7.0);
        let q = realized_qv(&MultiPath::new(t, vals).unwrap()).unwrap();
        assert_eq!(q.matrix.iter().filter(|v| **v != 0.0).count(), 0);
        assert_eq!(rank_estimate(&q, 0.01).unwrap(), 0);
    }

    #[test]
    fn quadratic_form_examples() {
        let q = QvMatrix::from_matrix(
            DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]),
            1.0,
        )
        .unwrap();
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        assert_abs_diff_eq!(qv_quadratic_form(&e1, &q).unwrap(), 2.0, epsilon = 1e-14);
        let zero = DVector::zeros(2);
        assert_abs_diff_eq!(qv_quadratic_form(&zero, &q).unwrap(), 0.0, epsilon = 1e-14);

        let q2 = QvMatrix::from_matrix(
            DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]),
            1.0,
        )
        .unwrap();
        let s = 1.0 / 2.0f64.sqrt();
        let v = DVector::from_vec(vec![s, s]);
        assert_abs_diff_eq!(qv_quadratic_form(&v, &q2).unwrap(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn quadratic_form_rejects_dimension_mismatch() {
        let q = QvMatrix::from_matrix(DMatrix::identity(2, 2), 1.0).unwrap();
        let v = DVector::zeros(3);
        assert!(qv_quadratic_form(&v, &q).is_err());
    }

    #[test]
    fn rank_estimate_thresholding() {
        let q = QvMatrix::from_matrix(
            DMatrix::from_diagonal(&DVector::from_vec(vec![5.0, 2.0, 1e-9])),
            1.0,
        )
        .unwrap();
        assert_eq!(rank_estimate(&q, 0.01).unwrap(), 2);
        assert!(rank_estimate(&q, 0.0).is_err());
        assert!(rank_estimate(&q, 1.0).is_err());
    }

    #[test]
    fn bilinearity_of_realized_qv() {
        // QV of (aX + bY, Z) = a QV(X,Z) + b QV(Y,Z) exactly (finite sums).
        let t = DVector::from_vec(vec![0.0, 0.3, 0.7, 1.0]);
        let x = [0.0, 1.0, -0.5, 2.0];
        let y = [1.0, 0.2, 0.4, -1.0];
        let z = [0.0, -1.0, 1.0, 0.5];
        let (a, b) = (1.7, -0.6);
        let mk = |cols: Vec<Vec<f64>>| {
            let d = cols.len();
            let vals = DMatrix::from_fn(4, d, |i, j| cols[j][i]);
            MultiPath::new(t.clone(), vals).unwrap()
        };
        let combo: Vec<f64> = (0..4).map(|i| a * x[i] + b * y[i]).collect();
        let q_mix = realized_qv(&mk(vec![combo, z.to_vec()])).unwrap();
        let q_xz = realized_qv(&mk(vec![x.to_vec(), z.to_vec()])).unwrap();
        let q_yz = realized_qv(&mk(vec![y.to_vec(), z.to_vec()])).unwrap();
        assert_abs_diff_eq!(
            q_mix.matrix[(0, 1)],
            a * q_xz.matrix[(0, 1)] + b * q_yz.matrix[(0, 1)],
            epsilon = 1e-12
        );
    }
}
