//! Spectral splitting of an observed multivariate path into volatility and
//! pure-drift factors.
//!
//! The rows of the rotation are the eigenvectors of the realized
//! quadratic-variation matrix in descending eigenvalue order; the rotated
//! components `J = V M` are ranked by realized quadratic variation, the
//! first `p` spanning the volatility space and the remainder the
//! null-quadratic-variation (drift) space.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::qv::{qv_quadratic_form, rank_estimate, realized_qv, MultiPath, QvMatrix};

/// Result of the quadratic-variation principal component split.
#[derive(Debug, Clone)]
pub struct PcaSplit {
    /// Orthogonal matrix whose rows are eigenvectors of the realized
    /// quadratic-variation matrix, descending.
    pub rotation: DMatrix<f64>,
    /// Rotated path `J = V M` (componentwise `J_t = V M_t`).
    pub j_paths: MultiPath,
    /// Estimated dimension of the volatility subspace.
    pub p_hat: usize,
    /// Eigenvalues of the realized quadratic-variation matrix, descending.
    pub eigenvalues: DVector<f64>,
    /// The realized quadratic-variation matrix itself.
    pub qv: QvMatrix,
}

impl PcaSplit {
    /// Indices (0-based) of the volatility components.
    pub fn w_indices(&self) -> std::ops::Range<usize> {
        0..self.p_hat
    }

    /// Indices (0-based) of the drift components.
    pub fn d_indices(&self) -> std::ops::Range<usize> {
        self.p_hat..self.rotation.nrows()
    }
}

/// Rotates a path into quadratic-variation principal components and
/// estimates the split dimension by eigenvalue thresholding at `eps_rel`.
pub fn pca_split(path: &MultiPath, eps_rel: f64) -> Result<PcaSplit> {
    let qv = realized_qv(path)?;
    let p_hat = rank_estimate(&qv, eps_rel)?;
    let rotation = qv.eig.vectors.transpose();
    let j_values = &path.values * rotation.transpose();
    let j_paths = MultiPath::new(path.t_grid.clone(), j_values)?;
    let eigenvalues = qv.eig.values.clone();
    Ok(PcaSplit {
        rotation,
        j_paths,
        p_hat,
        eigenvalues,
        qv,
    })
}

/// Cumulative share of quadratic variation explained by the leading
/// components: `eta_i = sum_{j<=i} lambda_j / sum_j lambda_j`.
pub fn explained_qv_ratios(eigenvalues: &DVector<f64>) -> Result<Vec<f64>> {
    if eigenvalues.iter().any(|v| *v < 0.0) {
        return Err(Error::InvalidInput(
            "explained-variation ratios need nonnegative eigenvalues".into(),
        ));
    }
    let total: f64 = eigenvalues.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateSpectrum(
            "all eigenvalues are zero".into(),
        ));
    }
    let mut acc = 0.0;
    Ok(eigenvalues
        .iter()
        .map(|v| {
            acc += v;
            acc / total
        })
        .collect())
}

/// Ordinary least squares fit of a scalar series on the rotated components.
#[derive(Debug, Clone)]
pub struct OlsFit {
    /// Regression coefficients, one per rotated component.
    pub coefficients: DVector<f64>,
    /// Fitted path `J alpha` on the common grid.
    pub fitted: DVector<f64>,
    /// Set when the design was rank-deficient and the minimum-norm
    /// pseudoinverse solution was returned.
    pub rank_deficient: bool,
}

/// Projects a discretely observed series onto the rotated components by
/// least squares. Collinear designs are solved through the singular value
/// decomposition (minimum-norm coefficients) and flagged.
pub fn ols_project(target: &DVector<f64>, split: &PcaSplit) -> Result<OlsFit> {
    let design = &split.j_paths.values;
    if target.len() != design.nrows() {
        return Err(Error::InvalidInput(format!(
            "target has {} samples but the components have {}",
            target.len(),
            design.nrows()
        )));
    }
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let tol = 1e-12 * smax;
    let rank_deficient = svd.singular_values.iter().any(|s| *s <= tol);
    let coefficients = svd
        .solve(target, tol)
        .map_err(|e| Error::InvalidInput(format!("least-squares solve failed: {e}")))?;
    let fitted = design * &coefficients;
    Ok(OlsFit {
        coefficients,
        fitted,
        rank_deficient,
    })
}

/// Convenience wrapper asserting the variational bound of the split: the
/// quadratic form of any unit vector never exceeds the top eigenvalue.
pub fn variational_excess(split: &PcaSplit, unit: &DVector<f64>) -> Result<f64> {
    Ok(qv_quadratic_form(unit, &split.qv)? - split.eigenvalues[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{standard_normal, uniform_grid};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn brownian(n: usize, t1: f64, seed: u64) -> DVector<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let dt = t1 / n as f64;
        let mut out = DVector::zeros(n + 1);
        for i in 1..=n {
            out[i] = out[i - 1] + standard_normal(&mut rng) * dt.sqrt();
        }
        out
    }

    #[test]
    fn diagonal_case_keeps_axes() {
        // Path with realized QV essentially diag(2, 0).
        let n = 400;
        let t = uniform_grid(0.0, 1.0, n);
        let b = brownian(n, 1.0, 4);
        let vals = DMatrix::from_fn(n + 1, 2, |i, j| if j == 0 { b[i] * 2.0f64.sqrt() } else { 1e-7 * t[i] });
        let path = MultiPath::new(t, vals).unwrap();
        let split = pca_split(&path, 0.05).unwrap();
        assert_eq!(split.p_hat, 1);
        assert!(split.rotation[(0, 0)].abs() > 0.999);
    }

    #[test]
    fn explained_ratios_examples() {
        let r = explained_qv_ratios(&DVector::from_vec(vec![3.0, 1.0])).unwrap();
        assert_abs_diff_eq!(r[0], 0.75, epsilon = 1e-14);
        assert_abs_diff_eq!(r[1], 1.0, epsilon = 1e-14);
        let r2 = explained_qv_ratios(&DVector::from_vec(vec![1.0, 0.0, 0.0])).unwrap();
        assert_eq!(r2, vec![1.0, 1.0, 1.0]);
        assert!(explained_qv_ratios(&DVector::zeros(3)).is_err());
    }

    #[test]
    fn ols_recovers_exact_members() {
        let n = 200;
        let t = uniform_grid(0.0, 1.0, n);
        let b1 = brownian(n, 1.0, 7);
        let b2 = brownian(n, 1.0, 8);
        let vals = DMatrix::from_fn(n + 1, 2, |i, j| if j == 0 { b1[i] } else { b2[i] });
        let path = MultiPath::new(t, vals).unwrap();
        let split = pca_split(&path, 0.01).unwrap();

        let target = split.j_paths.values.column(0) * 2.0;
        let fit = ols_project(&target.into_owned(), &split).unwrap();
        assert!(!fit.rank_deficient);
        assert_abs_diff_eq!(fit.coefficients[0], 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.coefficients[1], 0.0, epsilon = 1e-9);

        let mixed = (split.j_paths.values.column(0) + split.j_paths.values.column(1) * 3.0).into_owned();
        let fit2 = ols_project(&mixed, &split).unwrap();
        assert_abs_diff_eq!(fit2.coefficients[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit2.coefficients[1], 3.0, epsilon = 1e-9);
        // Residual orthogonal to the design columns.
        let resid = &mixed - &fit2.fitted;
        for c in 0..2 {
            assert!(split.j_paths.values.column(c).dot(&resid).abs() < 1e-8);
        }
    }

    #[test]
    fn ols_flags_collinear_design() {
        let t = uniform_grid(0.0, 1.0, 3);
        // Two identical columns.
        let vals = DMatrix::from_fn(4, 2, |i, _| i as f64);
        let path = MultiPath::new(t, vals).unwrap();
        let split = pca_split(&path, 0.5).unwrap();
        let target = DVector::from_fn(4, |i, _| i as f64);
        let fit = ols_project(&target, &split).unwrap();
        assert!(fit.rank_deficient);
        let err = (&fit.fitted - &target).norm();
        assert!(err < 1e-10, "pseudoinverse fit should still be exact, err {err}");
    }

    #[test]
    fn energy_is_preserved_by_the_rotation() {
        let n = 300;
        let t = uniform_grid(0.0, 1.0, n);
        let b1 = brownian(n, 1.0, 21);
        let b2 = brownian(n, 1.0, 22);
        let vals = DMatrix::from_fn(n + 1, 2, |i, j| if j == 0 { b1[i] + 0.3 * b2[i] } else { b2[i] });
        let path = MultiPath::new(t.clone(), vals).unwrap();
        let split = pca_split(&path, 0.01).unwrap();
        let qj = realized_qv(&split.j_paths).unwrap();
        assert_abs_diff_eq!(qj.trace(), split.qv.trace(), epsilon = 1e-10 * split.qv.trace());
        // Components are QV-orthogonal and ranked.
        assert!(qj.matrix[(0, 1)].abs() < 1e-8 * split.qv.trace());
        assert!(qj.matrix[(0, 0)] >= qj.matrix[(1, 1)] - 1e-8 * split.qv.trace());
    }
}
