//! Second estimation step: quadratic-variation analysis of the extracted
//! factors, rotation into QV-ranked coordinates, loading-curve estimation
//! and the split of the invariant manifold into a volatility-carrying
//! subspace and its pure-drift complement.
//!
//! Given the factor fit `Yhat` and raw eigenvectors `y^i`, the loading
//! curves are `phihat_i(x) = sqrt(rho) sum_k y^i_{t_k} X_{t_k}(x)`; the
//! rotation `L` diagonalizes the factor quadratic-variation matrix and
//! the rotated loading family `(L phihat)_i` splits into
//! `Q = span{(L phihat)_1 .. (L phihat)_p}` and the complement `N`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::factor::{centered_values, extract_factors, pc_criterion, Penalty};
use crate::fourier::{qdim_estimate, reduced_operator};
use crate::linalg::{eigh_descending, gram_schmidt, SubspaceBasis};
use crate::qv::{default_rank_eps, MultiPath, QvMatrix};
use crate::sim::SpaceTimePanel;

/// How the volatility dimension `p` is estimated inside the split.
#[derive(Debug, Clone)]
pub enum PHatRule {
    /// Count factor-QV eigenvalues at or above `eps_rel` times their sum;
    /// `None` uses the default `n^(-1/3)`.
    Threshold { eps_rel: Option<f64> },
    /// Fourier rank estimate on the panel with cutoff `m` (default
    /// `(n-1)/2`) and absolute threshold `eps` (default `n^(-1/3)`).
    Fourier { m: Option<usize>, eps: Option<f64> },
    /// Fixed externally supplied dimension.
    Fixed(usize),
}

impl Default for PHatRule {
    fn default() -> Self {
        PHatRule::Threshold { eps_rel: None }
    }
}

/// Estimated decomposition of the invariant manifold.
#[derive(Debug, Clone)]
pub struct ManifoldEstimate {
    pub d_hat: usize,
    pub p_hat: usize,
    /// Realized quadratic-variation matrix of the extracted factors.
    pub y_qv: DMatrix<f64>,
    /// Orthogonal rotation whose rows are eigenvectors of `y_qv`,
    /// descending.
    pub l_hat: DMatrix<f64>,
    /// QV-ranked factor paths `Z = L Yhat` on the panel's time grid.
    pub z_paths: MultiPath,
    /// Eigenvalues of `y_qv`, descending; `theta_j` equals the realized
    /// quadratic variation of `Z^j` exactly.
    pub theta: DVector<f64>,
    /// Estimated loading curves, one per factor.
    pub phi_hat: Vec<DVector<f64>>,
    /// Rotated loading curves `(L phihat)_i`.
    pub rotated_loadings: Vec<DVector<f64>>,
    /// Span of the first `p_hat` rotated loadings.
    pub q_space: SubspaceBasis,
    /// Span of the remaining rotated loadings.
    pub n_space: SubspaceBasis,
    /// Cumulative explained-QV ratios of `theta`.
    pub eta: Vec<f64>,
    /// Set when the panel had no parametrization and was mean-centered.
    pub mean_centered: bool,
}

impl ManifoldEstimate {
    /// Joint basis of the estimated manifold `Q + N` (all rotated
    /// loadings).
    pub fn manifold_basis(&self) -> Result<SubspaceBasis> {
        SubspaceBasis::new(
            self.rotated_loadings.clone(),
            self.q_space.inner_product.clone(),
        )
    }

    /// Total quadratic-variation energy `sum_j theta_j^2`.
    pub fn hs_energy(&self) -> f64 {
        hs_energy(&self.theta)
    }
}

/// Realized quadratic-covariation matrix of factor paths (rows = times).
pub fn factor_qv_matrix(y_hat: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if y_hat.nrows() < 2 {
        return Err(Error::InsufficientData(
            "factor quadratic variation needs at least two time points".into(),
        ));
    }
    let n = y_hat.nrows() - 1;
    let d = y_hat.ncols();
    let mut inc = DMatrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            inc[(i, j)] = y_hat[(i + 1, j)] - y_hat[(i, j)];
        }
    }
    Ok(inc.transpose() * inc)
}

/// Loading-curve estimates `phihat_i(x) = sqrt(rho) sum_k y^i_{t_k} X_{t_k}(x)`
/// from the unit eigenvectors produced by the factor extraction.
pub fn estimate_loadings(
    panel: &SpaceTimePanel,
    raw_eigvecs: &DMatrix<f64>,
) -> Result<Vec<DVector<f64>>> {
    let (x, _) = centered_values(panel);
    if raw_eigvecs.nrows() != x.nrows() {
        return Err(Error::InvalidInput(
            "eigenvector length does not match the panel".into(),
        ));
    }
    let rho = panel.rho();
    let weights = x.transpose() * raw_eigvecs * rho.sqrt();
    Ok((0..raw_eigvecs.ncols())
        .map(|i| weights.column(i).into_owned())
        .collect())
}

/// Sum of squared eigenvalues: the squared Hilbert-Schmidt norm of the
/// estimated quadratic-variation operator.
pub fn hs_energy(theta: &DVector<f64>) -> f64 {
    theta.iter().map(|v| v * v).sum()
}

/// Runs the full second step on a panel for a given number of factors.
pub fn split_manifold(
    panel: &SpaceTimePanel,
    d_hat: usize,
    p_rule: &PHatRule,
) -> Result<ManifoldEstimate> {
    let fit = extract_factors(panel, d_hat)?;
    let y_qv = factor_qv_matrix(&fit.y_hat)?;
    let eig = eigh_descending(&y_qv)?;
    let theta = DVector::from_fn(d_hat, |i, _| eig.values[i].max(0.0));
    let l_hat = eig.vectors.transpose();

    let z_values = &fit.y_hat * l_hat.transpose();
    let z_paths = MultiPath::new(panel.t_grid.clone(), z_values)?;

    let p_hat = match p_rule {
        PHatRule::Threshold { eps_rel } => {
            let eps = eps_rel.unwrap_or_else(|| default_rank_eps(panel.n_increments()));
            let horizon = panel.t_grid[panel.t_grid.len() - 1] - panel.t_grid[0];
            let q = QvMatrix::from_matrix(y_qv.clone(), horizon)?;
            crate::qv::rank_estimate(&q, eps)?
        }
        PHatRule::Fourier { m, eps } => {
            let m = m.unwrap_or((panel.n_increments() - 1) / 2);
            let est = reduced_operator(panel, m)?;
            let eps = eps.unwrap_or_else(|| default_rank_eps(panel.n_increments()));
            qdim_estimate(&est, eps)?
        }
        PHatRule::Fixed(p) => *p,
    };
    if p_hat > d_hat {
        return Err(Error::InvalidInput(format!(
            "volatility dimension {p_hat} exceeds the factor count {d_hat}"
        )));
    }

    let phi_hat = estimate_loadings(panel, &fit.raw_eigvecs)?;
    let rotated_loadings: Vec<DVector<f64>> = (0..d_hat)
        .map(|i| {
            let mut acc = DVector::zeros(panel.n_space());
            for j in 0..d_hat {
                acc += &phi_hat[j] * l_hat[(i, j)];
            }
            acc
        })
        .collect();

    let ip = panel.inner_product()?;
    let q_space = SubspaceBasis::new(rotated_loadings[..p_hat].to_vec(), ip.clone())?;
    let n_space = SubspaceBasis::new(rotated_loadings[p_hat..].to_vec(), ip)?;
    let eta = crate::pca::explained_qv_ratios(&theta)?;

    Ok(ManifoldEstimate {
        d_hat,
        p_hat,
        y_qv,
        l_hat,
        z_paths,
        theta,
        phi_hat,
        rotated_loadings,
        q_space,
        n_space,
        eta,
        mean_centered: fit.mean_centered,
    })
}

/// Configuration of the repeated estimation behind the backward-lag
/// manifold-stability diagnostic.
#[derive(Debug, Clone)]
pub struct DynamicConfig {
    pub kmax: usize,
    pub penalty: Penalty,
    /// Fix the factor count instead of re-selecting it per truncation.
    pub d_hat: Option<usize>,
    pub p_rule: PHatRule,
}

/// For each backward lag `k`, re-runs the full estimation on the panel
/// truncated to its first `n+1-k` rows and reports the subspace distance
/// between the orthonormalized manifold estimates (full sample vs
/// truncated), under the Sobolev form on the panel's spatial grid.
pub fn dynamic_distance(
    panel: &SpaceTimePanel,
    lags: &[usize],
    config: &DynamicConfig,
) -> Result<Vec<(usize, f64)>> {
    let n1 = panel.t_grid.len();
    if let Some(&max_lag) = lags.iter().max() {
        if max_lag + 2 > n1 {
            return Err(Error::InvalidInput(format!(
                "lag {max_lag} leaves fewer than two observations"
            )));
        }
    }
    let ip = panel.inner_product()?;
    let full = manifold_span(panel, config)?;
    let full_on = gram_schmidt(&full, &ip)?;
    let mut out = Vec::with_capacity(lags.len());
    for &lag in lags {
        if lag == 0 {
            out.push((0, 0.0));
            continue;
        }
        let truncated = panel.truncated(n1 - lag)?;
        let reduced = manifold_span(&truncated, config)?;
        let reduced_on = gram_schmidt(&reduced, &ip)?;
        let d = crate::linalg::subspace_distance(&full_on, &reduced_on)?;
        out.push((lag, d));
    }
    Ok(out)
}

fn manifold_span(panel: &SpaceTimePanel, config: &DynamicConfig) -> Result<Vec<DVector<f64>>> {
    let d_hat = match config.d_hat {
        Some(d) => d,
        None => pc_criterion(panel, config.kmax, config.penalty)?.d_hat,
    };
    let est = split_manifold(panel, d_hat, &config.p_rule)?;
    Ok(est.rotated_loadings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::uniform_grid;
    use approx::assert_abs_diff_eq;

    fn simple_panel() -> SpaceTimePanel {
        // Exact two-factor panel with known loadings.
        let n1 = 80;
        let nx = 9;
        let t = uniform_grid(0.0, 1.0, n1 - 1);
        let x = uniform_grid(0.0, 2.0, nx - 1);
        let f1 = DVector::from_fn(n1, |i, _| (1.3 * i as f64).sin());
        let f2 = DVector::from_fn(n1, |i, _| 0.5 * (i as f64 / (n1 - 1) as f64));
        let g1 = DVector::from_fn(nx, |j, _| 1.0 + (j as f64) * 0.5);
        let g2 = DVector::from_fn(nx, |j, _| ((j as f64) * 0.8).cos());
        let vals = &f1 * g1.transpose() + &f2 * g2.transpose();
        SpaceTimePanel::new(t, x, vals, Some(DMatrix::zeros(n1, nx))).unwrap()
    }

    #[test]
    fn hs_energy_arithmetic() {
        assert_eq!(hs_energy(&DVector::from_vec(vec![3.0, 4.0])), 25.0);
        assert_eq!(hs_energy(&DVector::zeros(5)), 0.0);
    }

    #[test]
    fn factor_qv_of_constant_factors_is_zero() {
        let y = DMatrix::from_element(10, 3, 2.0);
        let q = factor_qv_matrix(&y).unwrap();
        assert!(q.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn factor_qv_matches_path_qv_in_one_dim() {
        let n = 50;
        let y = DMatrix::from_fn(n + 1, 1, |i, _| ((i * i) as f64 * 0.01).sin());
        let q = factor_qv_matrix(&y).unwrap();
        let t = uniform_grid(0.0, 1.0, n);
        let p = MultiPath::new(t, y.clone()).unwrap();
        let q2 = crate::qv::realized_qv(&p).unwrap();
        assert_abs_diff_eq!(q[(0, 0)], q2.matrix[(0, 0)], epsilon = 1e-14);
    }

    #[test]
    fn loadings_collapse_for_unit_rank_one_panel() {
        // X = y g' with unit y: phihat_1 = sqrt(rho) g.
        let n1 = 30;
        let nx = 5;
        let t = uniform_grid(0.0, 1.0, n1 - 1);
        let x = uniform_grid(0.0, 1.0, nx - 1);
        let mut y = DVector::from_fn(n1, |i, _| (0.37 * i as f64).sin() + 0.2);
        y /= y.norm();
        let g = DVector::from_fn(nx, |j, _| 2.0 - j as f64);
        let vals = &y * g.transpose();
        let panel =
            SpaceTimePanel::new(t, x, vals, Some(DMatrix::zeros(n1, nx))).unwrap();
        let fit = extract_factors(&panel, 1).unwrap();
        let phis = estimate_loadings(&panel, &fit.raw_eigvecs).unwrap();
        let rho = panel.rho();
        // Up to the deterministic sign convention on y.
        let direct = &g * rho.sqrt();
        let diff = (phis[0].clone() - direct.clone()).norm().min((phis[0].clone() + direct).norm());
        assert!(diff < 1e-10);
    }

    #[test]
    fn zero_panel_loadings_are_zero() {
        let panel = simple_panel();
        let raw = DMatrix::zeros(panel.t_grid.len(), 2);
        // Zero eigenvectors are not produced by extract_factors, but the
        // weighted-sum formula itself must return zero functions.
        let phis = estimate_loadings(&panel, &raw).unwrap();
        assert!(phis.iter().all(|p| p.norm() == 0.0));
    }

    #[test]
    fn split_identities_hold_exactly() {
        let panel = simple_panel();
        let est = split_manifold(&panel, 2, &PHatRule::default()).unwrap();
        // theta_j = [Z^j]_T exactly.
        let zq = factor_qv_matrix(&est.z_paths.values).unwrap();
        for j in 0..2 {
            assert_abs_diff_eq!(
                zq[(j, j)],
                est.theta[j],
                epsilon = 1e-12 * est.theta[0].max(1e-300)
            );
        }
        // Trace preserved by the rotation.
        assert_abs_diff_eq!(
            zq.trace(),
            est.y_qv.trace(),
            epsilon = 1e-12 * est.y_qv.trace().abs().max(1e-300)
        );
        // Q and N are complementary inside the loading span.
        assert_eq!(est.q_space.dim() + est.n_space.dim(), 2);
        let joint = est.manifold_basis().unwrap();
        assert_eq!(joint.dim(), 2);
    }

    #[test]
    fn diagonal_factor_qv_keeps_axes() {
        // Factors with QV diag(th1, th2, 0): L is the identity up to sign,
        // Q spans the first loadings, N the last.
        let n1 = 200;
        let t = uniform_grid(0.0, 1.0, n1 - 1);
        let x = uniform_grid(0.0, 1.0, 5);
        // Fast oscillation = large QV; slow = small; smooth line = near zero.
        let f1 = DVector::from_fn(n1, |i, _| (7.0 * i as f64).sin());
        let f2 = DVector::from_fn(n1, |i, _| 0.4 * (2.0 * i as f64).cos());
        let f3 = DVector::from_fn(n1, |i, _| i as f64 / n1 as f64 * 1e-3);
        let g1 = DVector::from_fn(6, |j, _| 1.0 + j as f64);
        let g2 = DVector::from_fn(6, |j, _| (j as f64 * 0.9).sin() + 2.0);
        let g3 = DVector::from_fn(6, |j, _| (j as f64 * 1.7).cos() - 0.5);
        let vals = &f1 * g1.transpose() + &f2 * g2.transpose() + &f3 * g3.transpose();
        let panel = SpaceTimePanel::new(t, x, vals, Some(DMatrix::zeros(n1, 6))).unwrap();
        let est = split_manifold(&panel, 3, &PHatRule::Threshold { eps_rel: Some(1e-4) }).unwrap();
        assert_eq!(est.p_hat + est.n_space.dim(), 3);
        assert!(est.theta[0] >= est.theta[1] && est.theta[1] >= est.theta[2]);
    }

    #[test]
    fn dynamic_distance_zero_lag_is_zero() {
        let panel = simple_panel();
        let cfg = DynamicConfig {
            kmax: 3,
            penalty: Penalty::Pc1,
            d_hat: Some(2),
            p_rule: PHatRule::default(),
        };
        let out = dynamic_distance(&panel, &[0, 5], &cfg).unwrap();
        assert_eq!(out[0], (0, 0.0));
        assert!(out[1].1 < 1e-6, "exact low-rank panel spans agree");
    }

    #[test]
    fn dynamic_distance_rejects_excessive_lag() {
        let panel = simple_panel();
        let cfg = DynamicConfig {
            kmax: 3,
            penalty: Penalty::Pc1,
            d_hat: Some(2),
            p_rule: PHatRule::default(),
        };
        assert!(dynamic_distance(&panel, &[panel.t_grid.len()], &cfg).is_err());
    }
}
