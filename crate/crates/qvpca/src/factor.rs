//! Variance-based factor extraction from a space-time panel and selection
//! of the number of factors by a penalized least-squares criterion.
//!
//! With `X` the (parametrization-subtracted) `(n+1) x N` observation
//! matrix, the `k`-factor estimate takes the top `k` unit eigenvectors
//! `y^j` of `X X'`, sets `Yhat = rho^{-1/2} [y^1 .. y^k]` (so that
//! `rho Yhat' Yhat = I_k`) and `Lhat = rho X' Yhat`; the fitted panel
//! `Yhat Lhat'` is the best rank-k approximation of `X`. The number of
//! factors minimizes `PC(k) = V(k) + k q(n, N)` over `1..=kmax`, where
//! `V(k) = rho delta || X - Yhat Lhat' ||^2` is the scaled residual.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::sim::SpaceTimePanel;

/// Relative eigenvalue floor below which a principal direction of `X X'`
/// is treated as a zero mode.
const ZERO_MODE_REL_TOL: f64 = 1e-12;

/// Centered observation matrix used by all panel estimators: the
/// parametrization samples are subtracted when the panel carries them,
/// otherwise each spatial column is centered at its time mean (flagged).
pub fn centered_values(panel: &SpaceTimePanel) -> (DMatrix<f64>, bool) {
    match &panel.phi {
        Some(phi) => (&panel.values - phi, false),
        None => {
            let mut x = panel.values.clone();
            let n = x.nrows() as f64;
            for j in 0..x.ncols() {
                let mean = x.column(j).sum() / n;
                for i in 0..x.nrows() {
                    x[(i, j)] -= mean;
                }
            }
            (x, true)
        }
    }
}

/// Output of the k-factor extraction.
#[derive(Debug, Clone)]
pub struct FactorFit {
    pub k: usize,
    /// `(n+1) x k` factor paths with `rho * Yhat' Yhat = I_k`.
    pub y_hat: DMatrix<f64>,
    /// `N x k` loading estimates `rho * X' * Yhat`.
    pub lambda_hat: DMatrix<f64>,
    /// Unit eigenvectors `y^1 .. y^k` of `X X'` (columns).
    pub raw_eigvecs: DMatrix<f64>,
    /// Scaled residual `V(k, Yhat(k))`.
    pub objective: f64,
    /// Time mesh used in the normalizations.
    pub rho: f64,
    /// Space mesh used in the objective.
    pub delta: f64,
    /// Set when no parametrization was available and the panel was
    /// centered at per-column time means instead.
    pub mean_centered: bool,
}

/// Extracts `k` variance factors from the panel.
///
/// Directions beyond the numerical rank of the panel are completed to an
/// orthonormal family deterministically and carry zero loadings, keeping
/// `rho Yhat' Yhat = I_k` valid for every admissible `k`.
pub fn extract_factors(panel: &SpaceTimePanel, k: usize) -> Result<FactorFit> {
    let (x, mean_centered) = centered_values(panel);
    let n1 = x.nrows();
    let nx = x.ncols();
    if k < 1 || k >= n1.min(nx) {
        return Err(Error::InvalidInput(format!(
            "factor count {k} out of range for a {n1}x{nx} panel"
        )));
    }
    let rho = panel.rho();
    let delta = panel.delta();

    // Unit eigenvectors of X X' are the left singular vectors of X; the
    // thin SVD resolves small directions without squaring the condition
    // number (an explicit X' X Gram matrix would drown them in roundoff
    // when the panel scale is large).
    let svd = x.clone().svd(true, false);
    let u = svd
        .u
        .as_ref()
        .ok_or_else(|| Error::DegenerateSpectrum("singular vectors unavailable".into()))?;
    let top = svd.singular_values[0];
    if !(top > 0.0) {
        return Err(Error::DegenerateSpectrum(
            "panel has no nonzero principal direction".into(),
        ));
    }

    let mut raw = DMatrix::zeros(n1, k);
    let mut columns: Vec<DVector<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let y = if svd.singular_values[j] * svd.singular_values[j] > ZERO_MODE_REL_TOL * top * top
        {
            u.column(j).into_owned()
        } else {
            orthonormal_completion(&columns, n1)?
        };
        let y = fix_sign(y);
        raw.set_column(j, &y);
        columns.push(y);
    }

    let y_hat = &raw / rho.sqrt();
    let lambda_hat = x.transpose() * &y_hat * rho;
    let fitted = &y_hat * lambda_hat.transpose();
    let objective = rho * delta * (&x - fitted).norm_squared();
    Ok(FactorFit {
        k,
        y_hat,
        lambda_hat,
        raw_eigvecs: raw,
        objective,
        rho,
        delta,
        mean_centered,
    })
}

fn fix_sign(mut y: DVector<f64>) -> DVector<f64> {
    let mut arg = 0usize;
    let mut best = -1.0f64;
    for (i, v) in y.iter().enumerate() {
        if v.abs() > best {
            best = v.abs();
            arg = i;
        }
    }
    if y[arg] < 0.0 {
        y.neg_mut();
    }
    y
}

/// First standard basis vector orthogonal to the columns produced so far.
fn orthonormal_completion(existing: &[DVector<f64>], n: usize) -> Result<DVector<f64>> {
    for e in 0..n {
        let mut cand = DVector::zeros(n);
        cand[e] = 1.0;
        for u in existing {
            let c = cand.dot(u);
            cand -= u * c;
        }
        let nrm = cand.norm();
        if nrm > 0.5 {
            return Ok(cand / nrm);
        }
    }
    Err(Error::DegenerateSpectrum(
        "could not complete the factor basis".into(),
    ))
}

/// Recomputes the scaled residual `V(k, Yhat) = rho delta ||X - Yhat Lhat'||^2`
/// for a fit produced from the same panel.
pub fn objective_v(panel: &SpaceTimePanel, fit: &FactorFit) -> Result<f64> {
    let (x, _) = centered_values(panel);
    if x.nrows() != fit.y_hat.nrows() || x.ncols() != fit.lambda_hat.nrows() {
        return Err(Error::InvalidInput(
            "fit does not match the panel shape".into(),
        ));
    }
    let fitted = &fit.y_hat * fit.lambda_hat.transpose();
    Ok(fit.rho * fit.delta * (&x - fitted).norm_squared())
}

/// The zero-factor baseline `rho delta ||X||^2`.
pub fn objective_baseline(panel: &SpaceTimePanel) -> f64 {
    let (x, _) = centered_values(panel);
    panel.rho() * panel.delta() * x.norm_squared()
}

/// Penalty scalings `q(n, N)` for the `PC(k)` criterion, all proportional
/// to a residual variance proxy `sigma^2 = V(kmax)`:
///
/// * `Pc1`: `sigma^2 ((n+N)/(nN)) ln(nN/(n+N))`
/// * `Pc2`: `sigma^2 ((n+N)/(nN)) ln(min(n,N))`
/// * `Pc3`: `sigma^2 ln(min(n,N)) / min(n,N)`
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Penalty {
    Pc1,
    Pc2,
    Pc3,
}

impl Penalty {
    pub fn value(&self, sigma2: f64, n_increments: usize, n_space: usize) -> f64 {
        let n = n_increments as f64;
        let nx = n_space as f64;
        let c2 = n.min(nx);
        match self {
            Penalty::Pc1 => sigma2 * ((n + nx) / (n * nx)) * (n * nx / (n + nx)).ln(),
            Penalty::Pc2 => sigma2 * ((n + nx) / (n * nx)) * c2.ln(),
            Penalty::Pc3 => sigma2 * c2.ln() / c2,
        }
    }

    /// The convergence scale `C_{nN} = min(delta^{-1/2}, rho^{-1/2})`.
    pub fn c_nn(rho: f64, delta: f64) -> f64 {
        (1.0 / delta.sqrt()).min(1.0 / rho.sqrt())
    }
}

/// One row of the selection table.
#[derive(Debug, Clone, Copy)]
pub struct PcRow {
    pub k: usize,
    pub v: f64,
    pub pc: f64,
}

/// Outcome of the criterion scan over `1..=kmax`.
#[derive(Debug, Clone)]
pub struct PcSelection {
    pub d_hat: usize,
    pub rows: Vec<PcRow>,
    pub q: f64,
    pub sigma2: f64,
    pub baseline: f64,
}

/// Scans `PC(k) = V(k) + k q(n,N)` over `k = 1..=kmax` and returns the
/// minimizer. Values within `1e-12` of the minimum (relative to the
/// zero-factor baseline) are treated as ties and resolved toward the
/// smaller `k`, so exactly low-rank panels select their rank.
pub fn pc_criterion(panel: &SpaceTimePanel, kmax: usize, penalty: Penalty) -> Result<PcSelection> {
    let n1 = panel.t_grid.len();
    let nx = panel.n_space();
    if kmax < 1 || kmax >= n1.min(nx) {
        return Err(Error::InvalidInput(format!(
            "kmax {kmax} out of range for a {n1}x{nx} panel"
        )));
    }
    let baseline = objective_baseline(panel);
    let mut vs = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        vs.push(extract_factors(panel, k)?.objective);
    }
    let sigma2 = vs[kmax - 1];
    let q = penalty.value(sigma2, panel.n_increments(), nx);
    let rows: Vec<PcRow> = vs
        .iter()
        .enumerate()
        .map(|(i, &v)| PcRow {
            k: i + 1,
            v,
            pc: v + (i + 1) as f64 * q,
        })
        .collect();
    let min_pc = rows.iter().map(|r| r.pc).fold(f64::INFINITY, f64::min);
    let tie = 1e-12 * baseline.max(f64::MIN_POSITIVE);
    let d_hat = rows
        .iter()
        .find(|r| r.pc <= min_pc + tie)
        .map(|r| r.k)
        .unwrap();
    Ok(PcSelection {
        d_hat,
        rows,
        q,
        sigma2,
        baseline,
    })
}
