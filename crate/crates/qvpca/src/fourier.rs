//! Fourier estimation of the quadratic-variation operator of a curve
//! panel: the reduced trigonometric matrix, its spectrum, the rank
//! estimate and eigenfunction reconstruction.
//!
//! With time rescaled to `[0, 2pi]` and curve increments `dX_{k+1}` tagged
//! by their left endpoints `t_k`, the reduced operator on `C^{2M+1}` is
//!
//! ```text
//! Qbar[m, s] = (1/(2M+1)) sum_{k,l} exp(i (s t_k - m t_l)) <dX_{l+1}, dX_{k+1}>_a
//! ```
//!
//! a two-sided discrete Fourier transform of the increment Gram matrix
//! under the discrete Sobolev form. Writing the Gram factor `W` (one
//! weighted-difference column per increment) gives `Qbar = U U^H` with
//! `U = F W' / sqrt(2M+1)`, so the nonzero spectrum equals that of the
//! small real symmetric matrix `S = U^H U = W D W'`, where `D` is the
//! Dirichlet-kernel matrix of time lags. Eigenvalues are computed from
//! `S`; eigenvectors of `Qbar` are recovered as `U w / sqrt(theta)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::eigh_descending;
use crate::qv::default_rank_eps;
use crate::sim::SpaceTimePanel;

use std::f64::consts::PI;

/// Normalized Dirichlet kernel of order `M` with period `period`:
/// `1` at integer multiples of the period (argument tolerance `1e-12`),
/// otherwise `sin((M + 1/2) u) / ((2M+1) sin(u/2))` with `u` the argument
/// rescaled to `[0, 2pi)`.
pub fn dirichlet_kernel(t: f64, m: usize, period: f64) -> f64 {
    let u = t / period * 2.0 * PI;
    // Reduce to (-pi, pi] for a stable sine evaluation.
    let mut r = u % (2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    } else if r <= -PI {
        r += 2.0 * PI;
    }
    if r.abs() < 1e-12 {
        return 1.0;
    }
    let mm = (2 * m + 1) as f64;
    ((m as f64 + 0.5) * r).sin() / (mm * (r / 2.0).sin())
}

/// Reduced Fourier estimate of the quadratic-variation operator.
#[derive(Debug, Clone)]
pub struct FourierEstimate {
    /// Frequency cutoff `M`; the reduced matrix has side `2M + 1`.
    pub m_cutoff: usize,
    /// Eigenvalues of the reduced operator, real, clamped at zero,
    /// descending. Trailing exact zeros beyond the operator rank are
    /// omitted when the Gram factor is smaller than `2M + 1`.
    pub eigenvalues: DVector<f64>,
    /// Eigenvector coefficients of the reduced matrix for every positive
    /// eigenvalue (columns, unit complex norm); these reconstruct the
    /// operator eigenfunctions.
    pub gamma: DMatrix<Complex64>,
    /// Rank estimate at the default absolute threshold `n^(-1/3)`.
    pub p_hat_eps: usize,
    /// The default threshold that produced `p_hat_eps`.
    pub eps_default: f64,
    /// Left-endpoint increment tags rescaled to `[0, 2pi)`.
    rescaled_times: DVector<f64>,
    /// Complex factor `U` with `Qbar = U U^H`.
    factor: DMatrix<Complex64>,
}

impl FourierEstimate {
    /// Materializes the dense reduced matrix `Qbar = U U^H`
    /// (`(2M+1) x (2M+1)`; intended for small cutoffs) and asserts its
    /// Hermitian symmetry.
    pub fn q_bar(&self) -> Result<DMatrix<Complex64>> {
        let q = &self.factor * self.factor.adjoint();
        let scale = q.iter().fold(0.0f64, |a, v| a.max(v.norm()));
        for i in 0..q.nrows() {
            for j in 0..q.ncols() {
                if (q[(i, j)] - q[(j, i)].conj()).norm() > 1e-10 * scale.max(1e-300) {
                    return Err(Error::InvalidInput(
                        "reduced operator lost Hermitian symmetry".into(),
                    ));
                }
            }
        }
        Ok(q)
    }

    /// Frequency index range `-M ..= M` matching the rows of `gamma`.
    pub fn frequencies(&self) -> impl Iterator<Item = i64> + '_ {
        let m = self.m_cutoff as i64;
        -m..=m
    }
}

/// Weighted-difference factor of the increment Gram matrix: column `k`
/// holds the spatial differences of increment `k+1` divided by
/// `sqrt(dx_j)`, so that `W' W` is the Gram matrix under the discrete
/// Sobolev form. A known parametrization is subtracted first (it carries
/// no quadratic variation in the limit but pollutes increments at finite
/// meshes).
fn increment_factor(panel: &SpaceTimePanel) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = panel.n_increments();
    let nx = panel.n_space();
    let mut dx_vals = DMatrix::zeros(n, nx);
    for k in 0..n {
        for j in 0..nx {
            let mut inc = panel.values[(k + 1, j)] - panel.values[(k, j)];
            if let Some(phi) = &panel.phi {
                inc -= phi[(k + 1, j)] - phi[(k, j)];
            }
            dx_vals[(k, j)] = inc;
        }
    }
    let mut w = DMatrix::zeros(nx - 1, n);
    for j in 0..nx - 1 {
        let h = (panel.x_grid[j + 1] - panel.x_grid[j]).sqrt();
        for k in 0..n {
            w[(j, k)] = (dx_vals[(k, j + 1)] - dx_vals[(k, j)]) / h;
        }
    }
    (w, dx_vals)
}

/// Builds the reduced Fourier operator of a panel at cutoff `m`.
///
/// Input panels on an arbitrary `[t_0, t_0 + T]` are affinely rescaled to
/// `[0, 2pi]` before the kernel evaluation; the spectrum itself carries
/// the scale of the curve increments and needs no rescaling back.
pub fn reduced_operator(panel: &SpaceTimePanel, m: usize) -> Result<FourierEstimate> {
    if m < 1 {
        return Err(Error::InvalidInput("cutoff must be at least 1".into()));
    }
    let n = panel.n_increments();
    if n < 2 {
        return Err(Error::InsufficientData(
            "fourier estimation needs at least two increments".into(),
        ));
    }
    let t0 = panel.t_grid[0];
    let horizon = panel.t_grid[n] - t0;
    let times = DVector::from_fn(n, |k, _| (panel.t_grid[k] - t0) / horizon * 2.0 * PI);

    let (w, _) = increment_factor(panel);
    let side = 2 * m + 1;
    // U[row, i] = (1/sqrt(2M+1)) sum_k exp(-i freq t_k) W[i, k]
    let norm = 1.0 / (side as f64).sqrt();
    let mut factor = DMatrix::from_element(side, w.nrows(), Complex64::new(0.0, 0.0));
    for (row, freq) in (-(m as i64)..=m as i64).enumerate() {
        for k in 0..n {
            let phase = Complex64::from_polar(norm, -(freq as f64) * times[k]);
            for i in 0..w.nrows() {
                factor[(row, i)] += phase * w[(i, k)];
            }
        }
    }

    // S = U^H U equals W D W' and is real symmetric in exact arithmetic;
    // assert that before dropping the imaginary part.
    let s_complex = factor.adjoint() * &factor;
    let scale = s_complex.iter().fold(0.0f64, |a, v| a.max(v.norm()));
    let mut s = DMatrix::zeros(s_complex.nrows(), s_complex.ncols());
    for i in 0..s_complex.nrows() {
        for j in 0..s_complex.ncols() {
            let v = s_complex[(i, j)];
            if v.im.abs() > 1e-10 * scale.max(1e-300)
                || (v - s_complex[(j, i)].conj()).norm() > 1e-10 * scale.max(1e-300)
            {
                return Err(Error::InvalidInput(
                    "reduced operator lost Hermitian symmetry".into(),
                ));
            }
            s[(i, j)] = v.re;
        }
    }

    let eig = eigh_descending(&s)?;
    let trace: f64 = eig.values.iter().sum();
    let floor = -1e-8 * trace.abs().max(1e-300);
    let mut eigenvalues = DVector::zeros(eig.values.len());
    for (i, v) in eig.values.iter().enumerate() {
        if *v < floor {
            return Err(Error::InvalidInput(format!(
                "reduced operator has a negative eigenvalue {v:.3e}"
            )));
        }
        eigenvalues[i] = v.max(0.0);
    }

    // gamma_j = U w_j / sqrt(theta_j) for the positive part of the spectrum.
    let pos_tol = 1e-12 * eigenvalues[0].max(f64::MIN_POSITIVE);
    let n_pos = eigenvalues.iter().filter(|v| **v > pos_tol).count();
    let mut gamma = DMatrix::from_element(side, n_pos, Complex64::new(0.0, 0.0));
    for j in 0..n_pos {
        let wj = eig.vector(j);
        let mut col = DVector::from_element(side, Complex64::new(0.0, 0.0));
        for row in 0..side {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..w.nrows() {
                acc += factor[(row, i)] * wj[i];
            }
            col[row] = acc;
        }
        let scale = 1.0 / eigenvalues[j].sqrt();
        gamma.set_column(j, &(col * Complex64::new(scale, 0.0)));
    }

    let eps_default = default_rank_eps(n);
    let p_hat_eps = eigenvalues.iter().filter(|v| **v >= eps_default).count();
    Ok(FourierEstimate {
        m_cutoff: m,
        eigenvalues,
        gamma,
        p_hat_eps,
        eps_default,
        rescaled_times: times,
        factor,
    })
}

/// Number of eigenvalues at or above the absolute threshold `eps`.
pub fn qdim_estimate(est: &FourierEstimate, eps: f64) -> Result<usize> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput("threshold must be positive".into()));
    }
    Ok(est.eigenvalues.iter().filter(|v| **v >= eps).count())
}

/// Relative variant: eigenvalues at or above `eps_rel` times the trace.
pub fn qdim_estimate_relative(est: &FourierEstimate, eps_rel: f64) -> Result<usize> {
    if !(eps_rel > 0.0 && eps_rel < 1.0) {
        return Err(Error::InvalidInput(
            "relative threshold must lie in (0,1)".into(),
        ));
    }
    let trace: f64 = est.eigenvalues.iter().sum();
    if trace <= 0.0 {
        return Ok(0);
    }
    Ok(est
        .eigenvalues
        .iter()
        .filter(|v| **v >= eps_rel * trace)
        .count())
}

/// Reconstructs the eigenfunctions of the operator for the `p_hat_eps`
/// retained eigenvalues:
///
/// ```text
/// e_j(x) = (1/(2M+1)) sum_{|s|<=M} gamma_j(s) sum_k exp(i s t_k) dX_{k+1}(x)
/// ```
///
/// The result is real up to roundoff; an imaginary Sobolev-norm share
/// above `1e-6` is rejected. Returns grid functions on the panel's
/// spatial grid (empty when the rank estimate is zero).
pub fn eigenfunctions(est: &FourierEstimate, panel: &SpaceTimePanel) -> Result<Vec<DVector<f64>>> {
    let n = panel.n_increments();
    if est.rescaled_times.len() != n {
        return Err(Error::InvalidInput(
            "estimate was built from a different panel".into(),
        ));
    }
    let count = est.p_hat_eps.min(est.gamma.ncols());
    if count == 0 {
        return Ok(vec![]);
    }
    let (_, dx_vals) = increment_factor(panel);
    let side = (2 * est.m_cutoff + 1) as f64;
    let nx = panel.n_space();
    let mut out = Vec::with_capacity(count);
    for j in 0..count {
        // c_j(k) = sum_s gamma_j(s) exp(i s t_k)
        let mut coeff = vec![Complex64::new(0.0, 0.0); n];
        for (row, freq) in est.frequencies().enumerate() {
            let g = est.gamma[(row, j)];
            for (c, tk) in coeff.iter_mut().zip(est.rescaled_times.iter()) {
                *c += g * Complex64::from_polar(1.0, freq as f64 * tk);
            }
        }
        let mut func_re = DVector::zeros(nx);
        let mut func_im = DVector::zeros(nx);
        for k in 0..n {
            let c = coeff[k] / side;
            for x in 0..nx {
                func_re[x] += c.re * dx_vals[(k, x)];
                func_im[x] += c.im * dx_vals[(k, x)];
            }
        }
        let re_norm = crate::linalg::sobolev_inner(&func_re, &func_re, &panel.x_grid)?;
        let im_norm = crate::linalg::sobolev_inner(&func_im, &func_im, &panel.x_grid)?;
        if im_norm > 1e-12 * (re_norm + im_norm).max(1e-300) {
            let share = (im_norm / (re_norm + im_norm)).sqrt();
            if share > 1e-6 {
                return Err(Error::InvalidInput(format!(
                    "eigenfunction {j} has imaginary norm share {share:.3e}"
                )));
            }
        }
        out.push(func_re);
    }
    Ok(out)
}
