//! Euler-Maruyama simulation of diffusion factor processes and assembly of
//! noisy space-time observation panels
//!
//! ```text
//! X_{t_i}(x_j) = phi_{t_i}(x_j) + sum_k Z^k_{t_i} lambda_k(x_j) + eps_{t_i}(x_j)
//! ```
//!
//! Every stochastic routine takes an explicit seeded generator state, so
//! identical seeds reproduce bit-identical paths and panels.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{sobolev_inner, InnerProduct};
use crate::qv::MultiPath;

/// One standard normal draw by the Box-Muller transform:
/// `z = sqrt(-2 ln u1) cos(2 pi u2)` with `u1 in (0,1]`, `u2 in [0,1)`.
/// Fully determined by the generator stream (one pair of uniforms per draw).
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Equidistant grid of `n + 1` points spanning `[t0, t1]`.
pub fn uniform_grid(t0: f64, t1: f64, n_increments: usize) -> DVector<f64> {
    let n = n_increments;
    DVector::from_fn(n + 1, |i, _| t0 + (t1 - t0) * i as f64 / n as f64)
}

type DriftFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;
type DiffusionFn = dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync;

/// Time-homogeneous diffusion `dX = mu(X) dt + sigma(X) dB`.
#[derive(Clone)]
pub struct SdeModel {
    pub dim_state: usize,
    pub dim_noise: usize,
    pub drift: Arc<DriftFn>,
    pub diffusion: Arc<DiffusionFn>,
    pub x0: DVector<f64>,
}

impl std::fmt::Debug for SdeModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SdeModel")
            .field("dim_state", &self.dim_state)
            .field("dim_noise", &self.dim_noise)
            .field("x0", &self.x0)
            .finish()
    }
}

fn check_equidistant(t_grid: &DVector<f64>) -> Result<f64> {
    if t_grid.len() < 2 {
        return Err(Error::InsufficientData("time grid needs >= 2 points".into()));
    }
    let dt = t_grid[1] - t_grid[0];
    for i in 1..t_grid.len() {
        let step = t_grid[i] - t_grid[i - 1];
        if !(step > 0.0) || (step - dt).abs() > 1e-9 * dt.abs().max(1e-300) {
            return Err(Error::InvalidInput(
                "euler scheme requires a strictly increasing equidistant grid".into(),
            ));
        }
    }
    Ok(dt)
}

/// Euler-Maruyama discretization on the observation grid itself:
/// `X_{k+1} = X_k + mu(X_k) dt + sigma(X_k) dB_k` with
/// `dB_k ~ N(0, dt I_m)` drawn from `rng`.
pub fn euler_maruyama<R: Rng + ?Sized>(
    model: &SdeModel,
    t_grid: &DVector<f64>,
    rng: &mut R,
) -> Result<MultiPath> {
    let dt = check_equidistant(t_grid)?;
    if model.x0.len() != model.dim_state {
        return Err(Error::InvalidInput(
            "initial state dimension mismatch".into(),
        ));
    }
    let n = t_grid.len() - 1;
    let d = model.dim_state;
    let m = model.dim_noise;
    let sqrt_dt = dt.sqrt();

    let mut values = DMatrix::zeros(n + 1, d);
    let mut x = model.x0.clone();
    for j in 0..d {
        values[(0, j)] = x[j];
    }
    for k in 0..n {
        let mu = (model.drift)(&x);
        let sigma = (model.diffusion)(&x);
        if mu.len() != d || sigma.nrows() != d || sigma.ncols() != m {
            return Err(Error::InvalidInput(
                "drift/diffusion output dimensions do not match the model".into(),
            ));
        }
        let db = DVector::from_fn(m, |_, _| standard_normal(rng) * sqrt_dt);
        x = &x + mu * dt + sigma * db;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { step: k + 1 });
        }
        for j in 0..d {
            values[(k + 1, j)] = x[j];
        }
    }
    MultiPath::new(t_grid.clone(), values)
}

/// A family of loading curves sampled on a spatial grid.
#[derive(Debug, Clone)]
pub struct LoadingSet {
    pub x_grid: DVector<f64>,
    /// One grid function per factor.
    pub functions: Vec<DVector<f64>>,
}

impl LoadingSet {
    pub fn new(x_grid: DVector<f64>, functions: Vec<DVector<f64>>) -> Result<Self> {
        for f in &functions {
            if f.len() != x_grid.len() {
                return Err(Error::InvalidInput(
                    "loading function length does not match the spatial grid".into(),
                ));
            }
        }
        Ok(LoadingSet { x_grid, functions })
    }

    pub fn dim(&self) -> usize {
        self.functions.len()
    }

    /// Gram matrix under the discrete Sobolev form on `x_grid`.
    pub fn sobolev_gram(&self) -> Result<DMatrix<f64>> {
        let d = self.dim();
        let mut g = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let v = sobolev_inner(&self.functions[i], &self.functions[j], &self.x_grid)?;
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Ok(g)
    }

    /// The Sobolev inner product on this loading set's grid.
    pub fn inner_product(&self) -> Result<InnerProduct> {
        InnerProduct::sobolev(self.x_grid.clone())
    }
}

/// Observation-noise specification for panel assembly.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSpec {
    None,
    /// `eps_{t_i}(x_j) = amplitude * u_i * sin(pi x_j)` with `u_i` iid
    /// standard Gaussian over time.
    TimeWhiteSine { amplitude: f64 },
}

impl NoiseSpec {
    /// The amplitude `sqrt(2)/3` used by the built-in curve models.
    pub fn standard_sine() -> Self {
        NoiseSpec::TimeWhiteSine {
            amplitude: 2.0f64.sqrt() / 3.0,
        }
    }
}

/// A panel of curve observations on a time grid times a space grid.
#[derive(Debug, Clone)]
pub struct SpaceTimePanel {
    pub t_grid: DVector<f64>,
    pub x_grid: DVector<f64>,
    /// Row `i` holds the sampled curve at `t_i`.
    pub values: DMatrix<f64>,
    /// Samples of the parametrization when it is known to the observer
    /// (an all-zero matrix for models without one); `None` for ingested
    /// data of unknown origin.
    pub phi: Option<DMatrix<f64>>,
}

impl SpaceTimePanel {
    pub fn new(
        t_grid: DVector<f64>,
        x_grid: DVector<f64>,
        values: DMatrix<f64>,
        phi: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        if values.nrows() != t_grid.len() || values.ncols() != x_grid.len() {
            return Err(Error::InvalidInput(format!(
                "panel is {}x{} but grids have {} and {} points",
                values.nrows(),
                values.ncols(),
                t_grid.len(),
                x_grid.len()
            )));
        }
        for i in 1..t_grid.len() {
            if !(t_grid[i] > t_grid[i - 1]) {
                return Err(Error::InvalidInput("time grid not strictly increasing".into()));
            }
        }
        for j in 1..x_grid.len() {
            if !(x_grid[j] > x_grid[j - 1]) {
                return Err(Error::InvalidInput("space grid not strictly increasing".into()));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("panel has non-finite values".into()));
        }
        if let Some(p) = &phi {
            if p.shape() != values.shape() {
                return Err(Error::InvalidInput(
                    "parametrization samples must match the panel shape".into(),
                ));
            }
        }
        Ok(SpaceTimePanel {
            t_grid,
            x_grid,
            values,
            phi,
        })
    }

    pub fn n_increments(&self) -> usize {
        self.t_grid.len() - 1
    }

    pub fn n_space(&self) -> usize {
        self.x_grid.len()
    }

    /// Time mesh `rho = T / n`.
    pub fn rho(&self) -> f64 {
        (self.t_grid[self.t_grid.len() - 1] - self.t_grid[0]) / self.n_increments() as f64
    }

    /// Space mesh `delta = (b - a) / (N - 1)`.
    pub fn delta(&self) -> f64 {
        (self.x_grid[self.x_grid.len() - 1] - self.x_grid[0]) / (self.n_space() - 1) as f64
    }

    /// Keeps the first `n_rows` time points (with the parametrization
    /// samples truncated alongside).
    pub fn truncated(&self, n_rows: usize) -> Result<SpaceTimePanel> {
        if n_rows < 2 || n_rows > self.t_grid.len() {
            return Err(Error::InvalidInput(format!(
                "cannot truncate a {}-row panel to {n_rows} rows",
                self.t_grid.len()
            )));
        }
        SpaceTimePanel::new(
            self.t_grid.rows(0, n_rows).into_owned(),
            self.x_grid.clone(),
            self.values.rows(0, n_rows).into_owned(),
            self.phi.as_ref().map(|p| p.rows(0, n_rows).into_owned()),
        )
    }

    /// The Sobolev inner product on this panel's spatial grid.
    pub fn inner_product(&self) -> Result<InnerProduct> {
        InnerProduct::sobolev(self.x_grid.clone())
    }
}

/// Superimposes factors, loadings, an optional parametrization and noise
/// into an observation panel:
/// `X_{t_i}(x_j) = phi(t_i, x_j) + sum_k Z^k_{t_i} lambda_k(x_j) + eps_{t_i}(x_j)`.
///
/// The sampled parametrization is stored on the panel (zeros when no `phi`
/// is given), so downstream estimation can subtract it exactly.
pub fn build_panel<R: Rng + ?Sized>(
    factors: &MultiPath,
    loadings: &LoadingSet,
    phi: Option<&dyn Fn(f64, f64) -> f64>,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<SpaceTimePanel> {
    if factors.dim() != loadings.dim() {
        return Err(Error::InvalidInput(format!(
            "{} factors against {} loading curves",
            factors.dim(),
            loadings.dim()
        )));
    }
    let n1 = factors.t_grid.len();
    let nx = loadings.x_grid.len();
    let mut phi_samples = DMatrix::zeros(n1, nx);
    if let Some(p) = phi {
        for i in 0..n1 {
            for j in 0..nx {
                phi_samples[(i, j)] = p(factors.t_grid[i], loadings.x_grid[j]);
            }
        }
    }
    let mut values = phi_samples.clone();
    for (k, lam) in loadings.functions.iter().enumerate() {
        for i in 0..n1 {
            let z = factors.values[(i, k)];
            for j in 0..nx {
                values[(i, j)] += z * lam[j];
            }
        }
    }
    match noise {
        NoiseSpec::None => {}
        NoiseSpec::TimeWhiteSine { amplitude } => {
            for i in 0..n1 {
                let u = standard_normal(rng);
                for j in 0..nx {
                    values[(i, j)] +=
                        amplitude * u * (std::f64::consts::PI * loadings.x_grid[j]).sin();
                }
            }
        }
    }
    SpaceTimePanel::new(
        factors.t_grid.clone(),
        loadings.x_grid.clone(),
        values,
        Some(phi_samples),
    )
}
