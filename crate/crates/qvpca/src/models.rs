//! Built-in benchmark systems: a four-factor diffusion observed directly,
//! two curve models driven by it, a Heath-Jarrow-Morton forward-curve
//! realization with a known parametrization, and a pair of two-factor
//! curve models contrasting variance against quadratic variation.
//!
//! The shared loading curves are
//!
//! ```text
//! lambda_1 = x cos x          lambda_2 = cos x - x sin x
//! lambda_3 = -2 sin x - x cos x   lambda_4 = x sin x - 3 cos x
//! ```
//!
//! on `[0, 5]`; note each is the derivative of the previous one, which is
//! what lets the shift semigroup act inside their span.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::Result;
use crate::qv::MultiPath;
use crate::sim::{build_panel, euler_maruyama, LoadingSet, NoiseSpec, SdeModel, SpaceTimePanel};

/// A simulated factor path together with the panel built from it.
pub type SimulatedPanel = (MultiPath, SpaceTimePanel);

/// `lambda_1(x) = x cos x`.
pub fn lambda1(x: f64) -> f64 {
    x * x.cos()
}

/// `lambda_2(x) = cos x - x sin x`.
pub fn lambda2(x: f64) -> f64 {
    x.cos() - x * x.sin()
}

/// `lambda_3(x) = -2 sin x - x cos x`.
pub fn lambda3(x: f64) -> f64 {
    -2.0 * x.sin() - x * x.cos()
}

/// `lambda_4(x) = x sin x - 3 cos x`.
pub fn lambda4(x: f64) -> f64 {
    x * x.sin() - 3.0 * x.cos()
}

fn sample(f: fn(f64) -> f64, x_grid: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(x_grid.len(), |j, _| f(x_grid[j]))
}

/// The four standard loading curves sampled on a grid.
pub fn standard_loadings(x_grid: &DVector<f64>) -> Result<LoadingSet> {
    LoadingSet::new(
        x_grid.clone(),
        vec![
            sample(lambda1, x_grid),
            sample(lambda2, x_grid),
            sample(lambda3, x_grid),
            sample(lambda4, x_grid),
        ],
    )
}

/// The first two standard loading curves only.
pub fn pair_loadings(x_grid: &DVector<f64>) -> Result<LoadingSet> {
    LoadingSet::new(
        x_grid.clone(),
        vec![sample(lambda1, x_grid), sample(lambda2, x_grid)],
    )
}

fn four_factor_drift(x: &DVector<f64>) -> DVector<f64> {
    DVector::from_vec(vec![x[1], -2.0 * x[0] + x[2], x[3], -x[0]])
}

/// Four-dimensional diffusion driven by three Brownian motions whose
/// quadratic-variation matrix has rank three: the direction `e3 - e4`
/// carries drift only. Observed directly as a path (model id `7.1`).
pub fn four_factor_path_model() -> SdeModel {
    SdeModel {
        dim_state: 4,
        dim_noise: 3,
        drift: Arc::new(four_factor_drift),
        diffusion: Arc::new(|x: &DVector<f64>| {
            DMatrix::from_row_slice(
                4,
                3,
                &[
                    1.0, 0.0, x[1], //
                    0.0, 1.0, 0.0, //
                    0.0, 0.0, x[1], //
                    0.0, 0.0, x[1],
                ],
            )
        }),
        x0: DVector::zeros(4),
    }
}

/// The same drift with a diagonal-structure diffusion; the fourth factor
/// is pure drift. Used as the latent system of the four-factor curve
/// model (model id `7.3`).
pub fn four_factor_curve_sde() -> SdeModel {
    SdeModel {
        dim_state: 4,
        dim_noise: 3,
        drift: Arc::new(four_factor_drift),
        diffusion: Arc::new(|x: &DVector<f64>| {
            DMatrix::from_row_slice(
                4,
                3,
                &[
                    1.0, 0.0, 0.0, //
                    0.0, x[1], 0.0, //
                    0.0, 0.0, x[0], //
                    0.0, 0.0, 0.0,
                ],
            )
        }),
        x0: DVector::zeros(4),
    }
}

/// Latent factor system of the Heath-Jarrow-Morton realization
/// (model id `hjm`):
///
/// ```text
/// dZ1 = -Z2 dt + dB1        dZ2 = (-2 Z1 + Z3) dt + dB2
/// dZ3 = (Z4 - Z1) dt + dB3  dZ4 = -Z1 dt
/// ```
pub fn hjm_factor_sde() -> SdeModel {
    SdeModel {
        dim_state: 4,
        dim_noise: 3,
        drift: Arc::new(|z: &DVector<f64>| {
            DVector::from_vec(vec![-z[1], -2.0 * z[0] + z[2], z[3] - z[0], -z[0]])
        }),
        diffusion: Arc::new(|_z| {
            DMatrix::from_row_slice(
                4,
                3,
                &[
                    1.0, 0.0, 0.0, //
                    0.0, 1.0, 0.0, //
                    0.0, 0.0, 1.0, //
                    0.0, 0.0, 0.0,
                ],
            )
        }),
        x0: DVector::zeros(4),
    }
}

/// Closed-form parametrization of the Heath-Jarrow-Morton realization;
/// smooth in time (null quadratic variation) and zero at `t = 0`.
pub fn hjm_phi(t: f64, x: f64) -> f64 {
    let f = |u: f64| u * u.sin() + u.cos();
    -0.5 * f(x).powi(2) + 0.5 * f(x + t).powi(2) - 0.5 * lambda1(x).powi(2)
        + 0.5 * lambda1(x + t).powi(2)
        - 0.5 * lambda2(x).powi(2)
        + 0.5 * lambda2(x + t).powi(2)
}

/// Simulates the four-factor curve model: latent path from
/// [`four_factor_curve_sde`], curves assembled with the four standard
/// loadings, no parametrization.
pub fn simulate_four_factor_panel<R: Rng + ?Sized>(
    t_grid: &DVector<f64>,
    x_grid: &DVector<f64>,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<(MultiPath, SpaceTimePanel)> {
    let factors = euler_maruyama(&four_factor_curve_sde(), t_grid, rng)?;
    let loadings = standard_loadings(x_grid)?;
    let panel = build_panel(&factors, &loadings, None, noise, rng)?;
    Ok((factors, panel))
}

/// Simulates the Heath-Jarrow-Morton realization with its known
/// parametrization.
pub fn simulate_hjm_panel<R: Rng + ?Sized>(
    t_grid: &DVector<f64>,
    x_grid: &DVector<f64>,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<(MultiPath, SpaceTimePanel)> {
    let factors = euler_maruyama(&hjm_factor_sde(), t_grid, rng)?;
    let loadings = standard_loadings(x_grid)?;
    let panel = build_panel(&factors, &loadings, Some(&hjm_phi), noise, rng)?;
    Ok((factors, panel))
}

/// The two-factor pair (model id `7.2`): both panels share one simulated
/// Brownian motion `B` and differ in the drift factor,
///
/// ```text
/// X_t = B_t lambda_1 + (sin(15 t) - B_t) lambda_2    (fast drift)
/// U_t = B_t lambda_1 + (sin(3 t)  - B_t) lambda_2    (slow drift)
/// ```
///
/// Returns the two factor paths and the two panels `(X, U)`.
pub fn simulate_sine_pair_panels<R: Rng + ?Sized>(
    t_grid: &DVector<f64>,
    x_grid: &DVector<f64>,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<(SimulatedPanel, SimulatedPanel)> {
    let bm = SdeModel {
        dim_state: 1,
        dim_noise: 1,
        drift: Arc::new(|_x| DVector::zeros(1)),
        diffusion: Arc::new(|_x| DMatrix::from_element(1, 1, 1.0)),
        x0: DVector::zeros(1),
    };
    let b = euler_maruyama(&bm, t_grid, rng)?;
    let loadings = pair_loadings(x_grid)?;
    let mut make = |freq: f64| -> Result<SimulatedPanel> {
        let values = DMatrix::from_fn(t_grid.len(), 2, |i, j| {
            let bt = b.values[(i, 0)];
            if j == 0 {
                bt
            } else {
                (freq * t_grid[i]).sin() - bt
            }
        });
        let factors = MultiPath::new(t_grid.clone(), values)?;
        let panel = build_panel(&factors, &loadings, None, noise, rng)?;
        Ok((factors, panel))
    };
    let fast = make(15.0)?;
    let slow = make(3.0)?;
    Ok((fast, slow))
}
