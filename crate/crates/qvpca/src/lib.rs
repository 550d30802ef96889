//! Principal component analysis of multivariate semimartingales in terms
//! of quadratic variation, and estimation of finite-dimensional invariant
//! manifolds of stochastic PDEs from noisy space-time panels.
//!
//! The crate is organized around two pipelines:
//!
//! * **Path PCA** ([`qv`], [`pca`]): realized quadratic covariation of a
//!   synchronously sampled path, eigenvalue-threshold rank estimation,
//!   and the rotation into components ranked by quadratic variation. The
//!   leading components span the volatility space, the trailing ones the
//!   hidden pure-drift space.
//! * **Two-step manifold estimation** ([`factor`], [`manifold`]): a
//!   variance-based factor extraction from a curve panel selects the
//!   manifold dimension through a penalized least-squares criterion;
//!   quadratic-variation analysis of the extracted factors then rotates
//!   the estimated loading curves into a volatility subspace and its
//!   drift complement.
//!
//! [`fourier`] estimates the rank of the quadratic-variation operator
//! directly from the panel through a Dirichlet-kernel transform,
//! [`sim`] provides the Euler-Maruyama engine and panel assembly, and
//! [`models`] the built-in benchmark systems.
//!
//! ```
//! use nalgebra::DMatrix;
//! use qvpca::{pca_split, uniform_grid, MultiPath};
//!
//! // A Brownian-like component next to a pure drift: the split finds one
//! // volatility direction and one null direction.
//! let n = 400;
//! let t = uniform_grid(0.0, 1.0, n);
//! let mut rng = <rand_chacha::ChaCha12Rng as rand::SeedableRng>::seed_from_u64(1);
//! let mut b = vec![0.0f64];
//! for _ in 0..n {
//!     let last = *b.last().unwrap();
//!     b.push(last + qvpca::standard_normal(&mut rng) / (n as f64).sqrt());
//! }
//! let values = DMatrix::from_fn(n + 1, 2, |i, j| if j == 0 { b[i] } else { t[i] });
//! let path = MultiPath::new(t, values).unwrap();
//! let split = pca_split(&path, 0.05).unwrap();
//! assert_eq!(split.p_hat, 1);
//! ```

// Negated comparisons like `!(x > 0.0)` are used on purpose: they treat
// NaN as a failure, unlike the inverted operator.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod factor;
pub mod fourier;
pub mod linalg;
pub mod manifold;
pub mod models;
pub mod pca;
pub mod qv;
pub mod sim;

pub use error::{Error, Result};
pub use factor::{extract_factors, objective_baseline, objective_v, pc_criterion, FactorFit, Penalty, PcSelection};
pub use fourier::{dirichlet_kernel, eigenfunctions, qdim_estimate, reduced_operator, FourierEstimate};
pub use linalg::{
    eigh_descending, gram_schmidt, sobolev_inner, subspace_distance, Eigensystem, InnerProduct,
    SubspaceBasis,
};
pub use manifold::{
    dynamic_distance, estimate_loadings, factor_qv_matrix, hs_energy, split_manifold,
    DynamicConfig, ManifoldEstimate, PHatRule,
};
pub use pca::{explained_qv_ratios, ols_project, pca_split, OlsFit, PcaSplit};
pub use qv::{
    default_rank_eps, qv_quadratic_form, rank_estimate, realized_qv, MultiPath, QvMatrix,
};
pub use sim::{
    build_panel, euler_maruyama, standard_normal, uniform_grid, LoadingSet, NoiseSpec, SdeModel,
    SpaceTimePanel,
};
