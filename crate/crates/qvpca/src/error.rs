use thiserror::Error;

/// Errors produced by the estimation and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed argument: wrong shape, non-finite entries, out-of-range
    /// parameter, or incompatible inner products.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The supplied vectors are linearly dependent under the requested
    /// inner product (relative Gram determinant below 1e-12).
    #[error("degenerate basis: {0}")]
    DegenerateBasis(String),

    /// A spectral operation found no usable eigenvalue (e.g. an all-zero
    /// spectrum where a positive one is required).
    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    /// Not enough observations to form the requested quantity.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The simulated state left the finite range at the given step.
    #[error("simulation blew up at step {step}")]
    BlowUp { step: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
