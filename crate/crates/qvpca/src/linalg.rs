//! Inner products, symmetric eigendecomposition, Gram-Schmidt
//! orthonormalization and the subspace metric used by every estimator in
//! this crate.
//!
//! Two inner products appear throughout: the Euclidean dot product on
//! coefficient vectors, and a discrete first-derivative (Sobolev) form on
//! grid functions,
//!
//! ```text
//! <f,g>_a = sum_j (f(x_j) - f(x_{j-1})) (g(x_j) - g(x_{j-1})) / (x_j - x_{j-1})
//! ```
//!
//! which is the natural bilinear form on absolutely continuous functions
//! vanishing at the left endpoint (constants are null vectors of the form).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance below which a family of vectors is treated as
/// linearly dependent: vector `k` is degenerate when the squared norm of
/// its residual against the span of vectors `1..k-1` falls below this
/// fraction of its own squared norm. (A single aggregate Gram-determinant
/// gate would multiply the per-vector ratios together and misclassify
/// well-separated families of moderate conditioning.)
pub const INDEPENDENCE_REL_TOL: f64 = 1e-12;

/// Inner product specification shared by subspace bases.
#[derive(Debug, Clone, PartialEq)]
pub enum InnerProduct {
    /// Standard dot product on `R^n`.
    Euclidean,
    /// Discrete Sobolev form on functions sampled over `x_grid`.
    SobolevGrid { x_grid: DVector<f64> },
}

impl InnerProduct {
    /// Builds the Sobolev variant, validating the grid.
    pub fn sobolev(x_grid: DVector<f64>) -> Result<Self> {
        check_grid(&x_grid)?;
        Ok(InnerProduct::SobolevGrid { x_grid })
    }

    /// Evaluates the inner product of two vectors/grid functions.
    pub fn apply(&self, f: &DVector<f64>, g: &DVector<f64>) -> Result<f64> {
        if f.len() != g.len() {
            return Err(Error::InvalidInput(format!(
                "inner product arguments have lengths {} and {}",
                f.len(),
                g.len()
            )));
        }
        match self {
            InnerProduct::Euclidean => Ok(f.dot(g)),
            InnerProduct::SobolevGrid { x_grid } => sobolev_inner(f, g, x_grid),
        }
    }

    fn norm_sq(&self, f: &DVector<f64>) -> Result<f64> {
        self.apply(f, f)
    }
}

fn check_grid(x_grid: &DVector<f64>) -> Result<()> {
    if x_grid.len() < 2 {
        return Err(Error::InvalidInput(
            "sobolev grid needs at least 2 points".into(),
        ));
    }
    for j in 1..x_grid.len() {
        if !(x_grid[j] > x_grid[j - 1]) {
            return Err(Error::InvalidInput(format!(
                "sobolev grid not strictly increasing at index {j}"
            )));
        }
    }
    if x_grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("sobolev grid has non-finite entries".into()));
    }
    Ok(())
}

/// Discrete Sobolev inner product `sum_j df_j dg_j / dx_j` of two grid
/// functions sampled on `x_grid`; zero whenever either argument is constant.
pub fn sobolev_inner(f: &DVector<f64>, g: &DVector<f64>, x_grid: &DVector<f64>) -> Result<f64> {
    check_grid(x_grid)?;
    if f.len() != x_grid.len() || g.len() != x_grid.len() {
        return Err(Error::InvalidInput(format!(
            "grid functions of lengths {}/{} do not match grid of length {}",
            f.len(),
            g.len(),
            x_grid.len()
        )));
    }
    let mut acc = 0.0;
    for j in 1..x_grid.len() {
        let df = f[j] - f[j - 1];
        let dg = g[j] - g[j - 1];
        acc += df * dg / (x_grid[j] - x_grid[j - 1]);
    }
    Ok(acc)
}

/// Eigenvalues (descending) and matching orthonormal eigenvectors of a
/// real symmetric matrix.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    /// Eigenvalues sorted in descending order.
    pub values: DVector<f64>,
    /// Columns are the eigenvectors, ordered like `values`.
    pub vectors: DMatrix<f64>,
}

impl Eigensystem {
    /// i-th eigenvector (column view copied out).
    pub fn vector(&self, i: usize) -> DVector<f64> {
        self.vectors.column(i).into_owned()
    }
}

/// Symmetric eigendecomposition with descending eigenvalue order and a
/// deterministic sign convention: each eigenvector is flipped so that its
/// largest-magnitude entry is positive (first such entry on ties).
///
/// The input must be square and symmetric within `1e-10` relative to its
/// largest entry.
pub fn eigh_descending(a: &DMatrix<f64>) -> Result<Eigensystem> {
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidInput(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-10 * scale.max(1e-300) {
                return Err(Error::InvalidInput(format!(
                    "matrix is not symmetric at ({i},{j})"
                )));
            }
        }
    }
    let n = a.nrows();
    // Work on the symmetrized matrix so roundoff-level asymmetry cannot leak
    // into the decomposition.
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap()
            .then(i.cmp(&j))
    });

    let mut values = DVector::zeros(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (pos, &idx) in order.iter().enumerate() {
        values[pos] = eig.eigenvalues[idx];
        let mut col = eig.eigenvectors.column(idx).into_owned();
        let mut arg = 0usize;
        let mut best = -1.0f64;
        for (r, v) in col.iter().enumerate() {
            if v.abs() > best {
                best = v.abs();
                arg = r;
            }
        }
        if col[arg] < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(pos, &col);
    }

    debug_assert!({
        let recon = &vectors * DMatrix::from_diagonal(&values) * vectors.transpose();
        (recon - &sym).norm() <= 1e-8 * sym.norm().max(1e-300)
    });
    Ok(Eigensystem { values, vectors })
}

/// A finite family of vectors (or grid functions) spanning a subspace,
/// together with the inner product that geometry lives in.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    pub vectors: Vec<DVector<f64>>,
    pub inner_product: InnerProduct,
    /// Set when the basis is known to be orthonormal under `inner_product`.
    pub orthonormal: bool,
}

impl SubspaceBasis {
    /// Wraps a family of vectors after checking linear independence
    /// (relative Gram determinant at least [`GRAM_DET_REL_TOL`]).
    /// An empty family is the trivial subspace and is allowed.
    pub fn new(vectors: Vec<DVector<f64>>, inner_product: InnerProduct) -> Result<Self> {
        if !vectors.is_empty() {
            check_same_len(&vectors)?;
            check_independent(&vectors, &inner_product)?;
        }
        Ok(SubspaceBasis {
            vectors,
            inner_product,
            orthonormal: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    /// Gram matrix of the basis under its inner product.
    pub fn gram(&self) -> Result<DMatrix<f64>> {
        gram_matrix(&self.vectors, &self.inner_product)
    }

    /// Returns an orthonormal basis with the same span (classical
    /// Gram-Schmidt); a no-op if already flagged orthonormal.
    pub fn orthonormalized(&self) -> Result<SubspaceBasis> {
        if self.orthonormal || self.vectors.is_empty() {
            return Ok(self.clone());
        }
        gram_schmidt(&self.vectors, &self.inner_product)
    }
}

fn check_same_len(vectors: &[DVector<f64>]) -> Result<()> {
    let n = vectors[0].len();
    if vectors.iter().any(|v| v.len() != n) {
        return Err(Error::InvalidInput(
            "basis vectors have mismatched lengths".into(),
        ));
    }
    Ok(())
}

fn gram_matrix(vectors: &[DVector<f64>], ip: &InnerProduct) -> Result<DMatrix<f64>> {
    let d = vectors.len();
    let mut g = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v = ip.apply(&vectors[i], &vectors[j])?;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

fn check_independent(vectors: &[DVector<f64>], ip: &InnerProduct) -> Result<()> {
    sequential_orthonormalize(vectors, ip).map(|_| ())
}

fn sequential_orthonormalize(
    vectors: &[DVector<f64>],
    ip: &InnerProduct,
) -> Result<Vec<DVector<f64>>> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(vectors.len());
    for (k, v) in vectors.iter().enumerate() {
        let scale = ip.norm_sq(v)?;
        if !(scale > 0.0) {
            return Err(Error::DegenerateBasis(format!(
                "vector {k} has zero norm under the inner product"
            )));
        }
        let mut w = v.clone();
        for u in &out {
            let c = ip.apply(&w, u)?;
            w -= u * c;
        }
        let n2 = ip.norm_sq(&w)?;
        if !(n2 > INDEPENDENCE_REL_TOL * scale) {
            return Err(Error::DegenerateBasis(format!(
                "vector {k} lies in the span of its predecessors \
                 (residual share {:.3e})",
                n2 / scale
            )));
        }
        out.push(w / n2.sqrt());
    }
    Ok(out)
}

/// Classical (sequential) Gram-Schmidt orthonormalization: vector `k` is
/// orthogonalized against the already-produced outputs `1..k-1` and then
/// normalized. Span is preserved; input must be linearly independent
/// (per-vector residual share at least [`INDEPENDENCE_REL_TOL`]).
pub fn gram_schmidt(vectors: &[DVector<f64>], ip: &InnerProduct) -> Result<SubspaceBasis> {
    if vectors.is_empty() {
        return Ok(SubspaceBasis {
            vectors: vec![],
            inner_product: ip.clone(),
            orthonormal: true,
        });
    }
    check_same_len(vectors)?;
    let out = sequential_orthonormalize(vectors, ip)?;
    Ok(SubspaceBasis {
        vectors: out,
        inner_product: ip.clone(),
        orthonormal: true,
    })
}

/// Distance between the spans of two bases, in `[0, 1]`:
///
/// ```text
/// D = sqrt(1 - (1/max{m1,m2}) * sum_{j,k} <z_{2j}, z_{1k}>^2)
/// ```
///
/// over orthonormal bases `z_1`, `z_2` of the two subspaces. Zero exactly
/// when the spans coincide; handles unequal dimensions through the `max`.
/// Non-orthonormal inputs are orthonormalized internally.
pub fn subspace_distance(a: &SubspaceBasis, b: &SubspaceBasis) -> Result<f64> {
    if a.inner_product != b.inner_product {
        return Err(Error::InvalidInput(
            "subspace distance requires a common inner product".into(),
        ));
    }
    if a.dim() == 0 && b.dim() == 0 {
        return Ok(0.0);
    }
    if a.dim() == 0 || b.dim() == 0 {
        return Ok(1.0);
    }
    if a.vectors[0].len() != b.vectors[0].len() {
        return Err(Error::InvalidInput(
            "subspace distance requires elements of equal dimension".into(),
        ));
    }
    let oa = a.orthonormalized()?;
    let ob = b.orthonormalized()?;
    // With z_1, z_2 orthonormal, sum_k <z_{1k}, z_{2j}>^2 over j equals
    // 1 - ||r_k||^2 where r_k is the residual of z_{1k} against span(z_2),
    // so
    //   D^2 = (m - m1)/m + sum_k ||r_k||^2 / m,   m = max{m1, m2},
    // a sum of nonnegative terms that stays accurate when the spans agree
    // (the direct 1 - S/m form loses half the working precision there).
    let ip = &oa.inner_product;
    let m = oa.dim().max(ob.dim()) as f64;
    let mut residual_mass = 0.0;
    for u in &oa.vectors {
        let mut r = u.clone();
        for v in &ob.vectors {
            let c = ip.apply(u, v)?;
            r -= v * c;
        }
        residual_mass += ip.apply(&r, &r)?;
    }
    let d2 = (m - oa.dim() as f64) / m + residual_mass / m;
    Ok(d2.clamp(0.0, 1.0).sqrt())
}
