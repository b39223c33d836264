//! Dense symmetric-matrix primitives: eigendecomposition with a deterministic
//! sign convention, truncation, fractional powers and regularized solves.
//!
//! The eigensolver itself is nalgebra's implicit-QR `SymmetricEigen`; this
//! module owns ordering, sign fixing, rank cutoff and the pseudo-inverse
//! conventions every model relies on.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Relative cutoff below which an eigenvalue is treated as exactly zero.
pub const RCOND: f64 = 1e-12;

/// Relative tolerance for negative eigenvalues of a nominally PSD matrix.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// A square matrix symmetrized by averaging with its transpose at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(Array2<f64>);

impl SymMatrix {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c {
            return Err(Error::invalid(format!("expected a square matrix, got {r}x{c}")));
        }
        if r == 0 {
            return Err(Error::invalid("empty matrix"));
        }
        let mut m = entries;
        for i in 0..r {
            for j in (i + 1)..r {
                let avg = 0.5 * (m[[i, j]] + m[[j, i]]);
                m[[i, j]] = avg;
                m[[j, i]] = avg;
            }
        }
        Ok(SymMatrix(m))
    }

    /// Builds `a` from a view, copying.
    pub fn from_view(a: ArrayView2<'_, f64>) -> Result<Self> {
        Self::new(a.to_owned())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.diag().sum()
    }
}

impl AsRef<Array2<f64>> for SymMatrix {
    fn as_ref(&self) -> &Array2<f64> {
        &self.0
    }
}

/// Descending eigenpairs of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EigResult {
    pub eigenvalues: Array1<f64>,
    /// Columns are eigenvectors, in the order of `eigenvalues`.
    pub eigenvectors: Array2<f64>,
    /// Number of eigenvalues above the relative cutoff.
    pub effective_rank: usize,
    /// How many requested pairs were unavailable after truncation.
    pub shortfall: usize,
}

impl EigResult {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `U diag(f(λ)) Uᵀ` over the stored pairs.
    pub fn compose(&self, f: impl Fn(f64) -> f64) -> Array2<f64> {
        let scaled = scale_columns(&self.eigenvectors, self.eigenvalues.iter().map(|&l| f(l)));
        scaled.dot(&self.eigenvectors.t())
    }

    /// `U diag(f(λ))`, i.e. each eigenvector column scaled by `f(λ)`.
    pub fn scaled_vectors(&self, f: impl Fn(f64) -> f64) -> Array2<f64> {
        scale_columns(&self.eigenvectors, self.eigenvalues.iter().map(|&l| f(l)))
    }
}

fn cutoff_for(largest: f64) -> f64 {
    RCOND * largest.abs().max(f64::EPSILON)
}

/// Full eigendecomposition with eigenvalues sorted non-increasing.
///
/// Each eigenvector is signed so that its entry of largest magnitude is
/// non-negative (lowest index wins a tie), which makes the result a pure
/// function of the input bits.
pub fn sym_eig(m: &SymMatrix) -> Result<EigResult> {
    let n = m.dim();
    if m.0.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let dm = DMatrix::from_fn(n, n, |i, j| m.0[[i, j]]);
    let eig = SymmetricEigen::new(dm);

    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps solver order among exactly equal eigenvalues
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut values = Array1::zeros(n);
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        let col = eig.eigenvectors.column(src);
        let mut pivot = 0;
        for i in 1..n {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[[i, dst]] = sign * col[i];
        }
    }

    let cutoff = cutoff_for(values[0]);
    let effective_rank = values.iter().filter(|&&l| l > cutoff).count();
    Ok(EigResult {
        eigenvalues: values,
        eigenvectors: vectors,
        effective_rank,
        shortfall: 0,
    })
}

/// Keeps the leading `min(n_latent, effective_rank)` pairs and records any shortfall.
pub fn truncate(e: &EigResult, n_latent: usize) -> Result<EigResult> {
    if n_latent < 1 {
        return Err(Error::invalid("n_latent must be at least 1"));
    }
    if n_latent > e.len() {
        return Err(Error::invalid(format!(
            "n_latent {n_latent} exceeds matrix dimension {}",
            e.len()
        )));
    }
    let keep = n_latent.min(e.effective_rank);
    Ok(EigResult {
        eigenvalues: e.eigenvalues.slice(ndarray::s![..keep]).to_owned(),
        eigenvectors: e.eigenvectors.slice(ndarray::s![.., ..keep]).to_owned(),
        effective_rank: keep,
        shortfall: n_latent - keep,
    })
}

/// Like [`truncate`] but allows `n_latent` larger than the dimension, in which
/// case the excess is reported as shortfall too.
pub(crate) fn truncate_lenient(e: &EigResult, n_latent: usize) -> Result<EigResult> {
    let capped = n_latent.min(e.len());
    let mut t = truncate(e, capped.max(1))?;
    t.shortfall += n_latent.saturating_sub(capped);
    Ok(t)
}

/// Drops every pair at or below the cutoff.
pub(crate) fn retain_effective(e: &EigResult) -> EigResult {
    let keep = e.effective_rank;
    EigResult {
        eigenvalues: e.eigenvalues.slice(ndarray::s![..keep]).to_owned(),
        eigenvectors: e.eigenvectors.slice(ndarray::s![.., ..keep]).to_owned(),
        effective_rank: keep,
        shortfall: 0,
    }
}

/// Fails with `NotPsd` when the smallest eigenvalue is below `-PSD_TOLERANCE * ‖m‖_F`.
pub(crate) fn check_psd(e: &EigResult) -> Result<()> {
    let norm = e.eigenvalues.iter().map(|l| l * l).sum::<f64>().sqrt();
    let tolerance = PSD_TOLERANCE * norm;
    match e.eigenvalues.iter().last() {
        Some(&min) if min < -tolerance => Err(Error::NotPsd {
            eigenvalue: min,
            tolerance,
        }),
        _ => Ok(()),
    }
}

/// `V diag(λᵖ) Vᵀ` with eigenvalues at or below the cutoff set to exactly zero.
///
/// For negative or fractional `p` the matrix must be PSD within tolerance;
/// `0ᵖ` with `p < 0` is zero (pseudo-inverse).
pub fn mat_power(m: &SymMatrix, p: f64) -> Result<SymMatrix> {
    let e = sym_eig(m)?;
    mat_power_from_eig(&e, p)
}

pub(crate) fn mat_power_from_eig(e: &EigResult, p: f64) -> Result<SymMatrix> {
    let integral = p.fract() == 0.0 && p >= 0.0;
    if !integral {
        check_psd(e)?;
    }
    let cutoff = cutoff_for(e.eigenvalues[0]);
    let powered = e.compose(|l| {
        if integral {
            if l.abs() <= cutoff {
                0.0
            } else {
                l.powf(p)
            }
        } else if l <= cutoff {
            0.0
        } else {
            l.powf(p)
        }
    });
    // compose is symmetric up to rounding; SymMatrix::new averages it away
    SymMatrix::new(powered)
}

/// Solves `(a + λI) x = b` through the eigendecomposition of `a`.
///
/// Shifted eigenvalues with magnitude at or below `RCOND * max|λ_i + λ|` are
/// treated as zero, which gives the minimum-norm solution when the system is
/// singular (in particular for `λ = 0`).
pub fn reg_solve(a: &SymMatrix, b: ArrayView2<'_, f64>, lambda: f64) -> Result<Array2<f64>> {
    let e = sym_eig(a)?;
    reg_solve_with_eig(&e, b, lambda)
}

pub(crate) fn reg_solve_with_eig(
    e: &EigResult,
    b: ArrayView2<'_, f64>,
    lambda: f64,
) -> Result<Array2<f64>> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::invalid(format!("regularization must be a finite non-negative number, got {lambda}")));
    }
    if b.nrows() != e.len() {
        return Err(Error::invalid(format!(
            "right-hand side has {} rows, matrix is {}x{}",
            b.nrows(),
            e.len(),
            e.len()
        )));
    }
    let largest = e.eigenvalues.iter().map(|l| (l + lambda).abs()).fold(0.0, f64::max);
    let cutoff = cutoff_for(largest);
    let projected = e.eigenvectors.t().dot(&b);
    let inv: Vec<f64> = e
        .eigenvalues
        .iter()
        .map(|&l| {
            let s = l + lambda;
            if s.abs() <= cutoff {
                0.0
            } else {
                1.0 / s
            }
        })
        .collect();
    let mut scaled = projected;
    for (mut row, d) in scaled.axis_iter_mut(Axis(0)).zip(inv) {
        row *= d;
    }
    Ok(e.eigenvectors.dot(&scaled))
}

/// True when at least one shifted eigenvalue fell under the cutoff.
pub(crate) fn is_singular_shifted(e: &EigResult, lambda: f64) -> bool {
    let largest = e.eigenvalues.iter().map(|l| (l + lambda).abs()).fold(0.0, f64::max);
    let cutoff = cutoff_for(largest);
    e.eigenvalues.iter().any(|l| (l + lambda).abs() <= cutoff)
}

/// Least-squares coefficients of `target` on the columns of `basis`, using
/// `(BᵀB + λ'I)⁻¹ Bᵀ target` with `λ' = RCOND * Tr(BᵀB) / k`.
pub(crate) fn latent_regression(basis: ArrayView2<'_, f64>, target: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let k = basis.ncols();
    if k == 0 {
        return Ok(Array2::zeros((0, target.ncols())));
    }
    let gram = SymMatrix::new(basis.t().dot(&basis))?;
    let shift = RCOND * gram.trace() / k as f64;
    reg_solve(&gram, basis.t().dot(&target).view(), shift)
}

pub(crate) fn scale_columns(m: &Array2<f64>, factors: impl Iterator<Item = f64>) -> Array2<f64> {
    let mut out = m.clone();
    for (mut col, f) in out.axis_iter_mut(Axis(1)).zip(factors) {
        col *= f;
    }
    out
}

pub fn frobenius_sq(m: ArrayView2<'_, f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

/// A linear map that may be the identity, to avoid materializing `n × n` identities.
#[derive(Debug, Clone, PartialEq)]
pub enum LinearMap {
    Identity(usize),
    Matrix(Array2<f64>),
}

impl LinearMap {
    pub fn input_dim(&self) -> usize {
        match self {
            LinearMap::Identity(n) => *n,
            LinearMap::Matrix(m) => m.nrows(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            LinearMap::Identity(n) => *n,
            LinearMap::Matrix(m) => m.ncols(),
        }
    }

    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::invalid(format!(
                "expected {} columns, got {}",
                self.input_dim(),
                x.ncols()
            )));
        }
        Ok(match self {
            LinearMap::Identity(_) => x.to_owned(),
            LinearMap::Matrix(m) => x.dot(m),
        })
    }

    pub fn to_dense(&self) -> Array2<f64> {
        match self {
            LinearMap::Identity(n) => Array2::eye(*n),
            LinearMap::Matrix(m) => m.clone(),
        }
    }
}
