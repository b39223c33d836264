//! PCA, classical MDS, ridge regression and linear PCovR in both its
//! sample-space and feature-space formulations.
//!
//! All fits expect features and targets already centered and scaled by
//! [`crate::preprocess`].

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{check_alpha, Error, Result};
use crate::method::Method;
use crate::numerics::{
    latent_regression, mat_power_from_eig, reg_solve, reg_solve_with_eig, sym_eig, truncate_lenient, EigResult,
    LinearMap, SymMatrix, PSD_TOLERANCE,
};

/// Learned maps between input space, latent space and property space.
#[derive(Debug, Clone)]
pub struct FittedProjector {
    pub method: Method,
    /// Input → latent, `n_features × n_latent`.
    pub p_in_to_t: LinearMap,
    /// Latent → reconstructed input, `n_latent × n_features`.
    pub p_t_to_in: LinearMap,
    /// Latent → properties, `n_latent × n_properties`.
    pub p_t_to_y: Array2<f64>,
    /// Retained latent dimensions.
    pub n_latent: usize,
    /// Requested dimensions that could not be retained.
    pub shortfall: usize,
    pub alpha: f64,
    pub lambda: f64,
    /// Eigenvalues behind the retained latent directions (empty for ridge).
    pub eigenvalues: Array1<f64>,
    pub training_t: Array2<f64>,
}

impl FittedProjector {
    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.p_in_to_t.apply(x)
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let t = self.transform(x)?;
        self.predict_latent(t.view())
    }

    pub fn predict_latent(&self, t: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if t.ncols() != self.p_t_to_y.nrows() {
            return Err(Error::invalid(format!("expected {} latent columns, got {}", self.p_t_to_y.nrows(), t.ncols())));
        }
        Ok(t.dot(&self.p_t_to_y))
    }

    pub fn reconstruct(&self, t: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.p_t_to_in.apply(t)
    }
}

pub fn transform(f: &FittedProjector, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    f.transform(x)
}

pub fn predict(f: &FittedProjector, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    f.predict(x)
}

pub fn reconstruct(f: &FittedProjector, t: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    f.reconstruct(t)
}

fn check_pair(x: ArrayView2<'_, f64>, y: Option<ArrayView2<'_, f64>>) -> Result<()> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::invalid("empty feature matrix"));
    }
    if let Some(y) = y {
        if y.nrows() != x.nrows() {
            return Err(Error::invalid(format!(
                "features have {} rows but targets have {}",
                x.nrows(),
                y.nrows()
            )));
        }
    }
    Ok(())
}

fn check_latent(n_latent: usize) -> Result<()> {
    if n_latent < 1 {
        return Err(Error::invalid("n_latent must be at least 1"));
    }
    Ok(())
}

fn regress_or_empty(t: ArrayView2<'_, f64>, y: Option<ArrayView2<'_, f64>>) -> Result<Array2<f64>> {
    match y {
        Some(y) => latent_regression(t, y),
        None => Ok(Array2::zeros((t.ncols(), 0))),
    }
}

fn covariance(x: ArrayView2<'_, f64>) -> Result<SymMatrix> {
    SymMatrix::new(x.t().dot(&x))
}

fn gram(x: ArrayView2<'_, f64>) -> Result<SymMatrix> {
    SymMatrix::new(x.dot(&x.t()))
}

/// PCA from the top eigenvectors of `XᵀX`.
pub fn fit_pca(x: ArrayView2<'_, f64>, y: Option<ArrayView2<'_, f64>>, n_latent: usize) -> Result<FittedProjector> {
    check_pair(x, y)?;
    check_latent(n_latent)?;
    if n_latent > x.ncols() {
        return Err(Error::invalid(format!(
            "n_latent {n_latent} exceeds the {} available features",
            x.ncols()
        )));
    }
    let eig = truncate_lenient(&sym_eig(&covariance(x)?)?, n_latent)?;
    let p = eig.eigenvectors.clone();
    let t = x.dot(&p);
    Ok(FittedProjector {
        method: Method::Pca,
        p_t_to_in: LinearMap::Matrix(p.t().to_owned()),
        p_in_to_t: LinearMap::Matrix(p),
        p_t_to_y: regress_or_empty(t.view(), y)?,
        n_latent: eig.len(),
        shortfall: eig.shortfall,
        alpha: 1.0,
        lambda: 0.0,
        eigenvalues: eig.eigenvalues,
        training_t: t,
    })
}

/// Latent coordinates of classical MDS.
#[derive(Debug, Clone)]
pub struct MdsEmbedding {
    pub t: Array2<f64>,
    pub eig: EigResult,
}

/// `T = Û Λ̂^{1/2}` from the leading eigenpairs of a centered Gram matrix.
pub fn fit_mds_from_gram(g: &SymMatrix, n_latent: usize) -> Result<MdsEmbedding> {
    check_latent(n_latent)?;
    let full = sym_eig(g)?;
    let norm = full.eigenvalues.iter().map(|l| l * l).sum::<f64>().sqrt();
    let tolerance = PSD_TOLERANCE * norm;
    if let Some(&worst) = full.eigenvalues.iter().take(n_latent).next_back() {
        if worst < -tolerance {
            return Err(Error::NotPsd {
                eigenvalue: worst,
                tolerance,
            });
        }
    }
    let eig = truncate_lenient(&full, n_latent)?;
    let t = eig.scaled_vectors(f64::sqrt);
    Ok(MdsEmbedding { t, eig })
}

/// Classical MDS on the Gram matrix of `x`, with the equivalent linear
/// projector `P = Xᵀ Û Λ̂^{-1/2}` for new samples.
pub fn fit_mds(x: ArrayView2<'_, f64>, y: Option<ArrayView2<'_, f64>>, n_latent: usize) -> Result<FittedProjector> {
    check_pair(x, y)?;
    let emb = fit_mds_from_gram(&gram(x)?, n_latent)?;
    let p = x.t().dot(&emb.eig.scaled_vectors(|l| l.powf(-0.5)));
    let p_t_to_in = latent_regression(emb.t.view(), x)?;
    Ok(FittedProjector {
        method: Method::Mds,
        p_in_to_t: LinearMap::Matrix(p),
        p_t_to_in: LinearMap::Matrix(p_t_to_in),
        p_t_to_y: regress_or_empty(emb.t.view(), y)?,
        n_latent: emb.eig.len(),
        shortfall: emb.eig.shortfall,
        alpha: 1.0,
        lambda: 0.0,
        eigenvalues: emb.eig.eigenvalues,
        training_t: emb.t,
    })
}

/// Ridge weights `(XᵀX + λI)⁻¹ XᵀY`.
pub fn ridge_weights(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, lambda: f64) -> Result<Array2<f64>> {
    check_pair(x, Some(y))?;
    reg_solve(&covariance(x)?, x.t().dot(&y).view(), lambda)
}

/// Ridge regression as a projector whose latent space is the input space.
pub fn fit_ridge(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, lambda: f64) -> Result<FittedProjector> {
    let w = ridge_weights(x, y, lambda)?;
    let p = x.ncols();
    Ok(FittedProjector {
        method: Method::Ridge,
        p_in_to_t: LinearMap::Identity(p),
        p_t_to_in: LinearMap::Identity(p),
        p_t_to_y: w,
        n_latent: p,
        shortfall: 0,
        alpha: 0.0,
        lambda,
        eigenvalues: Array1::zeros(0),
        training_t: x.to_owned(),
    })
}

/// PCovR by diagonalizing the modified Gram matrix
/// `G̃ = αXXᵀ + (1−α)ŶŶᵀ`, with `Ŷ` the ridge approximation of `Y`.
pub fn fit_pcovr_sample(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    alpha: f64,
    n_latent: usize,
    lambda: f64,
) -> Result<FittedProjector> {
    check_alpha(alpha)?;
    check_latent(n_latent)?;
    let w = ridge_weights(x, y, lambda)?;
    let y_hat = x.dot(&w);
    let g_tilde = &x.dot(&x.t()) * alpha + &y_hat.dot(&y_hat.t()) * (1.0 - alpha);
    let eig = truncate_lenient(&sym_eig(&SymMatrix::new(g_tilde)?)?, n_latent)?;

    let t = eig.scaled_vectors(f64::sqrt);
    let whitening = eig.scaled_vectors(|l| l.powf(-0.5));
    // (αXᵀ + (1−α) P_XY Ŷᵀ) Û Λ̂^{-1/2}
    let p_xt = &x.t().dot(&whitening) * alpha + &w.dot(&y_hat.t().dot(&whitening)) * (1.0 - alpha);

    Ok(FittedProjector {
        method: Method::Pcovr,
        p_in_to_t: LinearMap::Matrix(p_xt),
        p_t_to_in: LinearMap::Matrix(latent_regression(t.view(), x)?),
        p_t_to_y: latent_regression(t.view(), y)?,
        n_latent: eig.len(),
        shortfall: eig.shortfall,
        alpha,
        lambda,
        eigenvalues: eig.eigenvalues,
        training_t: t,
    })
}

/// PCovR by diagonalizing the modified covariance
/// `C̃ = αC + (1−α) C^{-1/2} XᵀŶŶᵀX C^{-1/2}`.
pub fn fit_pcovr_feature(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    alpha: f64,
    n_latent: usize,
    lambda: f64,
) -> Result<FittedProjector> {
    check_alpha(alpha)?;
    check_latent(n_latent)?;
    check_pair(x, Some(y))?;
    let c = covariance(x)?;
    let c_eig = sym_eig(&c)?;
    let c_half = mat_power_from_eig(&c_eig, 0.5)?.into_inner();
    let c_inv_half = mat_power_from_eig(&c_eig, -0.5)?.into_inner();

    let xty = x.t().dot(&y);
    let w = reg_solve_with_eig(&c_eig, xty.view(), lambda)?;
    let y_hat = x.dot(&w);
    let m = c_inv_half.dot(&x.t().dot(&y_hat));
    let c_tilde = c.as_ref() * alpha + &m.dot(&m.t()) * (1.0 - alpha);
    let eig = truncate_lenient(&sym_eig(&SymMatrix::new(c_tilde)?)?, n_latent)?;

    let p_xt = c_inv_half.dot(&eig.scaled_vectors(f64::sqrt));
    let left = eig.scaled_vectors(|l| l.powf(-0.5)).reversed_axes();
    let p_tx = left.dot(&c_half);
    let p_ty = left.dot(&c_inv_half).dot(&xty);
    let t = x.dot(&p_xt);

    Ok(FittedProjector {
        method: Method::Pcovr,
        p_in_to_t: LinearMap::Matrix(p_xt),
        p_t_to_in: LinearMap::Matrix(p_tx),
        p_t_to_y: p_ty,
        n_latent: eig.len(),
        shortfall: eig.shortfall,
        alpha,
        lambda,
        eigenvalues: eig.eigenvalues,
        training_t: t,
    })
}

/// Dispatches to the sample-space route when `n_samples < n_features`,
/// otherwise to the feature-space route.
pub fn fit_pcovr(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    alpha: f64,
    n_latent: usize,
    lambda: f64,
) -> Result<FittedProjector> {
    if x.nrows() < x.ncols() {
        fit_pcovr_sample(x, y, alpha, n_latent, lambda)
    } else {
        fit_pcovr_feature(x, y, alpha, n_latent, lambda)
    }
}

/// Flips each column of `b` to best agree in sign with the matching column of `a`.
pub fn align_signs(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = b.to_owned();
    for (ca, mut cb) in a.axis_iter(Axis(1)).zip(out.axis_iter_mut(Axis(1))) {
        if ca.dot(&cb) < 0.0 {
            cb.mapv_inplace(|v| -v);
        }
    }
    out
}
