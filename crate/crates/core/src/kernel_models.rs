//! Kernel PCA, kernel ridge regression, their Nyström (sparse) variants and
//! kernel PCovR in full and sparse form.
//!
//! Full models take the centered train kernel; sparse models take Nyström
//! features built from the centered train-versus-active kernel. Projections of
//! new samples use kernels centered with the same train statistics.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{check_alpha, Error, Result};
use crate::kernels::NystromFeatures;
use crate::method::Method;
use crate::numerics::{
    check_psd, is_singular_shifted, latent_regression, mat_power_from_eig, reg_solve_with_eig, sym_eig,
    truncate_lenient, LinearMap, SymMatrix,
};

#[derive(Debug, Clone)]
pub struct KernelFittedProjector {
    pub method: Method,
    /// Reference kernel → latent, `n_ref × n_latent` where the reference set
    /// is the training set (full) or the active set (sparse).
    pub p_k_to_t: LinearMap,
    pub p_t_to_y: Array2<f64>,
    pub training_t: Array2<f64>,
    pub n_latent: usize,
    pub shortfall: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub eigenvalues: Array1<f64>,
    pub active_indices: Option<Vec<usize>>,
}

impl KernelFittedProjector {
    pub fn n_ref(&self) -> usize {
        self.p_k_to_t.input_dim()
    }

    pub fn transform_kernel(&self, k_cross: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.p_k_to_t.apply(k_cross)
    }

    pub fn predict_kernel(&self, k_cross: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let t = self.transform_kernel(k_cross)?;
        self.predict_latent(t.view())
    }

    pub fn predict_latent(&self, t: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if t.ncols() != self.p_t_to_y.nrows() {
            return Err(Error::invalid(format!("expected {} latent columns, got {}", self.p_t_to_y.nrows(), t.ncols())));
        }
        Ok(t.dot(&self.p_t_to_y))
    }
}

pub fn transform_kernel(f: &KernelFittedProjector, k_cross: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    f.transform_kernel(k_cross)
}

pub fn predict_kernel(f: &KernelFittedProjector, k_cross: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    f.predict_kernel(k_cross)
}

fn check_rows(n: usize, y: Option<ArrayView2<'_, f64>>) -> Result<()> {
    match y {
        Some(y) if y.nrows() != n => Err(Error::invalid(format!("kernel has {n} rows but targets have {}", y.nrows()))),
        _ => Ok(()),
    }
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

/// Kernel PCA: `T = Û Λ̂^{1/2}` and `P_KT = Û Λ̂^{-1/2}`.
pub fn fit_kpca(k: &SymMatrix, y: Option<ArrayView2<'_, f64>>, n_latent: usize) -> Result<KernelFittedProjector> {
    check_latent(n_latent)?;
    check_rows(k.dim(), y)?;
    let full = sym_eig(k)?;
    check_psd(&full)?;
    let eig = truncate_lenient(&full, n_latent)?;
    let t = eig.scaled_vectors(f64::sqrt);
    Ok(KernelFittedProjector {
        method: Method::Kpca,
        p_k_to_t: LinearMap::Matrix(eig.scaled_vectors(|l| l.powf(-0.5))),
        p_t_to_y: regress_or_empty(t.view(), y)?,
        training_t: t,
        n_latent: eig.len(),
        shortfall: eig.shortfall,
        alpha: 1.0,
        lambda: 0.0,
        eigenvalues: eig.eigenvalues,
        active_indices: None,
    })
}

/// KRR weights `(K + λI)⁻¹ Y`.
pub fn krr_weights(k: &SymMatrix, y: ArrayView2<'_, f64>, lambda: f64) -> Result<Array2<f64>> {
    check_rows(k.dim(), Some(y))?;
    reg_solve_with_eig(&sym_eig(k)?, y, lambda)
}

/// KRR as a projector whose latent coordinates are the kernel rows themselves.
pub fn fit_krr(k: &SymMatrix, y: ArrayView2<'_, f64>, lambda: f64) -> Result<KernelFittedProjector> {
    let w = krr_weights(k, y, lambda)?;
    let n = k.dim();
    Ok(KernelFittedProjector {
        method: Method::Krr,
        p_k_to_t: LinearMap::Identity(n),
        p_t_to_y: w,
        training_t: k.as_ref().clone(),
        n_latent: n,
        shortfall: 0,
        alpha: 0.0,
        lambda,
        eigenvalues: Array1::zeros(0),
        active_indices: None,
    })
}

/// Sparse KPCA: eigenvectors of the Nyström feature covariance `ΦᵀΦ`.
pub fn fit_sparse_kpca(
    nys: &NystromFeatures,
    y: Option<ArrayView2<'_, f64>>,
    n_latent: usize,
) -> Result<KernelFittedProjector> {
    check_latent(n_latent)?;
    check_rows(nys.phi.nrows(), y)?;
    let c = SymMatrix::new(nys.phi.t().dot(&nys.phi))?;
    let eig = truncate_lenient(&sym_eig(&c)?, n_latent)?;
    let t = nys.phi.dot(&eig.eigenvectors);
    Ok(KernelFittedProjector {
        method: Method::SparseKpca,
        p_k_to_t: LinearMap::Matrix(nys.projector.dot(&eig.eigenvectors)),
        p_t_to_y: regress_or_empty(t.view(), y)?,
        training_t: t,
        n_latent: eig.len(),
        shortfall: eig.shortfall,
        alpha: 1.0,
        lambda: 0.0,
        eigenvalues: eig.eigenvalues,
        active_indices: Some(nys.active_indices.clone()),
    })
}

/// Sparse KRR weights on the active kernel, solved through the Nyström
/// features: `P_KY = U Λ^{-1/2} (ΦᵀΦ + λI)⁻¹ ΦᵀY`.
pub fn sparse_krr_weights(nys: &NystromFeatures, y: ArrayView2<'_, f64>, lambda: f64) -> Result<Array2<f64>> {
    check_rows(nys.phi.nrows(), Some(y))?;
    let c = sym_eig(&SymMatrix::new(nys.phi.t().dot(&nys.phi))?)?;
    if lambda == 0.0 && is_singular_shifted(&c, lambda) {
        log::warn!("sparse KRR normal matrix is singular; using the minimum-norm solution");
    }
    let w_phi = reg_solve_with_eig(&c, nys.phi.t().dot(&y).view(), lambda)?;
    Ok(nys.projector.dot(&w_phi))
}

/// Sparse KRR with latent coordinates equal to the centered train-versus-active kernel.
pub fn fit_sparse_krr(
    k_nm: ArrayView2<'_, f64>,
    k_mm: &SymMatrix,
    active_indices: Vec<usize>,
    y: ArrayView2<'_, f64>,
    lambda: f64,
) -> Result<KernelFittedProjector> {
    let nys = NystromFeatures::from_kernels(k_nm, k_mm, active_indices)?;
    let w = sparse_krr_weights(&nys, y, lambda)?;
    let m = k_mm.dim();
    Ok(KernelFittedProjector {
        method: Method::SparseKrr,
        p_k_to_t: LinearMap::Identity(m),
        p_t_to_y: w,
        training_t: k_nm.to_owned(),
        n_latent: m,
        shortfall: 0,
        alpha: 0.0,
        lambda,
        eigenvalues: Array1::zeros(0),
        active_indices: Some(nys.active_indices),
    })
}

/// Kernel PCovR on `G̃ = αK + (1−α)ŶŶᵀ` with `Ŷ = K(K+λI)⁻¹Y`.
pub fn fit_kpcovr(
    k: &SymMatrix,
    y: ArrayView2<'_, f64>,
    alpha: f64,
    n_latent: usize,
    lambda: f64,
) -> Result<KernelFittedProjector> {
    check_alpha(alpha)?;
    check_latent(n_latent)?;
    check_rows(k.dim(), Some(y))?;
    let k_eig = sym_eig(k)?;
    check_psd(&k_eig)?;
    let w = reg_solve_with_eig(&k_eig, y, lambda)?;
    let y_hat = k.as_ref().dot(&w);
    let g_tilde = k.as_ref() * alpha + &y_hat.dot(&y_hat.t()) * (1.0 - alpha);
    let eig = truncate_lenient(&sym_eig(&SymMatrix::new(g_tilde)?)?, n_latent)?;

    let t = eig.scaled_vectors(f64::sqrt);
    let whitening = eig.scaled_vectors(|l| l.powf(-0.5));
    // (αI + (1−α)(K+λI)⁻¹ Y Ŷᵀ) Û Λ̂^{-1/2}
    let p_kt = &whitening * alpha + &w.dot(&y_hat.t().dot(&whitening)) * (1.0 - alpha);

    Ok(KernelFittedProjector {
        method: Method::Kpcovr,
        p_k_to_t: LinearMap::Matrix(p_kt),
        p_t_to_y: latent_regression(t.view(), y)?,
        training_t: t,
        n_latent: eig.len(),
        shortfall: eig.shortfall,
        alpha,
        lambda,
        eigenvalues: eig.eigenvalues,
        active_indices: None,
    })
}

/// Sparse kernel PCovR: feature-space PCovR on the Nyström features, with
/// `C̃ = αC + (1−α) C^{1/2}(C+λI)⁻¹ΦᵀY YᵀΦ(C+λI)⁻¹C^{1/2}`.
pub fn fit_sparse_kpcovr(
    nys: &NystromFeatures,
    y: ArrayView2<'_, f64>,
    alpha: f64,
    n_latent: usize,
    lambda: f64,
) -> Result<KernelFittedProjector> {
    check_alpha(alpha)?;
    check_latent(n_latent)?;
    check_rows(nys.phi.nrows(), Some(y))?;
    let phi = &nys.phi;
    let c = SymMatrix::new(phi.t().dot(phi))?;
    let c_eig = sym_eig(&c)?;
    let c_half = mat_power_from_eig(&c_eig, 0.5)?.into_inner();
    let c_inv_half = mat_power_from_eig(&c_eig, -0.5)?.into_inner();

    let phi_ty = phi.t().dot(&y);
    let m = c_half.dot(&reg_solve_with_eig(&c_eig, phi_ty.view(), lambda)?);
    let c_tilde = c.as_ref() * alpha + &m.dot(&m.t()) * (1.0 - alpha);
    let eig = truncate_lenient(&sym_eig(&SymMatrix::new(c_tilde)?)?, n_latent)?;

    let p_phi_t = c_inv_half.dot(&eig.scaled_vectors(f64::sqrt));
    let p_ty = eig
        .scaled_vectors(|l| l.powf(-0.5))
        .reversed_axes()
        .dot(&c_inv_half)
        .dot(&phi_ty);
    let t = phi.dot(&p_phi_t);

    Ok(KernelFittedProjector {
        method: Method::SparseKpcovr,
        p_k_to_t: LinearMap::Matrix(nys.projector.dot(&p_phi_t)),
        p_t_to_y: p_ty,
        training_t: t,
        n_latent: eig.len(),
        shortfall: eig.shortfall,
        alpha,
        lambda,
        eigenvalues: eig.eigenvalues,
        active_indices: Some(nys.active_indices.clone()),
    })
}
