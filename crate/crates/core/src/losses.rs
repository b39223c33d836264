//! Reconstruction, regression and Gram losses, normalized by sample count,
//! plus the kernel-only projection loss and optimal-α selection.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{reg_solve, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Test,
}

impl SplitTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub alpha: f64,
    pub n_latent: usize,
    pub split: SplitTag,
    pub l_proj: f64,
    pub l_regr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_gram: Option<f64>,
    pub l_total: f64,
}

impl LossReport {
    pub fn new(alpha: f64, n_latent: usize, split: SplitTag, l_proj: f64, l_regr: f64) -> Self {
        LossReport {
            alpha,
            n_latent,
            split,
            l_proj,
            l_regr,
            l_gram: None,
            l_total: l_proj + l_regr,
        }
    }
}

fn same_shape(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, what: &str) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!("{what}: shapes {:?} and {:?} differ", a.dim(), b.dim())));
    }
    Ok(())
}

fn mean_sq(diff: Array2<f64>) -> f64 {
    let n = diff.nrows();
    if n == 0 {
        return 0.0;
    }
    diff.iter().map(|v| v * v).sum::<f64>() / n as f64
}

/// Squared residual norm of each row of `a - b`.
pub fn row_residuals(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    same_shape(a, b, "row residuals")?;
    Ok((&a - &b).map_axis(Axis(1), |r| r.dot(&r)))
}

/// `‖X − T P_TX‖² / n_samples`; an empty latent space reconstructs zero.
pub fn loss_proj(x: ArrayView2<'_, f64>, t: ArrayView2<'_, f64>, p_t_to_in: ArrayView2<'_, f64>) -> Result<f64> {
    if t.nrows() != x.nrows() || t.ncols() != p_t_to_in.nrows() || p_t_to_in.ncols() != x.ncols() {
        return Err(Error::invalid(format!(
            "projection loss: X {:?}, T {:?}, P {:?} do not conform",
            x.dim(),
            t.dim(),
            p_t_to_in.dim()
        )));
    }
    let x_hat = if t.ncols() == 0 { Array2::zeros(x.dim()) } else { t.dot(&p_t_to_in) };
    Ok(mean_sq(&x - &x_hat))
}

/// `‖Y − Ŷ‖² / n_samples`.
pub fn loss_regr(y: ArrayView2<'_, f64>, y_hat: ArrayView2<'_, f64>) -> Result<f64> {
    same_shape(y, y_hat, "regression loss")?;
    Ok(mean_sq(&y - &y_hat))
}

/// `‖G − TTᵀ‖² / n_samples`.
pub fn loss_gram(g: ArrayView2<'_, f64>, t: ArrayView2<'_, f64>) -> Result<f64> {
    if g.nrows() != g.ncols() || g.nrows() != t.nrows() {
        return Err(Error::invalid(format!("Gram loss: G {:?} and T {:?} do not conform", g.dim(), t.dim())));
    }
    let approx = if t.ncols() == 0 { Array2::zeros(g.dim()) } else { t.dot(&t.t()) };
    Ok(mean_sq(&g - &approx))
}

/// Per-sample contributions to the kernel-only projection loss of the
/// samples `V` onto the RKHS directions spanned by the train latent `T_N`:
/// the diagonal of `K_VV − 2K_VN T_N(T_NᵀT_N)⁻¹T_Vᵀ + T_V(T_NᵀT_N)⁻¹T_NᵀK_NN T_N(T_NᵀT_N)⁻¹T_Vᵀ`.
pub fn kernel_projection_residuals(
    k_vv_diag: ArrayView1<'_, f64>,
    k_vn: ArrayView2<'_, f64>,
    k_nn: ArrayView2<'_, f64>,
    t_n: ArrayView2<'_, f64>,
    t_v: ArrayView2<'_, f64>,
) -> Result<Array1<f64>> {
    let (n_v, n_n) = k_vn.dim();
    if k_vv_diag.len() != n_v
        || k_nn.dim() != (n_n, n_n)
        || t_n.nrows() != n_n
        || t_v.nrows() != n_v
        || t_v.ncols() != t_n.ncols()
    {
        return Err(Error::invalid(format!(
            "kernel projection loss: K_VV diag {}, K_VN {:?}, K_NN {:?}, T_N {:?}, T_V {:?} do not conform",
            k_vv_diag.len(),
            k_vn.dim(),
            k_nn.dim(),
            t_n.dim(),
            t_v.dim()
        )));
    }
    if t_n.ncols() == 0 {
        return Ok(k_vv_diag.to_owned());
    }
    // P = (T_NᵀT_N)⁺ T_Nᵀ, shape k × n_N
    let p = reg_solve(&SymMatrix::new(t_n.t().dot(&t_n))?, t_n.t(), 0.0)?;
    let cross = k_vn.dot(&p.t());
    let q = p.dot(&k_nn).dot(&p.t());
    let quad = t_v.dot(&q);
    Ok(k_vv_diag
        .iter()
        .zip(cross.axis_iter(Axis(0)))
        .zip(quad.axis_iter(Axis(0)).zip(t_v.axis_iter(Axis(0))))
        .map(|((&kvv, c), (qv, tv))| kvv - 2.0 * c.dot(&tv) + qv.dot(&tv))
        .collect())
}

/// Kernel-only projection loss of a validation set against train set `N`.
pub fn loss_proj_kernel(
    k_vv: ArrayView2<'_, f64>,
    k_vn: ArrayView2<'_, f64>,
    k_nn: ArrayView2<'_, f64>,
    t_n: ArrayView2<'_, f64>,
    t_v: ArrayView2<'_, f64>,
) -> Result<f64> {
    if k_vv.nrows() != k_vv.ncols() {
        return Err(Error::invalid("K_VV must be square"));
    }
    let r = kernel_projection_residuals(k_vv.diag(), k_vn, k_nn, t_n, t_v)?;
    Ok(mean_or_zero(&r))
}

/// Train-set form `Tr(K − K P_KT P_TK) / n`, written as `Tr(K − Π K)/n` with
/// `Π` the orthogonal projector onto the columns of `T`.
pub fn loss_proj_kernel_train(k_nn: ArrayView2<'_, f64>, t_n: ArrayView2<'_, f64>) -> Result<f64> {
    let n = k_nn.nrows();
    if k_nn.ncols() != n || t_n.nrows() != n {
        return Err(Error::invalid(format!("K {:?} and T {:?} do not conform", k_nn.dim(), t_n.dim())));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let trace = k_nn.diag().sum();
    if t_n.ncols() == 0 {
        return Ok(trace / n as f64);
    }
    // Tr(Π K) = Tr((TᵀT)⁺ TᵀKT)
    let tkt = t_n.t().dot(&k_nn).dot(&t_n);
    let solved = reg_solve(&SymMatrix::new(t_n.t().dot(&t_n))?, tkt.view(), 0.0)?;
    Ok((trace - solved.diag().sum()) / n as f64)
}

pub(crate) fn mean_or_zero(v: &Array1<f64>) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.sum() / v.len() as f64
    }
}

/// α with the smallest `ℓ_proj + ℓ_regr`; near-ties go to the larger α.
pub fn select_alpha(sweep: &[LossReport]) -> Result<f64> {
    let mut best: Option<&LossReport> = None;
    for r in sweep {
        best = match best {
            None => Some(r),
            Some(b) => {
                let tol = 1e-12 * b.l_total.abs().max(1.0);
                if r.l_total < b.l_total - tol || (r.l_total <= b.l_total + tol && r.alpha > b.alpha) {
                    Some(r)
                } else {
                    Some(b)
                }
            }
        };
    }
    best.map(|b| b.alpha).ok_or_else(|| Error::invalid("empty sweep"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn proj_examples() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        let eye = Array2::eye(2);
        assert_eq!(loss_proj(x.view(), x.view(), eye.view()).unwrap(), 0.0);
        let empty_t = Array2::zeros((2, 0));
        let empty_p = Array2::zeros((0, 2));
        assert_eq!(loss_proj(x.view(), empty_t.view(), empty_p.view()).unwrap(), 30.0 / 2.0);
        assert!(loss_proj(x.view(), x.view(), Array2::eye(3).view()).is_err());
    }

    #[test]
    fn regr_examples() {
        let y = array![[1.0, 0.0], [0.0, 1.0], [2.0, 2.0]];
        assert_eq!(loss_regr(y.view(), y.view()).unwrap(), 0.0);
        let mut off = y.clone();
        off[[1, 0]] += 0.5;
        assert!((loss_regr(y.view(), off.view()).unwrap() - 0.25 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn gram_examples() {
        let g = array![[4.0, 0.0], [0.0, 1.0]];
        let t = array![[2.0], [0.0]];
        assert!((loss_gram(g.view(), t.view()).unwrap() - 0.5).abs() < 1e-15);
        let t0 = Array2::zeros((2, 0));
        assert!((loss_gram(g.view(), t0.view()).unwrap() - 17.0 / 2.0).abs() < 1e-15);
        let full = array![[2.0, 0.0], [0.0, 1.0]];
        assert_eq!(loss_gram(g.view(), full.view()).unwrap(), 0.0);
    }

    #[test]
    fn kernel_loss_with_empty_latent() {
        let k = array![[2.0, 0.5], [0.5, 1.0]];
        let t = Array2::zeros((2, 0));
        let l = loss_proj_kernel(k.view(), k.view(), k.view(), t.view(), t.view()).unwrap();
        assert!((l - 1.5).abs() < 1e-15);
        assert!((loss_proj_kernel_train(k.view(), t.view()).unwrap() - 1.5).abs() < 1e-15);
    }

    fn report(alpha: f64, total: f64) -> LossReport {
        LossReport::new(alpha, 2, SplitTag::Train, total, 0.0)
    }

    #[test]
    fn alpha_selection() {
        assert_eq!(select_alpha(&[report(0.3, 1.0)]).unwrap(), 0.3);
        let grid: Vec<_> = (0..=20)
            .map(|i| {
                let a = i as f64 / 20.0;
                report(a, (1.0 - a).powi(2) + a * a)
            })
            .collect();
        assert_eq!(select_alpha(&grid).unwrap(), 0.5);
        assert_eq!(select_alpha(&[report(0.2, 1.0), report(0.8, 1.0)]).unwrap(), 0.8);
        assert!(select_alpha(&[]).is_err());
    }
}
