//! Synthetic data and reference computations shared by the integration tests.
//!
//! The reference computations go through nalgebra's SVD and LU solvers and
//! explicit centering matrices, never through the crate's own routines.
#![allow(dead_code)]

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, p), |_| rng.sample(StandardNormal))
}

/// Features with decaying column scales and targets linear in them plus noise.
pub fn planted(seed: u64, n: usize, p: usize, n_props: usize, noise: f64) -> (Array2<f64>, Array2<f64>) {
    let mut r = rng(seed);
    let mut x = gaussian(&mut r, n, p);
    for (j, mut col) in x.axis_iter_mut(Axis(1)).enumerate() {
        col *= 1.0 / (1.0 + j as f64);
    }
    let w = gaussian(&mut r, p, n_props);
    let y = x.dot(&w) + gaussian(&mut r, n, n_props) * noise;
    (x, y)
}

pub fn to_na(a: ArrayView2<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub fn from_na(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

pub fn max_abs(a: ArrayView2<'_, f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn max_diff(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
    assert_eq!(a.dim(), b.dim(), "shape mismatch");
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Largest entry-wise difference after choosing the better sign per column.
pub fn max_diff_up_to_sign(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
    assert_eq!(a.dim(), b.dim(), "shape mismatch");
    let mut worst: f64 = 0.0;
    for (ca, cb) in a.axis_iter(Axis(1)).zip(b.axis_iter(Axis(1))) {
        let plus = ca.iter().zip(cb.iter()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        let minus = ca.iter().zip(cb.iter()).fold(0.0f64, |m, (x, y)| m.max((x + y).abs()));
        worst = worst.max(plus.min(minus));
    }
    worst
}

/// Leading `k` principal-component scores `U_k Σ_k` from an SVD of `x`.
pub fn svd_scores(x: ArrayView2<'_, f64>, k: usize) -> Array2<f64> {
    let svd = to_na(x).svd(true, false);
    let u = svd.u.expect("u requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    Array2::from_shape_fn((x.nrows(), k), |(i, j)| u[(i, order[j])] * svd.singular_values[order[j]])
}

/// `(a + λI)⁻¹ b` by LU.
pub fn lu_solve(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, lambda: f64) -> Array2<f64> {
    let n = a.nrows();
    let m = to_na(a) + DMatrix::identity(n, n) * lambda;
    from_na(&m.lu().solve(&to_na(b)).expect("system is nonsingular"))
}

/// Ridge predictions for `x_new` from normal equations solved by LU.
pub fn ridge_oracle(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, x_new: ArrayView2<'_, f64>, lambda: f64) -> Array2<f64> {
    let w = lu_solve(x.t().dot(&x).view(), x.t().dot(&y).view(), lambda);
    x_new.dot(&w)
}

/// `H K H` scaled to trace `n`, with `H = I − 11ᵀ/n`.
pub fn double_center_oracle(k: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = k.nrows();
    let h = Array2::<f64>::eye(n) - Array2::<f64>::from_elem((n, n), 1.0 / n as f64);
    let c = h.dot(&k).dot(&h);
    let tr = c.diag().sum();
    c * (n as f64 / tr)
}

/// Explicit features `Φ` with `ΦΦᵀ = k` for a PSD `k`, from an SVD.
pub fn explicit_features(k: ArrayView2<'_, f64>) -> Array2<f64> {
    let svd = to_na(k).svd(true, false);
    let u = svd.u.expect("u requested");
    Array2::from_shape_fn((k.nrows(), svd.singular_values.len()), |(i, j)| u[(i, j)] * svd.singular_values[j].sqrt())
}

/// `‖a − proj‖²` per row, where rows of `a` are regressed on `t` fitted over `fit_rows`.
pub fn projection_loss_oracle(
    phi: ArrayView2<'_, f64>,
    t: ArrayView2<'_, f64>,
    fit_rows: &[usize],
    eval_rows: &[usize],
) -> f64 {
    let t_fit = t.select(Axis(0), fit_rows);
    let phi_fit = phi.select(Axis(0), fit_rows);
    let p = lu_solve(t_fit.t().dot(&t_fit).view(), t_fit.t().dot(&phi_fit).view(), 0.0);
    let t_eval = t.select(Axis(0), eval_rows);
    let resid = &phi.select(Axis(0), eval_rows) - &t_eval.dot(&p);
    resid.iter().map(|v| v * v).sum::<f64>() / eval_rows.len() as f64
}

pub fn write_csv(path: &std::path::Path, header: &[String], rows: ArrayView2<'_, f64>) {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows.axis_iter(Axis(0)) {
        let cells: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    std::fs::write(path, s).unwrap();
}
