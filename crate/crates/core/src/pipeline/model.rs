//! Fitting any method on the train rows and scoring every row.
//!
//! Preprocessing (scaling, kernels, centering, active set) depends only on the
//! train rows and the method family, so it is done once in [`Prepared`] and
//! shared by every α of a sweep.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::aggregate::{
    partition_predictions, GroupIndex, KernelStructureModel, LinearStructureModel, SparseKernelStructureModel,
};
use crate::error::{Error, Result};
use crate::kernel_models::{
    fit_kpca, fit_kpcovr, fit_krr, fit_sparse_kpca, fit_sparse_kpcovr, fit_sparse_krr, KernelFittedProjector,
};
use crate::kernels::{default_gamma, fps_select_with, kernel_diagonal, kernel_matrix_with, KernelSpec, NystromFeatures};
use crate::linear_models::{fit_mds, fit_pca, fit_pcovr, fit_ridge, FittedProjector};
use crate::losses::{kernel_projection_residuals, loss_regr, row_residuals, LossReport, SplitTag};
use crate::method::Method;
use crate::numerics::{reg_solve, SymMatrix};
use crate::parallel::Execution;
use crate::pipeline::config::{KernelChoice, DEFAULT_M_ACTIVE};
use crate::preprocess::{fit_feature_scaler, fit_target_scaler, KernelCenterer, TargetScaler};

/// Settings that fix the preprocessing, independent of α.
#[derive(Debug, Clone, Copy)]
pub struct PrepareOptions {
    pub method: Method,
    pub kernel: Option<KernelChoice>,
    pub n_latent: usize,
    pub lambda: f64,
    pub m_active: Option<usize>,
    pub fps_start: usize,
    pub execution: Execution,
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
enum Space {
    Linear,
    Full {
        /// Centered train kernel.
        k_train: SymMatrix,
        /// Centered kernel of every row against the train rows.
        k_all: Array2<f64>,
        /// Centered self-similarity of every row.
        k_diag: Array1<f64>,
    },
    Sparse {
        /// Raw active kernel.
        k_mm: SymMatrix,
        /// Centered kernel of every row against the active set.
        k_all: Array2<f64>,
        /// Row indices of the active set, all within the train split.
        active: Vec<usize>,
        nys_train: NystromFeatures,
    },
}

/// Scaled data and kernels for one train/test split.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub opts: PrepareOptions,
    pub kernel: Option<KernelSpec>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub split_tags: Vec<SplitTag>,
    /// Scaled features of every row.
    pub x: Array2<f64>,
    /// Scaled targets of every row.
    pub y: Array2<f64>,
    pub target_scaler: TargetScaler,
    space: Space,
}

#[derive(Debug, Clone)]
pub enum Fitted {
    Linear(FittedProjector),
    Kernel(KernelFittedProjector),
}

impl Fitted {
    pub fn alpha(&self) -> f64 {
        match self {
            Fitted::Linear(f) => f.alpha,
            Fitted::Kernel(f) => f.alpha,
        }
    }

    pub fn n_latent(&self) -> usize {
        match self {
            Fitted::Linear(f) => f.n_latent,
            Fitted::Kernel(f) => f.n_latent,
        }
    }
}

/// Latent coordinates, scaled predictions and projection residuals of every row.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub t: Array2<f64>,
    pub y_hat: Array2<f64>,
    pub proj_residual: Array1<f64>,
}

fn resolve_kernel(choice: KernelChoice, x_train: ArrayView2<'_, f64>) -> Result<KernelSpec> {
    match choice {
        KernelChoice::Linear => Ok(KernelSpec::Linear),
        KernelChoice::Rbf { gamma: Some(g) } => KernelSpec::rbf(g),
        KernelChoice::Rbf { gamma: None } => KernelSpec::rbf(default_gamma(x_train)?),
    }
}

fn active_set(opts: &PrepareOptions, x_train: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
    let m = opts.m_active.unwrap_or(DEFAULT_M_ACTIVE.min(x_train.nrows()));
    if m > x_train.nrows() {
        return Err(Error::invalid(format!(
            "active-set size {m} exceeds the {} training samples",
            x_train.nrows()
        )));
    }
    fps_select_with(opts.execution, x_train, m, opts.fps_start)
}

impl Prepared {
    /// Fits all scalers and kernels on `train` only; `x_raw` and `y_raw` hold every row.
    pub fn new(
        opts: PrepareOptions,
        x_raw: ArrayView2<'_, f64>,
        y_raw: ArrayView2<'_, f64>,
        train: Vec<usize>,
        test: Vec<usize>,
    ) -> Result<Self> {
        let n = x_raw.nrows();
        if y_raw.nrows() != n {
            return Err(Error::invalid("features and targets disagree on sample count"));
        }
        let mut split_tags = vec![SplitTag::Test; n];
        for &i in &train {
            split_tags[i] = SplitTag::Train;
        }
        let feature_scaler = fit_feature_scaler(x_raw.select(Axis(0), &train).view())?;
        let target_scaler = fit_target_scaler(y_raw.select(Axis(0), &train).view())?;
        let x = feature_scaler.transform(x_raw)?;
        let y = target_scaler.transform(y_raw)?;
        let x_train = x.select(Axis(0), &train);
        let exec = opts.execution;

        let kernel = if opts.method.is_kernel() {
            let choice = opts.kernel.unwrap_or(KernelChoice::Rbf { gamma: None });
            Some(resolve_kernel(choice, x_train.view())?)
        } else {
            None
        };
        let space = match kernel {
            None => Space::Linear,
            Some(spec) if !opts.method.is_sparse() => {
                let k_train_raw = SymMatrix::new(kernel_matrix_with(exec, &spec, x_train.view(), x_train.view())?)?;
                let centerer = KernelCenterer::fit_full(&k_train_raw)?;
                let k_all_raw = kernel_matrix_with(exec, &spec, x.view(), x_train.view())?;
                Space::Full {
                    k_train: centerer.center_train(&k_train_raw)?,
                    k_diag: centerer.center_diagonal(kernel_diagonal(&spec, x.view()).view(), k_all_raw.view())?,
                    k_all: centerer.center_cross(k_all_raw.view())?,
                }
            }
            Some(spec) => {
                let local = active_set(&opts, x_train.view())?;
                let active: Vec<usize> = local.iter().map(|&i| train[i]).collect();
                let x_active = x.select(Axis(0), &active);
                let k_mm = SymMatrix::new(kernel_matrix_with(exec, &spec, x_active.view(), x_active.view())?)?;
                let k_all_raw = kernel_matrix_with(exec, &spec, x.view(), x_active.view())?;
                let centerer = KernelCenterer::fit_sparse(k_all_raw.select(Axis(0), &train).view(), &k_mm)?;
                let k_all = centerer.center_sparse(k_all_raw.view())?;
                let nys_train = NystromFeatures::from_kernels(k_all.select(Axis(0), &train).view(), &k_mm, active.clone())?;
                Space::Sparse {
                    k_mm,
                    k_all,
                    active,
                    nys_train,
                }
            }
        };
        Ok(Prepared {
            opts,
            kernel,
            train,
            test,
            split_tags,
            x,
            y,
            target_scaler,
            space,
        })
    }

    pub fn m_active(&self) -> Option<usize> {
        match &self.space {
            Space::Sparse { active, .. } => Some(active.len()),
            _ => None,
        }
    }

    pub fn fit(&self, alpha: f64) -> Result<Fitted> {
        let PrepareOptions {
            method,
            n_latent,
            lambda,
            ..
        } = self.opts;
        let y = self.y.select(Axis(0), &self.train);
        let y = y.view();
        match &self.space {
            Space::Linear => {
                let x = self.x.select(Axis(0), &self.train);
                let x = x.view();
                Ok(Fitted::Linear(match method {
                    Method::Pca => fit_pca(x, Some(y), n_latent)?,
                    Method::Mds => fit_mds(x, Some(y), n_latent)?,
                    Method::Ridge => fit_ridge(x, y, lambda)?,
                    Method::Pcovr => fit_pcovr(x, y, alpha, n_latent, lambda)?,
                    other => return Err(Error::invalid(format!("{other} is not a linear method"))),
                }))
            }
            Space::Full { k_train, .. } => Ok(Fitted::Kernel(match method {
                Method::Kpca => fit_kpca(k_train, Some(y), n_latent)?,
                Method::Krr => fit_krr(k_train, y, lambda)?,
                Method::Kpcovr => fit_kpcovr(k_train, y, alpha, n_latent, lambda)?,
                other => return Err(Error::invalid(format!("{other} is not a full kernel method"))),
            })),
            Space::Sparse {
                k_mm,
                k_all,
                active,
                nys_train,
            } => Ok(Fitted::Kernel(match method {
                Method::SparseKpca => fit_sparse_kpca(nys_train, Some(y), n_latent)?,
                Method::SparseKrr => {
                    fit_sparse_krr(k_all.select(Axis(0), &self.train).view(), k_mm, active.clone(), y, lambda)?
                }
                Method::SparseKpcovr => fit_sparse_kpcovr(nys_train, y, alpha, n_latent, lambda)?,
                other => return Err(Error::invalid(format!("{other} is not a sparse kernel method"))),
            })),
        }
    }

    pub fn evaluate(&self, fitted: &Fitted) -> Result<Evaluation> {
        match (&self.space, fitted) {
            (Space::Linear, Fitted::Linear(f)) => {
                let t = f.transform(self.x.view())?;
                let y_hat = f.predict_latent(t.view())?;
                let proj_residual = row_residuals(self.x.view(), f.reconstruct(t.view())?.view())?;
                Ok(Evaluation { t, y_hat, proj_residual })
            }
            (Space::Full { k_train, k_all, k_diag }, Fitted::Kernel(f)) => {
                let t = f.transform_kernel(k_all.view())?;
                let y_hat = f.predict_latent(t.view())?;
                let t_train = t.select(Axis(0), &self.train);
                let proj_residual =
                    kernel_projection_residuals(k_diag.view(), k_all.view(), k_train.view(), t_train.view(), t.view())?;
                Ok(Evaluation { t, y_hat, proj_residual })
            }
            (Space::Sparse { k_all, nys_train, .. }, Fitted::Kernel(f)) => {
                let t = f.transform_kernel(k_all.view())?;
                let y_hat = f.predict_latent(t.view())?;
                let phi = nys_train.map(k_all.view())?;
                let proj_residual = if t.ncols() == 0 {
                    phi.map_axis(Axis(1), |r| r.dot(&r))
                } else {
                    // Φ reconstructed by least squares on the train latent: (TᵀT)⁺TᵀΦ
                    let t_train = t.select(Axis(0), &self.train);
                    let tt = SymMatrix::new(t_train.t().dot(&t_train))?;
                    let p = reg_solve(&tt, t_train.t().dot(&phi.select(Axis(0), &self.train)).view(), 0.0)?;
                    row_residuals(phi.view(), t.dot(&p).view())?
                };
                Ok(Evaluation { t, y_hat, proj_residual })
            }
            _ => Err(Error::invalid("fitted model does not belong to this preprocessing")),
        }
    }

    /// One report per non-empty split.
    pub fn losses(&self, eval: &Evaluation, alpha: f64, n_latent: usize) -> Result<Vec<LossReport>> {
        let mut out = Vec::new();
        for (split, rows) in [(SplitTag::Train, &self.train), (SplitTag::Test, &self.test)] {
            if rows.is_empty() {
                continue;
            }
            let l_proj = rows.iter().map(|&i| eval.proj_residual[i]).sum::<f64>() / rows.len() as f64;
            let l_regr = loss_regr(
                self.y.select(Axis(0), rows).view(),
                eval.y_hat.select(Axis(0), rows).view(),
            )?;
            out.push(LossReport::new(alpha, n_latent, split, l_proj, l_regr));
        }
        Ok(out)
    }
}

/// Environment-level targets for grouped data: a structure model is fitted
/// on the train structures and its predictions are split over environments.
///
/// Every environment row must carry its structure's target. The result is in
/// the frame of a target scaler fitted on train structures.
pub fn environment_targets(
    opts: &PrepareOptions,
    x_env: ArrayView2<'_, f64>,
    y_rows: ArrayView2<'_, f64>,
    groups: &GroupIndex,
    train: &[usize],
) -> Result<Array2<f64>> {
    let members = groups.members();
    let mut y_struct = Array2::zeros((groups.n_structures(), y_rows.ncols()));
    for (s, envs) in members.iter().enumerate() {
        let first = y_rows.row(envs[0]);
        for &e in &envs[1..] {
            let same = y_rows
                .row(e)
                .iter()
                .zip(first.iter())
                .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0));
            if !same {
                return Err(Error::invalid(format!(
                    "environment rows {} and {e} of one structure carry different targets",
                    envs[0]
                )));
            }
        }
        y_struct.row_mut(s).assign(&first);
    }

    let mut train_structs: Vec<usize> = train.iter().map(|&i| groups.assignments()[i]).collect();
    train_structs.sort_unstable();
    train_structs.dedup();
    let (g_train, train_envs) = groups.restrict(&train_structs)?;
    let struct_scaler = fit_target_scaler(y_struct.select(Axis(0), &train_structs).view())?;
    let y_train = struct_scaler.transform(y_struct.select(Axis(0), &train_structs).view())?;
    let x_train_raw = x_env.select(Axis(0), &train_envs);

    if !opts.method.is_kernel() {
        let model = LinearStructureModel::fit_ridge(x_train_raw.view(), &g_train, y_train.view(), opts.lambda)?;
        return partition_predictions(&model, x_env, groups);
    }
    let scaler = fit_feature_scaler(x_train_raw.view())?;
    let x_all = scaler.transform(x_env)?;
    let x_train = x_all.select(Axis(0), &train_envs);
    let spec = resolve_kernel(opts.kernel.unwrap_or(KernelChoice::Rbf { gamma: None }), x_train.view())?;
    if opts.method.is_sparse() {
        let active = active_set(opts, x_train.view())?;
        let model =
            SparseKernelStructureModel::fit(spec, x_train.view(), &g_train, &active, y_train.view(), opts.lambda)?;
        partition_predictions(&model, x_all.view(), groups)
    } else {
        let model = KernelStructureModel::fit(spec, x_train.view(), &g_train, y_train.view(), opts.lambda)?;
        partition_predictions(&model, x_all.view(), groups)
    }
}
