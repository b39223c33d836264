//! Additive environment-to-structure models.
//!
//! A structure's property is the sum of contributions from its environments.
//! Structure-level models are trained on summed features or summed kernels,
//! and their predictions can be split back onto individual environments.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::kernel_models::{krr_weights, sparse_krr_weights};
use crate::kernels::{kernel_matrix, KernelSpec, NystromFeatures};
use crate::linear_models::{fit_ridge, FittedProjector};
use crate::numerics::SymMatrix;
use crate::preprocess::{fit_feature_scaler, FeatureScaler, KernelCenterer};

/// Assignment of each environment to a structure id in `0..n_structures`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupIndex {
    assignments: Vec<usize>,
    n_structures: usize,
}

impl GroupIndex {
    pub fn new(assignments: Vec<usize>, n_structures: usize) -> Result<Self> {
        let mut seen = vec![false; n_structures];
        for (env, &s) in assignments.iter().enumerate() {
            if s >= n_structures {
                return Err(Error::invalid(format!(
                    "environment {env} assigned to structure {s}, but there are only {n_structures}"
                )));
            }
            seen[s] = true;
        }
        if let Some(empty) = seen.iter().position(|&s| !s) {
            return Err(Error::invalid(format!("structure {empty} has no environments")));
        }
        Ok(GroupIndex {
            assignments,
            n_structures,
        })
    }

    /// Dense structure ids from arbitrary integer labels, ordered by label.
    /// Returns the index and the sorted distinct labels.
    pub fn from_labels(labels: &[i64]) -> Result<(Self, Vec<i64>)> {
        let mut distinct = labels.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        let assignments = labels
            .iter()
            .map(|l| distinct.binary_search(l).expect("label is present"))
            .collect();
        Ok((GroupIndex::new(assignments, distinct.len())?, distinct))
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn n_structures(&self) -> usize {
        self.n_structures
    }

    pub fn n_environments(&self) -> usize {
        self.assignments.len()
    }

    /// Environment indices of every structure.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.n_structures];
        for (env, &s) in self.assignments.iter().enumerate() {
            m[s].push(env);
        }
        m
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_structures];
        for &s in &self.assignments {
            c[s] += 1;
        }
        c
    }

    /// `n_structures × n_environments` 0/1 matrix.
    pub fn indicator(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.n_structures, self.assignments.len()));
        for (env, &s) in self.assignments.iter().enumerate() {
            a[[s, env]] = 1.0;
        }
        a
    }

    /// The sub-index over the given structures (renumbered in the order given)
    /// together with the original indices of their environments.
    pub fn restrict(&self, structures: &[usize]) -> Result<(GroupIndex, Vec<usize>)> {
        let mut remap = vec![usize::MAX; self.n_structures];
        for (new, &s) in structures.iter().enumerate() {
            if s >= self.n_structures {
                return Err(Error::invalid(format!("structure {s} out of range")));
            }
            remap[s] = new;
        }
        let mut envs = Vec::new();
        let mut assignments = Vec::new();
        for (env, &s) in self.assignments.iter().enumerate() {
            if remap[s] != usize::MAX {
                envs.push(env);
                assignments.push(remap[s]);
            }
        }
        Ok((GroupIndex::new(assignments, structures.len())?, envs))
    }

    fn check_rows(&self, rows: usize) -> Result<()> {
        if rows != self.assignments.len() {
            return Err(Error::invalid(format!(
                "{rows} environment rows but the group index covers {}",
                self.assignments.len()
            )));
        }
        Ok(())
    }
}

/// Row `s` is the sum of the environment rows assigned to structure `s`.
pub fn sum_features(x_env: ArrayView2<'_, f64>, g: &GroupIndex) -> Result<Array2<f64>> {
    g.check_rows(x_env.nrows())?;
    let mut out = Array2::zeros((g.n_structures, x_env.ncols()));
    for (row, &s) in x_env.axis_iter(Axis(0)).zip(&g.assignments) {
        let mut dst = out.row_mut(s);
        dst += &row;
    }
    Ok(out)
}

/// `K[s, s'] = Σ_{i∈s, j∈s'} K_env[i, j]`.
pub fn sum_kernel(k_env: ArrayView2<'_, f64>, g_rows: &GroupIndex, g_cols: &GroupIndex) -> Result<Array2<f64>> {
    g_rows.check_rows(k_env.nrows())?;
    g_cols.check_rows(k_env.ncols())?;
    let rows = sum_features(k_env, g_rows)?;
    Ok(sum_features(rows.t(), g_cols)?.reversed_axes())
}

/// A structure-level regressor whose prediction is a sum of per-environment
/// terms plus a constant shared by the structure.
pub trait AdditiveModel {
    /// Linear part contributed by each environment row.
    fn environment_terms(&self, x_env: ArrayView2<'_, f64>) -> Result<Array2<f64>>;
    /// Constant added once per structure.
    fn structure_offset(&self) -> Array1<f64>;
}

/// Environment predictions: each environment's term plus an equal share of
/// its structure's offset, so they re-sum to the structure prediction.
pub fn partition_predictions<M: AdditiveModel + ?Sized>(
    model: &M,
    x_env: ArrayView2<'_, f64>,
    g: &GroupIndex,
) -> Result<Array2<f64>> {
    g.check_rows(x_env.nrows())?;
    let mut terms = model.environment_terms(x_env)?;
    let offset = model.structure_offset();
    if offset.len() != terms.ncols() {
        return Err(Error::invalid("model offset does not match its output width"));
    }
    let counts = g.counts();
    for (mut row, &s) in terms.axis_iter_mut(Axis(0)).zip(&g.assignments) {
        row.scaled_add(1.0 / counts[s] as f64, &offset);
    }
    Ok(terms)
}

/// Structure predictions assembled from environment terms.
pub fn predict_structures<M: AdditiveModel + ?Sized>(model: &M, x_env: ArrayView2<'_, f64>, g: &GroupIndex) -> Result<Array2<f64>> {
    let terms = model.environment_terms(x_env)?;
    let mut sums = sum_features(terms.view(), g)?;
    sums += &model.structure_offset();
    Ok(sums)
}

/// A linear model on scaled summed features.
#[derive(Debug, Clone)]
pub struct LinearStructureModel {
    pub scaler: FeatureScaler,
    pub projector: FittedProjector,
    weights: Array2<f64>,
}

impl LinearStructureModel {
    pub fn new(scaler: FeatureScaler, projector: FittedProjector) -> Result<Self> {
        if projector.p_t_to_y.ncols() == 0 {
            return Err(Error::invalid("projector has no regression head, so it cannot be partitioned"));
        }
        let weights = projector.p_in_to_t.to_dense().dot(&projector.p_t_to_y);
        Ok(LinearStructureModel {
            scaler,
            projector,
            weights,
        })
    }

    /// Ridge regression on summed, scaled environment features.
    pub fn fit_ridge(x_env: ArrayView2<'_, f64>, g: &GroupIndex, y_struct: ArrayView2<'_, f64>, lambda: f64) -> Result<Self> {
        let summed = sum_features(x_env, g)?;
        let scaler = fit_feature_scaler(summed.view())?;
        let projector = fit_ridge(scaler.transform(summed.view())?.view(), y_struct, lambda)?;
        Self::new(scaler, projector)
    }

    /// Predictions from raw (unscaled) structure features.
    pub fn predict(&self, x_struct: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.projector.predict(self.scaler.transform(x_struct)?.view())
    }
}

impl AdditiveModel for LinearStructureModel {
    fn environment_terms(&self, x_env: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x_env.ncols() != self.weights.nrows() {
            return Err(Error::invalid(format!("expected {} features, got {}", self.weights.nrows(), x_env.ncols())));
        }
        Ok(x_env.dot(&self.weights) * self.scaler.factor())
    }

    fn structure_offset(&self) -> Array1<f64> {
        self.scaler.column_means.dot(&self.weights) * -self.scaler.factor()
    }
}

/// Kernel ridge regression on a centered structure kernel built as sums of
/// environment kernels.
#[derive(Debug, Clone)]
pub struct KernelStructureModel {
    pub spec: KernelSpec,
    pub centerer: KernelCenterer,
    pub weights: Array2<f64>,
    train_env: Array2<f64>,
    train_groups: GroupIndex,
}

impl KernelStructureModel {
    pub fn fit(
        spec: KernelSpec,
        x_env: ArrayView2<'_, f64>,
        g: &GroupIndex,
        y_struct: ArrayView2<'_, f64>,
        lambda: f64,
    ) -> Result<Self> {
        let k_env = kernel_matrix(&spec, x_env, x_env)?;
        let k_raw = SymMatrix::new(sum_kernel(k_env.view(), g, g)?)?;
        let centerer = KernelCenterer::fit_full(&k_raw)?;
        let weights = krr_weights(&centerer.center_train(&k_raw)?, y_struct, lambda)?;
        Ok(KernelStructureModel {
            spec,
            centerer,
            weights,
            train_env: x_env.to_owned(),
            train_groups: g.clone(),
        })
    }

    /// Raw kernel between each given environment and each training structure.
    fn env_to_structure(&self, x_env: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let k = kernel_matrix(&self.spec, x_env, self.train_env.view())?;
        Ok(sum_features(k.t(), &self.train_groups)?.reversed_axes())
    }

    /// Predictions for whole structures given their environments.
    pub fn predict(&self, x_env: ArrayView2<'_, f64>, g: &GroupIndex) -> Result<Array2<f64>> {
        let raw = sum_features(self.env_to_structure(x_env)?.view(), g)?;
        Ok(self.centerer.center_cross(raw.view())?.dot(&self.weights))
    }
}

impl AdditiveModel for KernelStructureModel {
    fn environment_terms(&self, x_env: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let raw = self.env_to_structure(x_env)?;
        let row_means = raw.mean_axis(Axis(1)).unwrap_or_else(|| Array1::zeros(raw.nrows()));
        let centered = (&raw - &row_means.insert_axis(Axis(1))) * self.centerer.trace_scale;
        Ok(centered.dot(&self.weights))
    }

    fn structure_offset(&self) -> Array1<f64> {
        let c = &self.centerer;
        let shift = c.means.mapv(|m| c.trace_scale * (c.grand_mean - m));
        shift.dot(&self.weights)
    }
}

/// Sparse KRR on structures, with an active set of environments.
#[derive(Debug, Clone)]
pub struct SparseKernelStructureModel {
    pub spec: KernelSpec,
    pub centerer: KernelCenterer,
    pub weights: Array2<f64>,
    active_env: Array2<f64>,
}

impl SparseKernelStructureModel {
    /// `active` indexes rows of `x_env`.
    pub fn fit(
        spec: KernelSpec,
        x_env: ArrayView2<'_, f64>,
        g: &GroupIndex,
        active: &[usize],
        y_struct: ArrayView2<'_, f64>,
        lambda: f64,
    ) -> Result<Self> {
        if active.is_empty() {
            return Err(Error::invalid("active set is empty"));
        }
        let active_env = x_env.select(Axis(0), active);
        let k_em = kernel_matrix(&spec, x_env, active_env.view())?;
        let k_nm = sum_features(k_em.view(), g)?;
        let k_mm = SymMatrix::new(kernel_matrix(&spec, active_env.view(), active_env.view())?)?;
        let centerer = KernelCenterer::fit_sparse(k_nm.view(), &k_mm)?;
        let nys = NystromFeatures::from_kernels(centerer.center_sparse(k_nm.view())?.view(), &k_mm, active.to_vec())?;
        let weights = sparse_krr_weights(&nys, y_struct, lambda)?;
        Ok(SparseKernelStructureModel {
            spec,
            centerer,
            weights,
            active_env,
        })
    }

    pub fn predict(&self, x_env: ArrayView2<'_, f64>, g: &GroupIndex) -> Result<Array2<f64>> {
        let k = sum_features(kernel_matrix(&self.spec, x_env, self.active_env.view())?.view(), g)?;
        Ok(self.centerer.center_sparse(k.view())?.dot(&self.weights))
    }
}

impl AdditiveModel for SparseKernelStructureModel {
    fn environment_terms(&self, x_env: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let k = kernel_matrix(&self.spec, x_env, self.active_env.view())?;
        Ok((k * self.centerer.trace_scale).dot(&self.weights))
    }

    fn structure_offset(&self) -> Array1<f64> {
        self.centerer.means.dot(&self.weights) * -self.centerer.trace_scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn group_index_validation() {
        assert!(GroupIndex::new(vec![0, 2], 2).is_err());
        assert!(GroupIndex::new(vec![0, 0], 2).is_err());
        let (g, labels) = GroupIndex::from_labels(&[7, 7, 3]).unwrap();
        assert_eq!(labels, vec![3, 7]);
        assert_eq!(g.assignments(), &[1, 1, 0]);
        assert_eq!(g.n_structures(), 2);
    }

    #[test]
    fn sums() {
        let x = array![[1.0, 0.0], [0.0, 1.0]];
        let g = GroupIndex::new(vec![0, 0], 1).unwrap();
        assert_eq!(sum_features(x.view(), &g).unwrap(), array![[1.0, 1.0]]);
        let single = GroupIndex::new(vec![0, 1], 2).unwrap();
        assert_eq!(sum_features(x.view(), &single).unwrap(), x);

        let ones = Array2::<f64>::ones((4, 4));
        let pairs = GroupIndex::new(vec![0, 0, 1, 1], 2).unwrap();
        assert_eq!(sum_kernel(ones.view(), &pairs, &pairs).unwrap(), array![[4.0, 4.0], [4.0, 4.0]]);

        assert!(sum_features(x.view(), &pairs).is_err());
    }

    #[test]
    fn restrict_renumbers() {
        let g = GroupIndex::new(vec![0, 1, 1, 2], 3).unwrap();
        let (sub, envs) = g.restrict(&[2, 1]).unwrap();
        assert_eq!(envs, vec![1, 2, 3]);
        assert_eq!(sub.assignments(), &[1, 1, 0]);
    }
}
