//! Centering and scaling of features, targets and kernels.
//!
//! Every transformer is fitted once on the training split and then applied
//! unchanged to any other data, so new samples never move the model's frame.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{check_psd, retain_effective, sym_eig, SymMatrix};

fn column_means(x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    if x.nrows() < 2 {
        return Err(Error::invalid(format!("need at least two training samples, got {}", x.nrows())));
    }
    Ok(x.mean_axis(Axis(0)).expect("non-empty"))
}

fn check_width(expected: usize, x: ArrayView2<'_, f64>) -> Result<()> {
    if x.ncols() != expected {
        return Err(Error::invalid(format!("expected {expected} columns, got {}", x.ncols())));
    }
    Ok(())
}

/// Column centering plus one global scale, so that the centered training
/// matrix has squared Frobenius norm `n_train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub column_means: Array1<f64>,
    pub global_norm: f64,
    pub n_train: usize,
}

pub fn fit_feature_scaler(x_train: ArrayView2<'_, f64>) -> Result<FeatureScaler> {
    let column_means = column_means(x_train)?;
    let global_norm = (&x_train - &column_means).iter().map(|v| v * v).sum::<f64>().sqrt();
    if global_norm == 0.0 {
        return Err(Error::DegenerateInput("every feature column is constant".into()));
    }
    Ok(FeatureScaler {
        column_means,
        global_norm,
        n_train: x_train.nrows(),
    })
}

impl FeatureScaler {
    pub fn factor(&self) -> f64 {
        (self.n_train as f64).sqrt() / self.global_norm
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_width(self.column_means.len(), x)?;
        Ok((&x - &self.column_means) * self.factor())
    }
}

pub fn transform_features(s: &FeatureScaler, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    s.transform(x)
}

/// Per-property centering and scaling to variance `1 / n_properties`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetScaler {
    pub column_means: Array1<f64>,
    pub column_norms: Array1<f64>,
    pub n_train: usize,
    pub n_properties: usize,
}

pub fn fit_target_scaler(y_train: ArrayView2<'_, f64>) -> Result<TargetScaler> {
    let column_means = column_means(y_train)?;
    let centered = &y_train - &column_means;
    let column_norms: Array1<f64> = centered
        .axis_iter(Axis(1))
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    if let Some(col) = column_norms.iter().position(|&n| n == 0.0) {
        return Err(Error::DegenerateInput(format!("target column {col} is constant")));
    }
    Ok(TargetScaler {
        n_properties: y_train.ncols(),
        n_train: y_train.nrows(),
        column_means,
        column_norms,
    })
}

impl TargetScaler {
    /// Divisor applied to each centered column.
    pub fn column_scales(&self) -> Array1<f64> {
        let f = (self.n_properties as f64).sqrt() / (self.n_train as f64).sqrt();
        self.column_norms.mapv(|n| n * f)
    }

    pub fn transform(&self, y: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_width(self.n_properties, y)?;
        Ok((&y - &self.column_means) / &self.column_scales())
    }

    pub fn inverse_transform(&self, y: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_width(self.n_properties, y)?;
        Ok(&y * &self.column_scales() + &self.column_means)
    }
}

pub fn transform_targets(s: &TargetScaler, y: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    s.transform(y)
}

pub fn inverse_transform_targets(s: &TargetScaler, y: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    s.inverse_transform(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CenteringMode {
    Full,
    Sparse,
}

/// Which set the rows (or columns) of a full-kernel block come from.
#[derive(Debug, Clone, Copy)]
pub enum BlockSide<'a> {
    Train,
    /// New points, carrying their mean raw kernel against the training set.
    New(ArrayView1<'a, f64>),
}

/// Train-set statistics for centering and trace-normalizing kernels.
///
/// In full mode `means` holds the row means of the raw train kernel; in sparse
/// mode it holds the column means of the raw train-versus-active kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelCenterer {
    pub mode: CenteringMode,
    pub means: Array1<f64>,
    pub grand_mean: f64,
    pub trace_scale: f64,
    pub n_train: usize,
}

impl KernelCenterer {
    pub fn fit_full(k_train_raw: &SymMatrix) -> Result<Self> {
        let k = k_train_raw.view();
        let n = k.nrows();
        let means = k.mean_axis(Axis(1)).expect("non-empty");
        let grand_mean = means.mean().expect("non-empty");
        let trace: f64 = (0..n).map(|i| k[[i, i]] - 2.0 * means[i] + grand_mean).sum();
        if trace.is_nan() || trace <= 0.0 {
            return Err(Error::DegenerateInput("centered train kernel has zero trace".into()));
        }
        Ok(KernelCenterer {
            mode: CenteringMode::Full,
            means,
            grand_mean,
            trace_scale: n as f64 / trace,
            n_train: n,
        })
    }

    /// Fits on the raw kernel between train points (rows) and active points
    /// (columns). `K_MM` itself stays uncentered.
    pub fn fit_sparse(k_nm_train_raw: ArrayView2<'_, f64>, k_mm: &SymMatrix) -> Result<Self> {
        let n = k_nm_train_raw.nrows();
        if k_nm_train_raw.ncols() != k_mm.dim() {
            return Err(Error::invalid(format!(
                "K_NM has {} columns but K_MM is {}x{}",
                k_nm_train_raw.ncols(),
                k_mm.dim(),
                k_mm.dim()
            )));
        }
        let means = column_means(k_nm_train_raw)?;
        let centered = &k_nm_train_raw - &means;
        let eig = sym_eig(k_mm)?;
        check_psd(&eig)?;
        let kept = retain_effective(&eig);
        let phi = centered.dot(&kept.scaled_vectors(|l| l.powf(-0.5)));
        let trace: f64 = phi.iter().map(|v| v * v).sum();
        if trace.is_nan() || trace <= 0.0 {
            return Err(Error::DegenerateInput("centered Nyström kernel has zero trace".into()));
        }
        Ok(KernelCenterer {
            mode: CenteringMode::Sparse,
            means,
            grand_mean: 0.0,
            trace_scale: (n as f64 / trace).sqrt(),
            n_train: n,
        })
    }

    fn require(&self, mode: CenteringMode) -> Result<()> {
        if self.mode != mode {
            return Err(Error::invalid(format!("centerer was fitted in {:?} mode", self.mode)));
        }
        Ok(())
    }

    /// Row means of a raw new-versus-train kernel, for use with [`BlockSide::New`].
    pub fn new_point_means(&self, k_new_train_raw: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        self.require(CenteringMode::Full)?;
        check_width(self.n_train, k_new_train_raw)?;
        Ok(k_new_train_raw.mean_axis(Axis(1)).unwrap_or_else(|| Array1::zeros(0)))
    }

    fn side_means(&self, side: BlockSide<'_>, len: usize, what: &str) -> Result<Array1<f64>> {
        let means = match side {
            BlockSide::Train => self.means.clone(),
            BlockSide::New(m) => m.to_owned(),
        };
        if means.len() != len {
            return Err(Error::invalid(format!(
                "{what} count {len} does not match {} supplied means",
                means.len()
            )));
        }
        Ok(means)
    }

    pub fn center_full(&self, k_raw: ArrayView2<'_, f64>, rows: BlockSide<'_>, cols: BlockSide<'_>) -> Result<Array2<f64>> {
        self.require(CenteringMode::Full)?;
        let r = self.side_means(rows, k_raw.nrows(), "row")?;
        let c = self.side_means(cols, k_raw.ncols(), "column")?;
        let mut out = k_raw.to_owned();
        for ((i, j), v) in out.indexed_iter_mut() {
            *v = self.trace_scale * (*v - r[i] - c[j] + self.grand_mean);
        }
        Ok(out)
    }

    /// Centered train kernel.
    pub fn center_train(&self, k_train_raw: &SymMatrix) -> Result<SymMatrix> {
        SymMatrix::new(self.center_full(k_train_raw.view(), BlockSide::Train, BlockSide::Train)?)
    }

    /// Centered new-versus-train kernel.
    pub fn center_cross(&self, k_new_train_raw: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let m = self.new_point_means(k_new_train_raw)?;
        self.center_full(k_new_train_raw, BlockSide::New(m.view()), BlockSide::Train)
    }

    /// Centered self-similarities of new points, from their raw `k(x, x)` and
    /// their raw kernel against the training set.
    pub fn center_diagonal(&self, raw_diag: ArrayView1<'_, f64>, k_new_train_raw: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        let m = self.new_point_means(k_new_train_raw)?;
        if m.len() != raw_diag.len() {
            return Err(Error::invalid("diagonal and cross-kernel disagree on sample count"));
        }
        Ok(raw_diag
            .iter()
            .zip(m.iter())
            .map(|(d, mi)| self.trace_scale * (d - 2.0 * mi + self.grand_mean))
            .collect())
    }

    /// Centered and scaled kernel between any samples and the active set.
    pub fn center_sparse(&self, k_xm_raw: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.require(CenteringMode::Sparse)?;
        check_width(self.means.len(), k_xm_raw)?;
        Ok((&k_xm_raw - &self.means) * self.trace_scale)
    }
}

pub fn center_full_kernel(
    c: &KernelCenterer,
    k_raw: ArrayView2<'_, f64>,
    rows: BlockSide<'_>,
    cols: BlockSide<'_>,
) -> Result<Array2<f64>> {
    c.center_full(k_raw, rows, cols)
}

pub fn center_sparse_kernel(c: &KernelCenterer, k_nm_raw: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    c.center_sparse(k_nm_raw)
}
