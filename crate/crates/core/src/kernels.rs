//! Kernel functions, kernel-matrix assembly, farthest point sampling and
//! Nyström feature construction.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{check_psd, retain_effective, sym_eig, EigResult, SymMatrix};
use crate::parallel::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: f64 },
}

impl KernelSpec {
    pub fn rbf(gamma: f64) -> Result<Self> {
        if gamma > 0.0 && gamma.is_finite() {
            Ok(KernelSpec::Rbf { gamma })
        } else {
            Err(Error::invalid(format!("rbf gamma must be positive, got {gamma}")))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::Linear => "linear",
            KernelSpec::Rbf { .. } => "rbf",
        }
    }

    fn eval(&self, x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> f64 {
        match *self {
            KernelSpec::Linear => x.dot(&y),
            KernelSpec::Rbf { gamma } => {
                let d2: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

pub fn kernel_value(spec: &KernelSpec, x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("vector lengths differ: {} vs {}", x.len(), y.len())));
    }
    Ok(spec.eval(x, y))
}

/// `K[i, j] = k(a_i, b_j)`.
pub fn kernel_matrix(spec: &KernelSpec, a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    kernel_matrix_with(Execution::default(), spec, a, b)
}

pub fn kernel_matrix_with(
    exec: Execution,
    spec: &KernelSpec,
    a: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    if a.ncols() != b.ncols() {
        return Err(Error::invalid(format!(
            "feature dimensions differ: {} vs {}",
            a.ncols(),
            b.ncols()
        )));
    }
    let (n, m) = (a.nrows(), b.nrows());
    let mut out = vec![0.0; n * m];
    exec.fill_chunks(&mut out, m, |i, row| {
        let ai = a.row(i);
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = spec.eval(ai, b.row(j));
        }
    });
    Ok(Array2::from_shape_vec((n, m), out).expect("shape matches buffer"))
}

/// `k(x_i, x_i)` for every row.
pub fn kernel_diagonal(spec: &KernelSpec, a: ArrayView2<'_, f64>) -> ndarray::Array1<f64> {
    a.axis_iter(Axis(0)).map(|r| spec.eval(r, r)).collect()
}

/// `1 / (n_features * mean population variance of the columns)`.
pub fn default_gamma(x_train: ArrayView2<'_, f64>) -> Result<f64> {
    let (n, p) = x_train.dim();
    if n < 2 || p == 0 {
        return Err(Error::invalid("need at least two samples and one feature to pick gamma"));
    }
    let means = x_train.mean_axis(Axis(0)).expect("non-empty");
    let total_var: f64 = x_train
        .axis_iter(Axis(1))
        .zip(means.iter())
        .map(|(col, m)| col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64)
        .sum();
    if total_var <= 0.0 {
        return Err(Error::DegenerateInput("all features are constant".into()));
    }
    // n_features * (total / n_features)
    Ok(1.0 / total_var)
}

/// Greedy max-min farthest point sampling in Euclidean feature space.
///
/// Ties go to the lowest index; already selected points are never picked again.
pub fn fps_select(x: ArrayView2<'_, f64>, m: usize, start: usize) -> Result<Vec<usize>> {
    fps_select_with(Execution::default(), x, m, start)
}

const FPS_CHUNK: usize = 512;

pub fn fps_select_with(exec: Execution, x: ArrayView2<'_, f64>, m: usize, start: usize) -> Result<Vec<usize>> {
    let n = x.nrows();
    if m < 1 || m > n {
        return Err(Error::invalid(format!("cannot select {m} points out of {n}")));
    }
    if start >= n {
        return Err(Error::invalid(format!("start index {start} out of range for {n} samples")));
    }
    let mut min_dist = vec![f64::INFINITY; n];
    let mut selected = Vec::with_capacity(m);
    let mut current = start;
    loop {
        selected.push(current);
        min_dist[current] = f64::NEG_INFINITY;
        if selected.len() == m {
            break;
        }
        let anchor = x.row(current);
        exec.fill_chunks(&mut min_dist, FPS_CHUNK, |c, chunk| {
            for (k, d) in chunk.iter_mut().enumerate() {
                if *d == f64::NEG_INFINITY {
                    continue;
                }
                let row = x.row(c * FPS_CHUNK + k);
                let d2: f64 = row.iter().zip(anchor.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                if d2 < *d {
                    *d = d2;
                }
            }
        });
        let mut best = 0;
        for (i, &d) in min_dist.iter().enumerate() {
            if d > min_dist[best] {
                best = i;
            }
        }
        current = best;
    }
    Ok(selected)
}

/// Explicit approximate RKHS features `Φ = K_NM U Λ^{-1/2}` built from an active set.
#[derive(Debug, Clone)]
pub struct NystromFeatures {
    pub phi: Array2<f64>,
    /// Eigenpairs of `K_MM` above the cutoff.
    pub active_eig: EigResult,
    /// `U Λ^{-1/2}`, shape `m_active × m_effective`.
    pub projector: Array2<f64>,
    pub active_indices: Vec<usize>,
}

impl NystromFeatures {
    /// Builds features from a (possibly centered) `K_NM` and the raw active kernel `K_MM`.
    pub fn from_kernels(k_nm: ArrayView2<'_, f64>, k_mm: &SymMatrix, active_indices: Vec<usize>) -> Result<Self> {
        if k_mm.dim() == 0 || active_indices.is_empty() {
            return Err(Error::invalid("active set is empty"));
        }
        if k_nm.ncols() != k_mm.dim() || active_indices.len() != k_mm.dim() {
            return Err(Error::invalid(format!(
                "K_NM has {} columns, K_MM is {}x{}, {} active indices",
                k_nm.ncols(),
                k_mm.dim(),
                k_mm.dim(),
                active_indices.len()
            )));
        }
        let full = sym_eig(k_mm)?;
        check_psd(&full)?;
        let active_eig = retain_effective(&full);
        let projector = active_eig.scaled_vectors(|l| l.powf(-0.5));
        let phi = k_nm.dot(&projector);
        Ok(NystromFeatures {
            phi,
            active_eig,
            projector,
            active_indices,
        })
    }

    pub fn m_active(&self) -> usize {
        self.projector.nrows()
    }

    pub fn m_effective(&self) -> usize {
        self.projector.ncols()
    }

    /// Features of new samples from their kernel against the active set.
    pub fn map(&self, k_xm: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if k_xm.ncols() != self.m_active() {
            return Err(Error::invalid(format!(
                "expected {} active columns, got {}",
                self.m_active(),
                k_xm.ncols()
            )));
        }
        Ok(k_xm.dot(&self.projector))
    }
}

/// Raw-kernel Nyström features of every row of `x_all` against `x_all[active]`.
pub fn nystrom_features(spec: &KernelSpec, x_all: ArrayView2<'_, f64>, active_indices: &[usize]) -> Result<NystromFeatures> {
    if active_indices.is_empty() {
        return Err(Error::invalid("active set is empty"));
    }
    if let Some(&bad) = active_indices.iter().find(|&&i| i >= x_all.nrows()) {
        return Err(Error::invalid(format!("active index {bad} out of range")));
    }
    let active = x_all.select(Axis(0), active_indices);
    let k_nm = kernel_matrix(spec, x_all, active.view())?;
    let k_mm = SymMatrix::new(kernel_matrix(spec, active.view(), active.view())?)?;
    NystromFeatures::from_kernels(k_nm.view(), &k_mm, active_indices.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn values() {
        let lin = KernelSpec::Linear;
        assert_eq!(kernel_value(&lin, array![1.0, 2.0].view(), array![3.0, 4.0].view()).unwrap(), 11.0);
        let rbf = KernelSpec::rbf(1.0).unwrap();
        assert_eq!(kernel_value(&rbf, array![0.3, 2.0].view(), array![0.3, 2.0].view()).unwrap(), 1.0);
        let v = kernel_value(&rbf, array![0.0].view(), array![1.0].view()).unwrap();
        assert!((v - 0.367_879_441_171_442_3).abs() < 1e-15);
        assert!(kernel_value(&lin, array![1.0].view(), array![1.0, 2.0].view()).is_err());
        assert!(KernelSpec::rbf(0.0).is_err());
    }

    #[test]
    fn matrix_basics() {
        let eye = Array2::<f64>::eye(3);
        let k = kernel_matrix(&KernelSpec::Linear, eye.view(), eye.view()).unwrap();
        assert_eq!(k, eye);
        let x = array![[0.1, 2.0], [3.0, -1.0], [0.5, 0.5]];
        let k = kernel_matrix(&KernelSpec::rbf(0.7).unwrap(), x.view(), x.view()).unwrap();
        assert!(k.diag().iter().all(|&d| d == 1.0));
        assert!(kernel_matrix(&KernelSpec::Linear, x.view(), eye.view()).is_err());
    }

    #[test]
    fn fps_examples() {
        let line = array![[0.0], [1.0], [10.0]];
        assert_eq!(fps_select(line.view(), 3, 0).unwrap(), vec![0, 2, 1]);
        let square = array![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        assert_eq!(fps_select(square.view(), 2, 0).unwrap(), vec![0, 3]);
        let mut all = fps_select(square.view(), 4, 2).unwrap();
        all.sort();
        assert_eq!(all, vec![0, 1, 2, 3]);
        assert!(fps_select(square.view(), 5, 0).is_err());
        assert!(fps_select(square.view(), 2, 9).is_err());
    }

    #[test]
    fn fps_with_duplicates_selects_each_index_once() {
        let x = array![[0.0], [0.0], [0.0]];
        assert_eq!(fps_select(x.view(), 3, 1).unwrap(), vec![1, 0, 2]);
    }

    #[test]
    fn single_active_point() {
        let x = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let nys = nystrom_features(&KernelSpec::rbf(0.5).unwrap(), x.view(), &[2]).unwrap();
        assert_eq!(nys.phi.ncols(), 1);
        assert!(nystrom_features(&KernelSpec::Linear, x.view(), &[]).is_err());
        assert!(nystrom_features(&KernelSpec::Linear, x.view(), &[7]).is_err());
    }

    #[test]
    fn gamma_heuristic() {
        // column variances 1 and 0 → mean 0.5, two features → gamma 1
        let x = array![[1.0, 5.0], [-1.0, 5.0]];
        assert!((default_gamma(x.view()).unwrap() - 1.0).abs() < 1e-15);
        assert!(default_gamma(array![[1.0], [1.0]].view()).is_err());
    }
}
