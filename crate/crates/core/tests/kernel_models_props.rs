mod common;

use common::*;
use ndarray::{Array2, Axis};
use proptest::prelude::*;

use kpcovr::kernel_models::*;
use kpcovr::kernels::*;
use kpcovr::linear_models::*;
use kpcovr::losses::loss_regr;
use kpcovr::numerics::SymMatrix;
use kpcovr::preprocess::*;

fn scaled(seed: u64, n: usize, p: usize) -> (Array2<f64>, Array2<f64>) {
    let (x, y) = planted(seed, n, p, 2, 0.3);
    let y = y.mapv(f64::sin);
    (
        fit_feature_scaler(x.view()).unwrap().transform(x.view()).unwrap(),
        fit_target_scaler(y.view()).unwrap().transform(y.view()).unwrap(),
    )
}

fn centered(spec: &KernelSpec, x: &Array2<f64>) -> SymMatrix {
    let k = SymMatrix::new(kernel_matrix(spec, x.view(), x.view()).unwrap()).unwrap();
    KernelCenterer::fit_full(&k).unwrap().center_train(&k).unwrap()
}

/// Centered `K_NM` and raw `K_MM` for the first `m` points of an FPS ordering.
fn sparse_pair(spec: &KernelSpec, x: &Array2<f64>, order: &[usize], m: usize) -> (NystromFeatures, Array2<f64>, SymMatrix) {
    let active = order[..m].to_vec();
    let xa = x.select(Axis(0), &active);
    let k_nm = kernel_matrix(spec, x.view(), xa.view()).unwrap();
    let k_mm = SymMatrix::new(kernel_matrix(spec, xa.view(), xa.view()).unwrap()).unwrap();
    let knm = KernelCenterer::fit_sparse(k_nm.view(), &k_mm).unwrap().center_sparse(k_nm.view()).unwrap();
    let nys = NystromFeatures::from_kernels(knm.view(), &k_mm, active).unwrap();
    (nys, knm, k_mm)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn linear_kernel_models_collapse(seed in any::<u64>(), alpha in 0.0f64..=1.0) {
        let (x, y) = scaled(seed, 15, 4);
        let k = centered(&KernelSpec::Linear, &x);
        let kpca = fit_kpca(&k, None, 2).unwrap().transform_kernel(k.view()).unwrap();
        prop_assert!(max_diff_up_to_sign(kpca.view(), fit_pca(x.view(), None, 2).unwrap().training_t.view()) < 1e-6);
        prop_assert!(max_diff_up_to_sign(kpca.view(), fit_mds(x.view(), None, 2).unwrap().training_t.view()) < 1e-6);

        let krr = fit_krr(&k, y.view(), 1e-3).unwrap().predict_kernel(k.view()).unwrap();
        let ridge = fit_ridge(x.view(), y.view(), 1e-3).unwrap().predict(x.view()).unwrap();
        prop_assert!(max_diff(krr.view(), ridge.view()) < 1e-6);

        let kp = fit_kpcovr(&k, y.view(), alpha, 2, 1e-6).unwrap();
        let lp = fit_pcovr(x.view(), y.view(), alpha, 2, 1e-6).unwrap();
        prop_assert!(max_diff_up_to_sign(kp.training_t.view(), lp.training_t.view()) < 1e-6);
        prop_assert!(max_diff(kp.predict_kernel(k.view()).unwrap().view(), lp.predict(x.view()).unwrap().view()) < 1e-6);
    }

    #[test]
    fn sparse_regression_improves_with_the_active_set(seed in any::<u64>(), n in 10usize..30) {
        let (x, y) = scaled(seed, n, 3);
        let spec = KernelSpec::rbf(default_gamma(x.view()).unwrap()).unwrap();
        let order = fps_select(x.view(), n, 0).unwrap();
        let (mut prev_krr, mut prev_kpcovr) = (f64::INFINITY, f64::INFINITY);
        for m in 1..=n {
            let (nys, knm, k_mm) = sparse_pair(&spec, &x, &order, m);
            let krr = fit_sparse_krr(knm.view(), &k_mm, nys.active_indices.clone(), y.view(), 0.0).unwrap();
            let l_krr = loss_regr(y.view(), krr.predict_kernel(knm.view()).unwrap().view()).unwrap();
            let kp = fit_sparse_kpcovr(&nys, y.view(), 0.0, 2, 0.0).unwrap();
            let l_kp = loss_regr(y.view(), kp.predict_kernel(knm.view()).unwrap().view()).unwrap();
            prop_assert!(l_krr <= prev_krr + 1e-10, "sparse KRR rose at m = {m}");
            prop_assert!(l_kp <= prev_kpcovr + 1e-10, "sparse KPCovR rose at m = {m}");
            prev_krr = l_krr;
            prev_kpcovr = l_kp;
        }
    }

    #[test]
    fn alpha_endpoints(seed in any::<u64>(), n in 8usize..30) {
        let (x, y) = scaled(seed, n, 3);
        let k = centered(&KernelSpec::rbf(default_gamma(x.view()).unwrap()).unwrap(), &x);
        let one = fit_kpcovr(&k, y.view(), 1.0, 3, 1e-6).unwrap();
        let kpca = fit_kpca(&k, None, 3).unwrap();
        prop_assert!(max_diff_up_to_sign(one.training_t.view(), kpca.training_t.view()) < 1e-8);
        prop_assert!(max_diff(one.eigenvalues.view().insert_axis(Axis(0)), kpca.eigenvalues.view().insert_axis(Axis(0))) < 1e-8 * n as f64);

        let zero = fit_kpcovr(&k, y.view(), 0.0, 2, 0.0).unwrap();
        let krr = fit_krr(&k, y.view(), 0.0).unwrap();
        prop_assert!(max_diff(zero.predict_kernel(k.view()).unwrap().view(), krr.predict_kernel(k.view()).unwrap().view()) < 1e-6);
    }

    #[test]
    fn full_rank_kpca_reproduces_the_kernel(seed in any::<u64>(), n in 4usize..20) {
        let (x, _) = scaled(seed, n, 2);
        let k = centered(&KernelSpec::rbf(2.0).unwrap(), &x);
        let m = fit_kpca(&k, None, n).unwrap();
        let t = m.transform_kernel(k.view()).unwrap();
        prop_assert!(max_diff(t.view(), m.training_t.view()) < 1e-8);
        let norm = k.view().iter().map(|v| v * v).sum::<f64>().sqrt();
        let err = (&t.dot(&t.t()) - &k.view()).iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(err / norm < 1e-6);
    }

    #[test]
    fn fits_are_deterministic(seed in any::<u64>(), alpha in 0.0f64..=1.0) {
        let (x, y) = scaled(seed, 20, 3);
        let spec = KernelSpec::rbf(0.7).unwrap();
        let k = centered(&spec, &x);
        let a = fit_kpcovr(&k, y.view(), alpha, 2, 1e-6).unwrap();
        let b = fit_kpcovr(&k, y.view(), alpha, 2, 1e-6).unwrap();
        prop_assert_eq!(a.p_k_to_t.to_dense(), b.p_k_to_t.to_dense());
        prop_assert_eq!(a.p_t_to_y, b.p_t_to_y);

        let order = fps_select(x.view(), 20, 0).unwrap();
        let (nys, _, _) = sparse_pair(&spec, &x, &order, 8);
        let a = fit_sparse_kpcovr(&nys, y.view(), alpha, 2, 1e-6).unwrap();
        let b = fit_sparse_kpcovr(&nys, y.view(), alpha, 2, 1e-6).unwrap();
        prop_assert_eq!(a.p_k_to_t.to_dense(), b.p_k_to_t.to_dense());
        prop_assert_eq!(a.training_t, b.training_t);
    }
}
