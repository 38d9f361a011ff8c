use fairaa::metrics::mmd2;
use fairaa::{
    encode_multi_group, encode_two_group, explained_variance, explained_variance_kernel, fairness_penalty, fit,
    fit_kernel, frobenius_sq, grad_s, gram, kernel_objective, matmul, objective, project_row_to_simplex, stack_attributes,
    transform, ArchetypalModel, DataMatrix, FitConfig, GroupLabels, KernelSpec, MetricsReport, Rng,
};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize, seed: u64) -> DataMatrix {
    let mut rng = Rng::new(seed);
    DataMatrix::new(rows, cols, (0..rows * cols).map(|_| 4.0 * rng.uniform() - 2.0).collect()).unwrap()
}

fn simplex_rows(rows: usize, cols: usize, seed: u64) -> DataMatrix {
    let mut rng = Rng::new(seed);
    let out: Vec<Vec<f64>> = (0..rows)
        .map(|_| {
            let raw: Vec<f64> = (0..cols).map(|_| rng.uniform() + 0.01).collect();
            let sum: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / sum).collect()
        })
        .collect();
    DataMatrix::from_rows(&out).unwrap()
}

/// Every group present at least once.
fn labels(n: usize, groups: usize, seed: u64) -> GroupLabels {
    let mut rng = Rng::new(seed);
    let mut l: Vec<usize> = (0..n).map(|i| i % groups).collect();
    rng.shuffle(&mut l);
    GroupLabels::new(l).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_is_nearest_simplex_point(v in prop::collection::vec(-5.0f64..5.0, 1..10), seed in 0u64..1000) {
        let p = project_row_to_simplex(&v).unwrap();
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let dist = |w: &[f64]| w.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let other = simplex_rows(1, v.len(), seed);
        prop_assert!(dist(&p) <= dist(other.row(0)) + 1e-12);
        let again = project_row_to_simplex(&p).unwrap();
        prop_assert!(p.iter().zip(&again).all(|(a, b)| (a - b).abs() <= 1e-12));
    }

    #[test]
    fn projection_ignores_uniform_shifts(v in prop::collection::vec(-5.0f64..5.0, 1..10), shift in -3.0f64..3.0) {
        let a = project_row_to_simplex(&v).unwrap();
        let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
        let b = project_row_to_simplex(&shifted).unwrap();
        prop_assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= 1e-12));
    }

    #[test]
    fn encodings_are_centered(n in 4usize..60, groups in 2usize..5, seed in 0u64..1000) {
        prop_assume!(n >= groups);
        let l = labels(n, groups, seed);
        let two = encode_two_group(&labels(n, 2, seed + 1)).unwrap();
        let multi = encode_multi_group(&l).unwrap();
        let stacked = stack_attributes(&[two, multi]).unwrap();
        for row in stacked.z().row_iter() {
            prop_assert!(row.iter().sum::<f64>().abs() <= 1e-10);
        }
    }

    #[test]
    fn penalty_vanishes_on_group_independent_projections(n in 4usize..40, k in 1usize..5, seed in 0u64..1000) {
        let l = labels(n, 3, seed);
        let z = encode_multi_group(&l).unwrap();
        let row = simplex_rows(1, k, seed);
        let s = DataMatrix::from_rows(&vec![row.row(0).to_vec(); n]).unwrap();
        prop_assert!(fairness_penalty(&z, &s).unwrap() <= 1e-20);
    }

    #[test]
    fn two_group_one_vs_rest_doubles_the_penalty(n in 4usize..40, k in 1usize..5, seed in 0u64..1000) {
        let l = labels(n, 2, seed);
        let s = simplex_rows(n, k, seed);
        let two = fairness_penalty(&encode_two_group(&l).unwrap(), &s).unwrap();
        let multi = fairness_penalty(&encode_multi_group(&l).unwrap(), &s).unwrap();
        prop_assert!(rel(multi, 2.0 * two) <= 1e-10);
    }

    #[test]
    fn objective_composes(n in 3usize..20, d in 1usize..4, k in 1usize..4, lambda in 0.0f64..10.0, seed in 0u64..1000) {
        let x = matrix(n, d, seed);
        let s = simplex_rows(n, k, seed + 1);
        let c = simplex_rows(k, n, seed + 2);
        let z = encode_two_group(&labels(n, 2, seed)).unwrap();
        let recon = frobenius_sq(&x.sub(&matmul(&s, &matmul(&c, &x).unwrap()).unwrap()).unwrap());
        let pen = frobenius_sq(&matmul(z.z(), &s).unwrap());
        let direct = recon + lambda * pen;
        prop_assert!(rel(objective(&x, &s, &c, Some(&z), lambda).unwrap(), direct) <= 1e-10);
        let k_lin = gram(&x, &KernelSpec::linear()).unwrap();
        prop_assert!(rel(kernel_objective(&k_lin, &s, &c, Some(&z), lambda).unwrap(), direct) <= 1e-9);
    }

    #[test]
    fn rbf_objective_is_nonnegative(n in 3usize..20, d in 1usize..4, k in 1usize..4, seed in 0u64..1000) {
        let x = matrix(n, d, seed);
        let kr = gram(&x, &KernelSpec::rbf(None)).unwrap();
        let s = simplex_rows(n, k, seed + 1);
        let c = simplex_rows(k, n, seed + 2);
        prop_assert!(kernel_objective(&kr, &s, &c, None, 0.0).unwrap() >= -1e-9);
        prop_assert!(explained_variance_kernel(&kr, &s, &c).unwrap() <= 1.0 + 1e-9);
    }

    #[test]
    fn gradient_is_affine_in_lambda(n in 3usize..15, k in 1usize..4, seed in 0u64..1000) {
        let x = matrix(n, 2, seed);
        let s = simplex_rows(n, k, seed + 1);
        let c = simplex_rows(k, n, seed + 2);
        let z = encode_two_group(&labels(n, 2, seed)).unwrap();
        let g = |l: f64| grad_s(&x, &s, &c, Some(&z), l).unwrap();
        let (g0, g1, g2) = (g(0.0), g(1.0), g(2.0));
        for i in 0..g0.values().len() {
            let lhs = g2.values()[i] - g0.values()[i];
            let rhs = 2.0 * (g1.values()[i] - g0.values()[i]);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn mmd_is_symmetric_and_zero_on_itself(na in 2usize..20, nb in 2usize..20, seed in 0u64..1000) {
        let a = matrix(na, 2, seed);
        let b = matrix(nb, 2, seed + 1);
        let spec = KernelSpec::rbf(Some(0.7));
        prop_assert!(mmd2(&a, &a, &spec).unwrap().abs() <= 1e-12);
        prop_assert!((mmd2(&a, &b, &spec).unwrap() - mmd2(&b, &a, &spec).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn explained_variance_ignores_row_order(n in 3usize..20, k in 1usize..4, seed in 0u64..1000) {
        let x = matrix(n, 3, seed);
        let s = simplex_rows(n, k, seed + 1);
        let c = simplex_rows(k, n, seed + 2);
        let mut perm: Vec<usize> = (0..n).collect();
        Rng::new(seed).shuffle(&mut perm);
        let xp = x.select_rows(&perm).unwrap();
        let sp = s.select_rows(&perm).unwrap();
        // C weights the training points, so its columns follow the same order
        let cp = c.transpose().select_rows(&perm).unwrap().transpose();
        let a = explained_variance(&x, &s, &c).unwrap();
        let b = explained_variance(&xp, &sp, &cp).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn linear_kernel_ev_matches_feature_ev_on_centered_data(n in 3usize..20, k in 1usize..4, seed in 0u64..1000) {
        let raw = matrix(n, 3, seed);
        let means: Vec<f64> = (0..3).map(|j| raw.column(j).iter().sum::<f64>() / n as f64).collect();
        let x = DataMatrix::new(n, 3, raw.values().iter().enumerate().map(|(i, v)| v - means[i % 3]).collect()).unwrap();
        let s = simplex_rows(n, k, seed + 1);
        let c = simplex_rows(k, n, seed + 2);
        let k_lin = gram(&x, &KernelSpec::linear()).unwrap();
        let a = explained_variance(&x, &s, &c).unwrap();
        let b = explained_variance_kernel(&k_lin, &s, &c).unwrap();
        prop_assert!((a - b).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn fits_stay_feasible_and_monotone(n in 6usize..40, k in 1usize..5, lambda in prop::sample::select(vec![0.0, 0.5, 5.0]), seed in 0u64..1000) {
        let x = matrix(n, 2, seed);
        let z = encode_two_group(&labels(n, 2, seed)).unwrap();
        let mut cfg = FitConfig::new(k).with_lambda(lambda).with_seed(seed);
        cfg.max_iters = 300;
        for model in [fit(&x, &cfg, Some(&z)).unwrap(), fit_kernel(&gram(&x, &KernelSpec::rbf(None)).unwrap(), &cfg, Some(&z)).unwrap()] {
            prop_assert!(model.s().rows_on_simplex(1e-9));
            prop_assert!(model.c().rows_on_simplex(1e-9));
            let t = model.objective_trace();
            prop_assert!(t.windows(2).all(|w| w[1] <= w[0] + 1e-9 * w[0].abs()));
        }
    }

    #[test]
    fn zero_lambda_ignores_the_encoding(n in 6usize..40, k in 1usize..4, seed in 0u64..1000) {
        let x = matrix(n, 2, seed);
        let z = encode_two_group(&labels(n, 2, seed)).unwrap();
        let cfg = FitConfig::new(k).with_seed(seed);
        let a = fit(&x, &cfg, None).unwrap();
        let b = fit(&x, &cfg, Some(&z)).unwrap();
        prop_assert_eq!(a.s(), b.s());
        prop_assert_eq!(a.c(), b.c());
        prop_assert_eq!(a.objective_trace(), b.objective_trace());
    }

    #[test]
    fn transform_of_training_data_is_no_worse(n in 6usize..30, k in 1usize..4, seed in 0u64..1000) {
        let x = matrix(n, 2, seed);
        let cfg = FitConfig::new(k).with_seed(seed);
        let model = fit(&x, &cfg, None).unwrap();
        let s_new = transform(&model, &x, &x, &cfg).unwrap();
        prop_assert!(s_new.rows_on_simplex(1e-9));
        let trained = objective(&x, model.s(), model.c(), None, 0.0).unwrap();
        let refit = objective(&x, &s_new, model.c(), None, 0.0).unwrap();
        prop_assert!(refit <= trained + 1e-6);
    }

    #[test]
    fn model_json_round_trips(n in 4usize..20, k in 1usize..4, seed in 0u64..1000) {
        let x = matrix(n, 2, seed);
        let model = fit(&x, &FitConfig::new(k).with_seed(seed), None).unwrap();
        let back = ArchetypalModel::from_json(&model.to_json().unwrap()).unwrap();
        prop_assert_eq!(back.s(), model.s());
        prop_assert_eq!(back.c(), model.c());
        prop_assert_eq!(back.objective_trace(), model.objective_trace());
        prop_assert_eq!(back.config(), model.config());
    }
}

#[test]
fn simplex_vertices_are_reconstructed_exactly() {
    let x = DataMatrix::from_rows(&[vec![0.0, 0.0], vec![4.0, 0.0], vec![0.0, 3.0]]).unwrap();
    let model = fit(&x, &FitConfig::new(3), None).unwrap();
    assert!(model.final_objective() <= 1e-6 * frobenius_sq(&x));
}

#[test]
fn metrics_report_round_trips() {
    let report = MetricsReport {
        explained_variance: 0.912_345_678_901_234_5,
        mmd2: 1.0 / 3.0,
        ls_accuracy: 0.5,
        penalty: 1e-300,
        lambda: 10.0,
        k: 3,
        dataset_tag: "toy".into(),
        seed: u64::MAX,
    };
    let back: MetricsReport = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
    assert_eq!(back, report);
}
