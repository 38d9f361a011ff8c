//! Gram matrices and the kernelized solver (KernelAA / FairKernelAA).
//!
//! Every term of the objective and its gradients only touches the data
//! through inner products, so `X Xᵀ` can be swapped for any PSD kernel `K`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fairness::{fairness_penalty, PenaltyTerm, SensitiveEncoding};
use crate::linalg::{matmul_transa, matmul_transb, matmul_unchecked, DataMatrix};
use crate::model::{check_encoding, check_factors, check_lambda, penalty_value, ArchetypalModel, FitConfig};
use crate::solver::{self, Geometry};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Linear,
    Rbf,
}

/// Kernel choice. For RBF, `K_ij = exp(−γ ||x_i − x_j||²)`; a missing `γ`
/// is set by the median heuristic `γ = 1 / (2 · median²)` over pairwise
/// distances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub gamma: Option<f64>,
}

impl KernelSpec {
    pub fn linear() -> Self {
        Self {
            kind: KernelKind::Linear,
            gamma: None,
        }
    }

    pub fn rbf(gamma: Option<f64>) -> Self {
        Self {
            kind: KernelKind::Rbf,
            gamma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(g) = self.gamma {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::config(format!("gamma = {g} must be finite and positive")));
            }
        }
        Ok(())
    }
}

/// Symmetric `n × n` kernel matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    values: DataMatrix,
}

const SYMMETRY_TOL: f64 = 1e-10;

impl GramMatrix {
    pub fn new(values: DataMatrix) -> Result<Self> {
        let n = values.rows();
        if values.cols() != n {
            return Err(Error::shape(format!(
                "Gram matrix must be square, got {}x{}",
                n,
                values.cols()
            )));
        }
        let scale = values.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in (i + 1)..n {
                if (values.get(i, j) - values.get(j, i)).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::input(format!("Gram matrix asymmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { values })
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn matrix(&self) -> &DataMatrix {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values.get(i, j)
    }

    pub fn trace(&self) -> f64 {
        self.values.trace()
    }

    /// Trace of the double-centered Gram, `tr(K) − 1ᵀK1 / n`.
    pub fn centered_trace(&self) -> f64 {
        self.trace() - self.values.sum() / self.n() as f64
    }
}

fn squared_distances(a: &DataMatrix, b: &DataMatrix) -> DataMatrix {
    DataMatrix::from_fn(a.rows(), b.rows(), |i, j| {
        a.row(i).iter().zip(b.row(j)).map(|(x, y)| (x - y) * (x - y)).sum()
    })
}

/// Median of the pairwise distances between distinct rows (`i < j`).
pub fn median_distance(x: &DataMatrix) -> Result<f64> {
    let n = x.rows();
    if n < 2 {
        return Err(Error::input("median heuristic needs at least two points"));
    }
    let mut d = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let sq: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            d.push(sq.sqrt());
        }
    }
    d.sort_unstable_by(f64::total_cmp);
    let m = d.len();
    Ok(if m % 2 == 1 {
        d[m / 2]
    } else {
        0.5 * (d[m / 2 - 1] + d[m / 2])
    })
}

/// `γ = 1 / (2 · median²)`; errors on a zero median.
pub fn median_heuristic_gamma(x: &DataMatrix) -> Result<f64> {
    let med = median_distance(x)?;
    if med <= 0.0 {
        return Err(Error::input(
            "median pairwise distance is zero (duplicated points); pass gamma explicitly",
        ));
    }
    Ok(1.0 / (2.0 * med * med))
}

/// The `γ` an RBF spec resolves to on `x`.
pub fn resolve_gamma(x: &DataMatrix, spec: &KernelSpec) -> Result<f64> {
    spec.validate()?;
    match spec.gamma {
        Some(g) => Ok(g),
        None => median_heuristic_gamma(x),
    }
}

/// Cross-kernel `k(a_i, b_j)` with an already resolved `γ` (ignored for linear).
pub(crate) fn cross_kernel(a: &DataMatrix, b: &DataMatrix, kind: KernelKind, gamma: f64) -> DataMatrix {
    match kind {
        KernelKind::Linear => matmul_transb(a, b),
        KernelKind::Rbf => {
            let d = squared_distances(a, b);
            DataMatrix::from_fn(d.rows(), d.cols(), |i, j| (-gamma * d.get(i, j)).exp())
        }
    }
}

pub fn gram(x: &DataMatrix, spec: &KernelSpec) -> Result<GramMatrix> {
    spec.validate()?;
    let values = match spec.kind {
        KernelKind::Linear => cross_kernel(x, x, KernelKind::Linear, 0.0),
        KernelKind::Rbf => {
            let gamma = if x.rows() == 1 {
                spec.gamma.unwrap_or(1.0)
            } else {
                resolve_gamma(x, spec)?
            };
            let mut k = cross_kernel(x, x, KernelKind::Rbf, gamma);
            for i in 0..k.rows() {
                k.set(i, i, 1.0);
            }
            k
        }
    };
    // symmetric by construction; enforce bitwise
    let n = values.rows();
    let sym = DataMatrix::from_fn(n, n, |i, j| if i <= j { values.get(i, j) } else { values.get(j, i) });
    Ok(GramMatrix { values: sym })
}

pub(crate) struct KernelGeometry<'a> {
    k: &'a DataMatrix,
    total: f64,
}

pub(crate) struct KernelBasis {
    /// `C K`, k×n.
    ck: DataMatrix,
    /// `C K Cᵀ`, k×k.
    ckc: DataMatrix,
}

impl<'a> KernelGeometry<'a> {
    pub(crate) fn new(k: &'a GramMatrix) -> Self {
        Self {
            k: k.matrix(),
            total: k.trace(),
        }
    }
}

impl Geometry for KernelGeometry<'_> {
    type Basis = KernelBasis;

    fn n(&self) -> usize {
        self.k.rows()
    }

    fn total(&self) -> f64 {
        self.total
    }

    fn dist(&self, i: usize, j: usize) -> f64 {
        (self.k.get(i, i) + self.k.get(j, j) - 2.0 * self.k.get(i, j)).max(0.0).sqrt()
    }

    fn basis(&self, c: &DataMatrix) -> KernelBasis {
        let ck = matmul_unchecked(c, self.k);
        let ckc = matmul_transb(&ck, c);
        KernelBasis { ck, ckc }
    }

    fn recon(&self, s: &DataMatrix, b: &KernelBasis) -> f64 {
        // tr(K) − 2 tr(S C K) + tr(S C K Cᵀ Sᵀ)
        let mut cross = 0.0;
        let mut quad = 0.0;
        for (i, row) in s.row_iter().enumerate() {
            for (a, &sa) in row.iter().enumerate() {
                if sa == 0.0 {
                    continue;
                }
                cross += sa * b.ck.get(a, i);
                let g_row = b.ckc.row(a);
                quad += sa * row.iter().zip(g_row).map(|(sb, g)| sb * g).sum::<f64>();
            }
        }
        self.total - 2.0 * cross + quad
    }

    fn s_curvature(&self, d: &DataMatrix, b: &KernelBasis) -> f64 {
        solver::row_quadratic(d, &b.ckc)
    }

    fn c_curvature(&self, s: &DataMatrix, d: &DataMatrix) -> f64 {
        // tr(Sᵀ S · D K Dᵀ)
        let dk = matmul_unchecked(d, self.k);
        let dkd = matmul_transb(&dk, d);
        let sts = matmul_transa(s, s);
        sts.values().iter().zip(dkd.values()).map(|(a, b)| a * b).sum()
    }

    fn c_hessian(&self, sts: &DataMatrix, v: &DataMatrix) -> DataMatrix {
        matmul_unchecked(sts, &matmul_unchecked(v, self.k)).scale(2.0)
    }

    fn grad_s(&self, s: &DataMatrix, b: &KernelBasis) -> DataMatrix {
        // 2 (S C K Cᵀ − K Cᵀ)
        let sg = matmul_unchecked(s, &b.ckc);
        DataMatrix::from_fn(s.rows(), s.cols(), |r, c| 2.0 * (sg.get(r, c) - b.ck.get(c, r)))
    }

    fn grad_c(&self, s: &DataMatrix, b: &KernelBasis) -> DataMatrix {
        // 2 (Sᵀ S C K − Sᵀ K)
        let sts = matmul_transa(s, s);
        let stsck = matmul_unchecked(&sts, &b.ck);
        let stk = matmul_transa(s, self.k);
        DataMatrix::from_fn(stk.rows(), stk.cols(), |r, c| 2.0 * (stsck.get(r, c) - stk.get(r, c)))
    }
}

/// `tr(K) − 2 tr(S C K) + tr(S C K Cᵀ Sᵀ) + λ ||Z S||²`.
pub fn kernel_objective(
    k_matrix: &GramMatrix,
    s: &DataMatrix,
    c: &DataMatrix,
    z: Option<&SensitiveEncoding>,
    lambda: f64,
) -> Result<f64> {
    check_lambda(lambda)?;
    check_factors(k_matrix.n(), s, c)?;
    check_encoding(k_matrix.n(), z)?;
    let k = k_matrix.matrix();
    let sck = matmul_unchecked(s, &matmul_unchecked(c, k));
    let cross = sck.trace();
    let quad = matmul_transb(&sck, &matmul_unchecked(s, c)).trace();
    Ok(k_matrix.trace() - 2.0 * cross + quad + penalty_value(z, s, lambda)?)
}

/// Kernel `∇_S = 2 (S C K Cᵀ − K Cᵀ + λ Zᵀ Z S)`.
pub fn kernel_grad_s(
    k_matrix: &GramMatrix,
    s: &DataMatrix,
    c: &DataMatrix,
    z: Option<&SensitiveEncoding>,
    lambda: f64,
) -> Result<DataMatrix> {
    check_lambda(lambda)?;
    check_factors(k_matrix.n(), s, c)?;
    check_encoding(k_matrix.n(), z)?;
    let geo = KernelGeometry::new(k_matrix);
    let mut g = geo.grad_s(s, &geo.basis(c));
    if let Some(z) = z {
        if lambda > 0.0 {
            PenaltyTerm::new(z, lambda).add_gradient(s, &mut g);
        }
    }
    Ok(g)
}

/// Kernel `∇_C = 2 (Sᵀ S C K − Sᵀ K)`.
pub fn kernel_grad_c(k_matrix: &GramMatrix, s: &DataMatrix, c: &DataMatrix) -> Result<DataMatrix> {
    check_factors(k_matrix.n(), s, c)?;
    let geo = KernelGeometry::new(k_matrix);
    Ok(geo.grad_c(s, &geo.basis(c)))
}

/// Fits KernelAA, or FairKernelAA when `z` is given and `λ > 0`.
///
/// Feature-space archetypes have no coordinates, so the returned model
/// carries no `archetypes`; its `C` rows weight the training points.
pub fn fit_kernel(
    k_matrix: &GramMatrix,
    config: &FitConfig,
    z: Option<&SensitiveEncoding>,
) -> Result<ArchetypalModel> {
    config.validate(k_matrix.n())?;
    check_encoding(k_matrix.n(), z)?;
    // GramMatrix values may have been built by hand through `new`
    let k_checked = GramMatrix::new(k_matrix.matrix().clone())?;
    let penalty = z.filter(|_| config.lambda > 0.0).map(|z| PenaltyTerm::new(z, config.lambda));
    let geo = KernelGeometry::new(&k_checked);
    let sol = solver::solve(&geo, config, penalty.as_ref());
    let final_penalty = match z {
        Some(z) => fairness_penalty(z, &sol.s)?,
        None => 0.0,
    };
    Ok(ArchetypalModel::from_solution(sol, None, final_penalty, config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::two_class_toy;
    use crate::fairness::{encode_two_group, GroupLabels};
    use crate::linalg::{matmul, Rng};
    use crate::model::{fit, objective};
    use nalgebra::DMatrix;

    fn random_simplex_rows(rows: usize, cols: usize, rng: &mut Rng) -> DataMatrix {
        let raw = DataMatrix::from_fn(rows, cols, |_, _| rng.uniform() + 1e-3);
        DataMatrix::from_fn(rows, cols, |r, c| raw.get(r, c) / raw.row(r).iter().sum::<f64>())
    }

    #[test]
    fn linear_gram_examples() {
        let eye = DataMatrix::identity(2);
        let k = gram(&eye, &KernelSpec::linear()).unwrap();
        assert_eq!(k.matrix(), &eye);

        let mut rng = Rng::new(3);
        let x = DataMatrix::from_fn(7, 3, |_, _| rng.uniform() - 0.5);
        let k = gram(&x, &KernelSpec::linear()).unwrap();
        let direct = matmul(&x, &x.transpose()).unwrap();
        assert!(k.matrix().sub(&direct).unwrap().values().iter().all(|v| v.abs() <= 1e-12));
        for i in 0..7 {
            let norm: f64 = x.row(i).iter().map(|v| v * v).sum();
            assert!((k.get(i, i) - norm).abs() <= 1e-14);
        }
    }

    #[test]
    fn rbf_gram_examples() {
        let pts = DataMatrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let k = gram(&pts, &KernelSpec::rbf(Some(0.5))).unwrap();
        assert!((k.get(0, 1) - (-2.0f64).exp()).abs() < 1e-15);
        assert!((k.get(0, 1) - 0.1353).abs() < 1e-4);
        assert_eq!(k.get(0, 0), 1.0);

        let mut rng = Rng::new(8);
        let x = DataMatrix::from_fn(9, 2, |_, _| rng.uniform());
        let k = gram(&x, &KernelSpec::rbf(None)).unwrap();
        assert!((0..9).all(|i| k.get(i, i) == 1.0));
        let med = median_distance(&x).unwrap();
        let d01: f64 = x.row(0).iter().zip(x.row(1)).map(|(a, b)| (a - b).powi(2)).sum();
        assert!((k.get(0, 1) - (-d01 / (2.0 * med * med)).exp()).abs() < 1e-14);
    }

    #[test]
    fn rbf_rejects_degenerate_median() {
        let dup = DataMatrix::filled(4, 2, 1.5);
        assert!(matches!(gram(&dup, &KernelSpec::rbf(None)), Err(Error::InvalidInput(_))));
        assert!(gram(&dup, &KernelSpec::rbf(Some(1.0))).is_ok());
        assert!(gram(&dup, &KernelSpec::rbf(Some(-1.0))).is_err());
    }

    #[test]
    fn rbf_gram_is_psd() {
        for seed in 0..10 {
            let mut rng = Rng::new(seed);
            let x = DataMatrix::from_fn(15, 3, |_, _| 3.0 * rng.uniform());
            let k = gram(&x, &KernelSpec::rbf(None)).unwrap();
            let m = DMatrix::from_row_slice(15, 15, k.matrix().values());
            let eig = m.symmetric_eigen();
            let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min >= -1e-8, "seed {seed}: {min}");
        }
    }

    #[test]
    fn asymmetric_gram_rejected() {
        let m = DataMatrix::from_rows(&[vec![1.0, 0.2], vec![0.3, 1.0]]).unwrap();
        assert!(matches!(GramMatrix::new(m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn kernel_objective_examples() {
        let mut rng = Rng::new(12);
        let x = DataMatrix::from_fn(6, 2, |_, _| rng.uniform());
        let k = gram(&x, &KernelSpec::rbf(None)).unwrap();
        let eye = DataMatrix::identity(6);
        assert!(kernel_objective(&k, &eye, &eye, None, 0.0).unwrap().abs() <= 1e-12);

        for seed in 0..5 {
            let mut rng = Rng::new(50 + seed);
            let x = DataMatrix::from_fn(10, 3, |_, _| rng.uniform() * 2.0 - 1.0);
            let s = random_simplex_rows(10, 3, &mut rng);
            let c = random_simplex_rows(3, 10, &mut rng);
            let z = encode_two_group(&GroupLabels::new((0..10).map(|i| i % 2).collect()).unwrap()).unwrap();
            let lin = gram(&x, &KernelSpec::linear()).unwrap();
            let via_k = kernel_objective(&lin, &s, &c, Some(&z), 1.5).unwrap();
            let via_x = objective(&x, &s, &c, Some(&z), 1.5).unwrap();
            assert!((via_k - via_x).abs() <= 1e-9 * via_x, "{via_k} vs {via_x}");

            let rbf = gram(&x, &KernelSpec::rbf(None)).unwrap();
            assert!(kernel_objective(&rbf, &s, &c, None, 0.0).unwrap() >= -1e-9);
        }
    }

    #[test]
    fn kernel_gradients_match_central_differences() {
        let h = 1e-6;
        let mut rng = Rng::new(77);
        let x = DataMatrix::from_fn(9, 2, |_, _| rng.uniform() * 2.0);
        let k = gram(&x, &KernelSpec::rbf(None)).unwrap();
        let s = random_simplex_rows(9, 3, &mut rng);
        let c = random_simplex_rows(3, 9, &mut rng);
        let z = encode_two_group(&GroupLabels::new((0..9).map(|i| i % 2).collect()).unwrap()).unwrap();
        let bump = |m: &DataMatrix, r: usize, col: usize, d: f64| {
            DataMatrix::from_fn(m.rows(), m.cols(), |i, j| m.get(i, j) + if (i, j) == (r, col) { d } else { 0.0 })
        };
        let gs = kernel_grad_s(&k, &s, &c, Some(&z), 3.0).unwrap();
        for r in 0..9 {
            for col in 0..3 {
                let fd = (kernel_objective(&k, &bump(&s, r, col, h), &c, Some(&z), 3.0).unwrap()
                    - kernel_objective(&k, &bump(&s, r, col, -h), &c, Some(&z), 3.0).unwrap())
                    / (2.0 * h);
                assert!((gs.get(r, col) - fd).abs() / fd.abs().max(1.0) <= 1e-5);
            }
        }
        let gc = kernel_grad_c(&k, &s, &c).unwrap();
        for r in 0..3 {
            for col in 0..9 {
                let fd = (kernel_objective(&k, &s, &bump(&c, r, col, h), None, 0.0).unwrap()
                    - kernel_objective(&k, &s, &bump(&c, r, col, -h), None, 0.0).unwrap())
                    / (2.0 * h);
                assert!((gc.get(r, col) - fd).abs() / fd.abs().max(1.0) <= 1e-5);
            }
        }
    }

    #[test]
    fn linear_kernel_fit_tracks_feature_fit() {
        let ds = two_class_toy(100, 6);
        let k = gram(&ds.x, &KernelSpec::linear()).unwrap();
        let cfg = FitConfig::new(3).with_seed(6);
        let a = fit(&ds.x, &cfg, None).unwrap();
        let b = fit_kernel(&k, &cfg, None).unwrap();
        assert_eq!(a.objective_trace().len(), b.objective_trace().len());
        for (u, v) in a.objective_trace().iter().zip(b.objective_trace()) {
            assert!((u - v).abs() <= 1e-8 * u.abs(), "{u} vs {v}");
        }
        assert!(b.archetypes().is_none());
        assert!(b.s().rows_on_simplex(1e-9) && b.c().rows_on_simplex(1e-9));
    }

    #[test]
    fn kernel_fit_zero_lambda_ignores_encoding() {
        let ds = two_class_toy(80, 2);
        let k = gram(&ds.x, &KernelSpec::rbf(None)).unwrap();
        let z = encode_two_group(&ds.labels[0]).unwrap();
        let cfg = FitConfig::new(4).with_seed(3);
        let a = fit_kernel(&k, &cfg, None).unwrap();
        let b = fit_kernel(&k, &cfg, Some(&z)).unwrap();
        assert_eq!(a.s(), b.s());
        assert_eq!(a.objective_trace(), b.objective_trace());
        assert!(a.objective_trace().windows(2).all(|w| w[1] <= w[0]));
        assert!(matches!(fit_kernel(&k, &FitConfig::new(81), None), Err(Error::InvalidConfig(_))));
    }
}
