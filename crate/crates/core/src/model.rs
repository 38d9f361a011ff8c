//! Archetypal analysis with an optional fairness penalty.
//!
//! Minimizes `||X − S C X||² + λ ||Z S||²` over row-stochastic `S` (n×k)
//! and `C` (k×n) by alternating projected gradient steps on `S` and `C`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fairness::{fairness_penalty, PenaltyTerm, SensitiveEncoding};
use crate::linalg::{frobenius_sq, matmul, matmul_transa, matmul_transb, matmul_unchecked, project_in_place, DataMatrix};
use crate::solver::{self, Geometry};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMethod {
    FurthestSum,
    RandomPoints,
}

/// Solver hyperparameters.
///
/// Steps are expressed relative to the data scale: the `S` step is divided
/// by the mean squared feature norm `tr(K)/n` and the `C` step by `tr(K)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub k: usize,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "defaults::max_iters")]
    pub max_iters: usize,
    /// Stop once the relative objective decrease over one outer iteration
    /// drops below this.
    #[serde(default = "defaults::tol")]
    pub tol: f64,
    #[serde(default = "defaults::step_init")]
    pub step_init: f64,
    #[serde(default = "defaults::step_grow")]
    pub step_grow: f64,
    #[serde(default = "defaults::step_shrink")]
    pub step_shrink: f64,
    #[serde(default = "defaults::max_backtracks")]
    pub max_backtracks: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::init_method")]
    pub init_method: InitMethod,
}

mod defaults {
    use super::InitMethod;

    pub fn max_iters() -> usize {
        2000
    }
    pub fn tol() -> f64 {
        1e-6
    }
    pub fn step_init() -> f64 {
        1.0
    }
    pub fn step_grow() -> f64 {
        1.1
    }
    pub fn step_shrink() -> f64 {
        0.5
    }
    pub fn max_backtracks() -> usize {
        30
    }
    pub fn init_method() -> InitMethod {
        InitMethod::FurthestSum
    }
}

impl FitConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            lambda: 0.0,
            max_iters: defaults::max_iters(),
            tol: defaults::tol(),
            step_init: defaults::step_init(),
            step_grow: defaults::step_grow(),
            step_shrink: defaults::step_shrink(),
            max_backtracks: defaults::max_backtracks(),
            seed: 0,
            init_method: defaults::init_method(),
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 || self.k > n {
            return Err(Error::config(format!("k = {} must lie in [1, {n}]", self.k)));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::config(format!("lambda = {} must be finite and >= 0", self.lambda)));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::config("tol must be positive"));
        }
        if !(self.step_init.is_finite() && self.step_init > 0.0) {
            return Err(Error::config("step_init must be positive"));
        }
        if !(self.step_grow.is_finite() && self.step_grow > 1.0) {
            return Err(Error::config("step_grow must exceed 1"));
        }
        if !(self.step_shrink > 0.0 && self.step_shrink < 1.0) {
            return Err(Error::config("step_shrink must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// A fitted decomposition. Serializes with the fixed field names
/// `s`, `c`, `archetypes`, `trace`, `config` and `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchetypalModel {
    s: DataMatrix,
    c: DataMatrix,
    /// `C X`; absent for Gram-matrix fits.
    archetypes: Option<DataMatrix>,
    #[serde(rename = "trace")]
    objective_trace: Vec<f64>,
    iters_run: usize,
    converged: bool,
    /// Set when both blocks exhausted their backtracks in one iteration.
    stalled: bool,
    final_penalty: f64,
    config: FitConfig,
    seed: u64,
}

impl ArchetypalModel {
    pub(crate) fn from_solution(
        sol: solver::Solution,
        archetypes: Option<DataMatrix>,
        final_penalty: f64,
        config: &FitConfig,
    ) -> Self {
        Self {
            s: sol.s,
            c: sol.c,
            archetypes,
            objective_trace: sol.trace,
            iters_run: sol.iters_run,
            converged: sol.converged,
            stalled: sol.stalled,
            final_penalty,
            config: config.clone(),
            seed: config.seed,
        }
    }

    pub fn s(&self) -> &DataMatrix {
        &self.s
    }

    pub fn c(&self) -> &DataMatrix {
        &self.c
    }

    pub fn archetypes(&self) -> Option<&DataMatrix> {
        self.archetypes.as_ref()
    }

    pub fn objective_trace(&self) -> &[f64] {
        &self.objective_trace
    }

    pub fn iters_run(&self) -> usize {
        self.iters_run
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn stalled(&self) -> bool {
        self.stalled
    }

    /// `||Z S||²` of the returned `S`; zero when fitted without `Z`.
    pub fn final_penalty(&self) -> f64 {
        self.final_penalty
    }

    pub fn config(&self) -> &FitConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn k(&self) -> usize {
        self.s.cols()
    }

    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the initial value")
    }

    /// Reads a model document, checking the shapes agree with each other.
    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        let (n, k) = model.s.shape();
        if model.c.shape() != (k, n) {
            return Err(Error::shape(format!(
                "S is {n}x{k} but C is {}x{}",
                model.c.rows(),
                model.c.cols()
            )));
        }
        if let Some(a) = &model.archetypes {
            if a.rows() != k {
                return Err(Error::shape(format!("{} archetypes for k = {k}", a.rows())));
            }
        }
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Reconstruction in input coordinates.
pub(crate) struct FeatureGeometry<'a> {
    x: &'a DataMatrix,
    total: f64,
}

pub(crate) struct FeatureBasis {
    /// `C X`, k×d.
    archetypes: DataMatrix,
    /// `C X Xᵀ Cᵀ`, k×k.
    gram: DataMatrix,
}

impl FeatureBasis {
    fn from_archetypes(archetypes: DataMatrix) -> Self {
        let gram = matmul_transb(&archetypes, &archetypes);
        Self { archetypes, gram }
    }
}

impl<'a> FeatureGeometry<'a> {
    pub(crate) fn new(x: &'a DataMatrix) -> Self {
        Self {
            x,
            total: frobenius_sq(x),
        }
    }
}

impl Geometry for FeatureGeometry<'_> {
    type Basis = FeatureBasis;

    fn n(&self) -> usize {
        self.x.rows()
    }

    fn total(&self) -> f64 {
        self.total
    }

    fn dist(&self, i: usize, j: usize) -> f64 {
        self.x
            .row(i)
            .iter()
            .zip(self.x.row(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    fn basis(&self, c: &DataMatrix) -> FeatureBasis {
        FeatureBasis::from_archetypes(matmul_unchecked(c, self.x))
    }

    fn recon(&self, s: &DataMatrix, basis: &FeatureBasis) -> f64 {
        let fitted = matmul_unchecked(s, &basis.archetypes);
        self.x
            .values()
            .iter()
            .zip(fitted.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    fn s_curvature(&self, d: &DataMatrix, basis: &FeatureBasis) -> f64 {
        solver::row_quadratic(d, &basis.gram)
    }

    fn c_curvature(&self, s: &DataMatrix, d: &DataMatrix) -> f64 {
        frobenius_sq(&matmul_unchecked(s, &matmul_unchecked(d, self.x)))
    }

    fn c_hessian(&self, sts: &DataMatrix, v: &DataMatrix) -> DataMatrix {
        let svx = matmul_unchecked(sts, &matmul_unchecked(v, self.x));
        matmul_transb(&svx, self.x).scale(2.0)
    }

    fn grad_s(&self, s: &DataMatrix, basis: &FeatureBasis) -> DataMatrix {
        // 2 (S C X Xᵀ Cᵀ − X Xᵀ Cᵀ)
        let sg = matmul_unchecked(s, &basis.gram);
        let xa = matmul_transb(self.x, &basis.archetypes);
        DataMatrix::from_fn(s.rows(), s.cols(), |r, c| 2.0 * (sg.get(r, c) - xa.get(r, c)))
    }

    fn grad_c(&self, s: &DataMatrix, basis: &FeatureBasis) -> DataMatrix {
        // 2 (Sᵀ S C X − Sᵀ X) Xᵀ
        let sts = matmul_transa(s, s);
        let stsa = matmul_unchecked(&sts, &basis.archetypes);
        let stx = matmul_transa(s, self.x);
        let inner = DataMatrix::from_fn(stsa.rows(), stsa.cols(), |r, c| stsa.get(r, c) - stx.get(r, c));
        matmul_transb(&inner, self.x).scale(2.0)
    }
}

pub(crate) fn check_factors(n: usize, s: &DataMatrix, c: &DataMatrix) -> Result<()> {
    let k = s.cols();
    if s.rows() != n || c.shape() != (k, n) {
        return Err(Error::shape(format!(
            "expected S {n}xk and C kx{n}, got S {}x{} and C {}x{}",
            s.rows(),
            s.cols(),
            c.rows(),
            c.cols()
        )));
    }
    Ok(())
}

pub(crate) fn check_encoding(n: usize, z: Option<&SensitiveEncoding>) -> Result<()> {
    if let Some(z) = z {
        if z.n() != n {
            return Err(Error::shape(format!(
                "encoding covers {} points, data has {n}",
                z.n()
            )));
        }
    }
    Ok(())
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::config(format!("lambda = {lambda} must be finite and >= 0")));
    }
    Ok(())
}

pub(crate) fn penalty_value(z: Option<&SensitiveEncoding>, s: &DataMatrix, lambda: f64) -> Result<f64> {
    match z {
        Some(z) if lambda > 0.0 => Ok(lambda * fairness_penalty(z, s)?),
        _ => Ok(0.0),
    }
}

/// `||X − S C X||² + λ ||Z S||²`.
pub fn objective(
    x: &DataMatrix,
    s: &DataMatrix,
    c: &DataMatrix,
    z: Option<&SensitiveEncoding>,
    lambda: f64,
) -> Result<f64> {
    check_lambda(lambda)?;
    check_factors(x.rows(), s, c)?;
    check_encoding(x.rows(), z)?;
    let reconstruction = matmul(s, &matmul(c, x)?)?;
    Ok(frobenius_sq(&x.sub(&reconstruction)?) + penalty_value(z, s, lambda)?)
}

/// `∇_S = 2 (S C X Xᵀ Cᵀ − X Xᵀ Cᵀ + λ Zᵀ Z S)`.
pub fn grad_s(
    x: &DataMatrix,
    s: &DataMatrix,
    c: &DataMatrix,
    z: Option<&SensitiveEncoding>,
    lambda: f64,
) -> Result<DataMatrix> {
    check_lambda(lambda)?;
    check_factors(x.rows(), s, c)?;
    check_encoding(x.rows(), z)?;
    let geo = FeatureGeometry::new(x);
    let basis = geo.basis(c);
    let mut g = geo.grad_s(s, &basis);
    if let Some(z) = z {
        if lambda > 0.0 {
            PenaltyTerm::new(z, lambda).add_gradient(s, &mut g);
        }
    }
    Ok(g)
}

/// `∇_C = 2 (Sᵀ S C X Xᵀ − Sᵀ X Xᵀ)`; the penalty does not involve `C`.
pub fn grad_c(x: &DataMatrix, s: &DataMatrix, c: &DataMatrix) -> Result<DataMatrix> {
    check_factors(x.rows(), s, c)?;
    let geo = FeatureGeometry::new(x);
    Ok(geo.grad_c(s, &geo.basis(c)))
}

fn distinct_rows(x: &DataMatrix) -> usize {
    let mut keys: Vec<Vec<u64>> = x
        .row_iter()
        .map(|r| r.iter().map(|v| (v + 0.0).to_bits()).collect())
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

/// Fits AA (`z = None` or `λ = 0`) or FairAA.
pub fn fit(x: &DataMatrix, config: &FitConfig, z: Option<&SensitiveEncoding>) -> Result<ArchetypalModel> {
    config.validate(x.rows())?;
    check_encoding(x.rows(), z)?;
    let distinct = distinct_rows(x);
    if distinct < config.k {
        return Err(Error::input(format!(
            "{} archetypes requested but only {distinct} distinct points",
            config.k
        )));
    }
    let penalty = z.filter(|_| config.lambda > 0.0).map(|z| PenaltyTerm::new(z, config.lambda));
    let geo = FeatureGeometry::new(x);
    let sol = solver::solve(&geo, config, penalty.as_ref());
    let archetypes = matmul_unchecked(&sol.c, x);
    let final_penalty = match z {
        Some(z) => fairness_penalty(z, &sol.s)?,
        None => 0.0,
    };
    Ok(ArchetypalModel::from_solution(sol, Some(archetypes), final_penalty, config))
}

const ROW_GAP_TOL: f64 = 1e-12;

/// Coefficients of new points against the model's fixed archetypes.
///
/// Rows are independent convex problems over the simplex; each is solved
/// until its duality gap is below `1e-12` of the row scale, or for at most
/// `50 × config.max_iters` iterations.
pub fn transform(
    model: &ArchetypalModel,
    x_train: &DataMatrix,
    x_new: &DataMatrix,
    config: &FitConfig,
) -> Result<DataMatrix> {
    if x_new.cols() != x_train.cols() {
        return Err(Error::shape(format!(
            "model trained on {} features, new data has {}",
            x_train.cols(),
            x_new.cols()
        )));
    }
    check_factors(x_train.rows(), model.s(), model.c())?;
    let archetypes = match model.archetypes() {
        Some(a) => a.clone(),
        None => matmul(model.c(), x_train)?,
    };
    if archetypes.cols() != x_new.cols() {
        return Err(Error::shape("archetypes and new data disagree on feature count"));
    }
    let k = archetypes.rows();
    let gram = matmul_transb(&archetypes, &archetypes);
    // Lipschitz bound for the per-row gradient 2 (G w − b)
    let lipschitz = 2.0 * gram.trace().max(f64::MIN_POSITIVE);
    let cap = config.max_iters.max(1) * 50;
    let mut out = DataMatrix::zeros(x_new.rows(), k);
    for i in 0..x_new.rows() {
        let x = x_new.row(i);
        let b: Vec<f64> = archetypes.row_iter().map(|a| a.iter().zip(x).map(|(u, v)| u * v).sum()).collect();
        let scale = x.iter().map(|v| v * v).sum::<f64>().max(gram.trace() / k as f64).max(1e-300);
        out.row_mut(i).copy_from_slice(&solve_row(&gram, &b, lipschitz, ROW_GAP_TOL * scale, cap));
    }
    Ok(out)
}

fn row_grad(gram: &DataMatrix, b: &[f64], w: &[f64]) -> Vec<f64> {
    (0..b.len())
        .map(|r| 2.0 * (gram.row(r).iter().zip(w).map(|(g, v)| g * v).sum::<f64>() - b[r]))
        .collect()
}

/// `wᵀ G w − 2 bᵀ w`, the row objective up to the constant `||x||²`.
fn row_value(gram: &DataMatrix, b: &[f64], w: &[f64]) -> f64 {
    (0..b.len())
        .map(|r| w[r] * (gram.row(r).iter().zip(w).map(|(g, v)| g * v).sum::<f64>() - 2.0 * b[r]))
        .sum()
}

/// Accelerated projected gradient with restarts, stopped by the
/// Frank-Wolfe duality gap `gᵀw − min_j g_j`, which bounds suboptimality.
fn solve_row(gram: &DataMatrix, b: &[f64], lipschitz: f64, gap_tol: f64, cap: usize) -> Vec<f64> {
    let k = b.len();
    let mut w = vec![1.0 / k as f64; k];
    let mut y = w.clone();
    let mut t = 1.0_f64;
    let mut f = row_value(gram, b, &w);
    for _ in 0..cap {
        let g = row_grad(gram, b, &y);
        let mut next: Vec<f64> = y.iter().zip(&g).map(|(v, d)| v - d / lipschitz).collect();
        project_in_place(&mut next);
        let f_next = row_value(gram, b, &next);
        if f_next > f {
            // restart momentum from the last iterate
            y.clone_from(&w);
            t = 1.0;
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        y = next.iter().zip(&w).map(|(a, p)| a + beta * (a - p)).collect();
        w = next;
        f = f_next;
        t = t_next;
        let gw = row_grad(gram, b, &w);
        let gap = gw.iter().zip(&w).map(|(g, v)| g * v).sum::<f64>() - gw.iter().copied().fold(f64::INFINITY, f64::min);
        if gap <= gap_tol {
            break;
        }
    }
    w
}
