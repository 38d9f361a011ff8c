//! Utility and fairness metrics for a fitted decomposition: explained
//! variance, maximum mean discrepancy between group projections, and linear
//! separability measured by a cross-validated logistic regression.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fairness::{fairness_penalty, GroupLabels, SensitiveEncoding};
use crate::kernel::{cross_kernel, kernel_objective, median_heuristic_gamma, GramMatrix, KernelKind, KernelSpec};
use crate::linalg::{frobenius_sq, matmul, DataMatrix, Rng};
use crate::model::{check_factors, ArchetypalModel};

/// One row of a comparison table. Serializes flat with exactly these fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub explained_variance: f64,
    pub mmd2: f64,
    pub ls_accuracy: f64,
    pub penalty: f64,
    pub lambda: f64,
    pub k: usize,
    pub dataset_tag: String,
    pub seed: u64,
}

/// `1 − ||X − S C X||² / ||X − X̄||²`, where `X̄` repeats the mean row.
pub fn explained_variance(x: &DataMatrix, s: &DataMatrix, c: &DataMatrix) -> Result<f64> {
    check_factors(x.rows(), s, c)?;
    let n = x.rows() as f64;
    let means: Vec<f64> = (0..x.cols()).map(|j| x.column(j).iter().sum::<f64>() / n).collect();
    let total: f64 = x
        .row_iter()
        .map(|r| r.iter().zip(&means).map(|(v, m)| (v - m) * (v - m)).sum::<f64>())
        .sum();
    if total <= 0.0 {
        return Err(Error::UndefinedMetric("data has zero total variance".into()));
    }
    let residual = x.sub(&matmul(s, &matmul(c, x)?)?)?;
    Ok(1.0 - frobenius_sq(&residual) / total)
}

/// Feature-space analogue: `1 − SSE_K / tr(K_c)` with `K_c` the
/// double-centered Gram.
pub fn explained_variance_kernel(k_matrix: &GramMatrix, s: &DataMatrix, c: &DataMatrix) -> Result<f64> {
    let total = k_matrix.centered_trace();
    if total <= 1e-12 {
        return Err(Error::UndefinedMetric(format!(
            "feature-space total variance {total} is not positive"
        )));
    }
    let sse = kernel_objective(k_matrix, s, c, None, 0.0)?;
    Ok(1.0 - sse / total)
}

/// MMD estimator variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MmdEstimator {
    /// V-statistic, includes the diagonal terms; never negative for PSD kernels.
    #[default]
    Biased,
    /// U-statistic, drops the diagonal terms of the within-sample means.
    Unbiased,
}

fn mmd_gamma(a: &DataMatrix, b: &DataMatrix, spec: &KernelSpec) -> Result<f64> {
    spec.validate()?;
    match (spec.kind, spec.gamma) {
        (KernelKind::Linear, _) => Ok(0.0),
        (KernelKind::Rbf, Some(g)) => Ok(g),
        (KernelKind::Rbf, None) => {
            let mut pooled = a.values().to_vec();
            pooled.extend_from_slice(b.values());
            let pooled = DataMatrix::new(a.rows() + b.rows(), a.cols(), pooled)?;
            median_heuristic_gamma(&pooled)
        }
    }
}

/// Squared maximum mean discrepancy, biased estimator:
/// `mean(K_aa) + mean(K_bb) − 2 mean(K_ab)`.
///
/// An RBF spec without `γ` uses the median heuristic on the pooled sample.
pub fn mmd2(a: &DataMatrix, b: &DataMatrix, spec: &KernelSpec) -> Result<f64> {
    mmd2_with(a, b, spec, MmdEstimator::Biased)
}

pub fn mmd2_with(a: &DataMatrix, b: &DataMatrix, spec: &KernelSpec, estimator: MmdEstimator) -> Result<f64> {
    if a.cols() != b.cols() {
        return Err(Error::shape(format!(
            "samples have {} and {} columns",
            a.cols(),
            b.cols()
        )));
    }
    let gamma = mmd_gamma(a, b, spec)?;
    let within = |m: &DataMatrix| {
        let k = cross_kernel(m, m, spec.kind, gamma);
        let n = m.rows() as f64;
        match estimator {
            MmdEstimator::Biased => Ok(k.sum() / (n * n)),
            MmdEstimator::Unbiased if m.rows() < 2 => {
                Err(Error::input("unbiased MMD needs two points per sample"))
            }
            MmdEstimator::Unbiased => Ok((k.sum() - k.trace()) / (n * (n - 1.0))),
        }
    };
    let kaa = within(a)?;
    let kbb = within(b)?;
    let kab = cross_kernel(a, b, spec.kind, gamma).sum() / (a.rows() * b.rows()) as f64;
    Ok(kaa + kbb - 2.0 * kab)
}

/// Mean pairwise MMD² between the rows of `s` split by group.
pub fn group_mmd2(s: &DataMatrix, labels: &GroupLabels, spec: &KernelSpec, estimator: MmdEstimator) -> Result<f64> {
    if labels.len() != s.rows() {
        return Err(Error::shape(format!(
            "{} labels for {} rows",
            labels.len(),
            s.rows()
        )));
    }
    let m = labels.groups();
    if m < 2 {
        return Err(Error::input("MMD needs at least two groups"));
    }
    let parts: Vec<DataMatrix> = (0..m)
        .map(|g| s.select_rows(&labels.members(g)))
        .collect::<Result<_>>()?;
    let mut acc = 0.0;
    let mut pairs = 0;
    for i in 0..m {
        for j in (i + 1)..m {
            acc += mmd2_with(&parts[i], &parts[j], spec, estimator)?;
            pairs += 1;
        }
    }
    Ok(acc / pairs as f64)
}

/// L2-regularized logistic regression trained by gradient descent with
/// backtracking.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub l2: f64,
    pub train_iters: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticOptions {
    pub l2: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        Self {
            l2: 1e-2,
            max_iters: 5000,
            grad_tol: 1e-6,
        }
    }
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

struct LogisticProblem<'a> {
    x: &'a DataMatrix,
    rows: &'a [usize],
    y: &'a [bool],
    l2: f64,
}

impl LogisticProblem<'_> {
    /// Mean log-loss plus `l2/2 · ||w||²` (bias unpenalized). Parameters are
    /// `[w…, b]`.
    fn loss(&self, p: &[f64]) -> f64 {
        let (w, b) = p.split_at(p.len() - 1);
        let mut acc = 0.0;
        for &i in self.rows {
            let score: f64 = self.x.row(i).iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b[0];
            acc += softplus(if self.y[i] { -score } else { score });
        }
        acc / self.rows.len() as f64 + 0.5 * self.l2 * w.iter().map(|v| v * v).sum::<f64>()
    }

    fn gradient(&self, p: &[f64]) -> Vec<f64> {
        let d = p.len() - 1;
        let (w, b) = p.split_at(d);
        let mut g = vec![0.0; d + 1];
        for &i in self.rows {
            let row = self.x.row(i);
            let score: f64 = row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b[0];
            let resid = sigmoid(score) - if self.y[i] { 1.0 } else { 0.0 };
            for (gj, xj) in g.iter_mut().zip(row) {
                *gj += resid * xj;
            }
            g[d] += resid;
        }
        let n = self.rows.len() as f64;
        for (j, gj) in g.iter_mut().enumerate() {
            *gj /= n;
            if j < d {
                *gj += self.l2 * w[j];
            }
        }
        g
    }
}

impl LogisticModel {
    /// Trains on the listed rows of `x` with binary targets `y` (indexed by row).
    pub fn train(x: &DataMatrix, rows: &[usize], y: &[bool], opts: &LogisticOptions) -> Result<Self> {
        Self::train_traced(x, rows, y, opts).map(|(m, _)| m)
    }

    /// As [`train`](Self::train), also returning the loss after every step.
    pub fn train_traced(
        x: &DataMatrix,
        rows: &[usize],
        y: &[bool],
        opts: &LogisticOptions,
    ) -> Result<(Self, Vec<f64>)> {
        if rows.is_empty() {
            return Err(Error::input("no training rows"));
        }
        if y.len() != x.rows() {
            return Err(Error::shape(format!("{} targets for {} rows", y.len(), x.rows())));
        }
        if !(opts.l2.is_finite() && opts.l2 >= 0.0) {
            return Err(Error::config("l2 must be finite and >= 0"));
        }
        let problem = LogisticProblem { x, rows, y, l2: opts.l2 };
        let mut params = vec![0.0; x.cols() + 1];
        let mut loss = problem.loss(&params);
        let mut losses = vec![loss];
        let mut step = 1.0;
        let mut iters = 0;
        while iters < opts.max_iters {
            let g = problem.gradient(&params);
            let gnorm_sq: f64 = g.iter().map(|v| v * v).sum();
            if gnorm_sq.sqrt() <= opts.grad_tol {
                break;
            }
            iters += 1;
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> = params.iter().zip(&g).map(|(p, gi)| p - step * gi).collect();
                let trial_loss = problem.loss(&trial);
                if trial_loss <= loss - 0.5 * step * gnorm_sq {
                    params = trial;
                    loss = trial_loss;
                    step *= 2.0;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            losses.push(loss);
            if !accepted {
                break;
            }
        }
        let bias = params.pop().expect("bias slot");
        Ok((
            Self {
                weights: params,
                bias,
                l2: opts.l2,
                train_iters: iters,
            },
            losses,
        ))
    }

    pub fn decision(&self, row: &[f64]) -> f64 {
        row.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.bias
    }

    pub fn predict(&self, row: &[f64]) -> bool {
        self.decision(row) > 0.0
    }
}

/// Stratified fold assignment: each class is shuffled with `rng` and dealt
/// round-robin into `folds` folds.
pub fn stratified_folds(y: &[bool], folds: usize, rng: &mut Rng) -> Vec<usize> {
    let mut assignment = vec![0; y.len()];
    for class in [false, true] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        rng.shuffle(&mut idx);
        for (pos, i) in idx.into_iter().enumerate() {
            assignment[i] = pos % folds;
        }
    }
    assignment
}

/// Mean held-out accuracy of a binary logistic regression over stratified folds.
pub fn cross_validated_accuracy(
    x: &DataMatrix,
    y: &[bool],
    folds: usize,
    seed: u64,
    opts: &LogisticOptions,
) -> Result<f64> {
    if folds < 2 {
        return Err(Error::config("need at least two folds"));
    }
    let positives = y.iter().filter(|&&v| v).count();
    if positives < folds || y.len() - positives < folds {
        return Err(Error::input(format!(
            "each class needs at least {folds} members, got {positives} and {}",
            y.len() - positives
        )));
    }
    let mut rng = Rng::new(seed);
    let fold_of = stratified_folds(y, folds, &mut rng);
    let mut total = 0.0;
    for f in 0..folds {
        let train: Vec<usize> = (0..y.len()).filter(|&i| fold_of[i] != f).collect();
        let test: Vec<usize> = (0..y.len()).filter(|&i| fold_of[i] == f).collect();
        let model = LogisticModel::train(x, &train, y, opts)?;
        let correct = test.iter().filter(|&&i| model.predict(x.row(i)) == y[i]).count();
        total += correct as f64 / test.len() as f64;
    }
    Ok(total / folds as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Separability {
    /// Two groups: the CV accuracy. More groups: mean one-vs-rest accuracy.
    pub accuracy: f64,
    /// One-vs-rest accuracy per group (empty for two groups).
    pub per_group: Vec<f64>,
}

pub fn linear_separability_detailed(
    s: &DataMatrix,
    labels: &GroupLabels,
    seed: u64,
    folds: usize,
    opts: &LogisticOptions,
) -> Result<Separability> {
    if labels.len() != s.rows() {
        return Err(Error::shape(format!("{} labels for {} rows", labels.len(), s.rows())));
    }
    if labels.groups() < 2 {
        return Err(Error::input("linear separability needs at least two groups"));
    }
    if folds < 2 {
        return Err(Error::config("need at least two folds"));
    }
    if let Some((g, c)) = labels.counts().iter().enumerate().find(|(_, &c)| c < folds) {
        return Err(Error::input(format!(
            "group {g} has {c} members, fewer than {folds} folds"
        )));
    }
    if labels.groups() == 2 {
        let y: Vec<bool> = labels.labels().iter().map(|&l| l == 1).collect();
        return Ok(Separability {
            accuracy: cross_validated_accuracy(s, &y, folds, seed, opts)?,
            per_group: Vec::new(),
        });
    }
    let per_group = (0..labels.groups())
        .map(|g| {
            let y: Vec<bool> = labels.labels().iter().map(|&l| l == g).collect();
            cross_validated_accuracy(s, &y, folds, seed, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Separability {
        accuracy: per_group.iter().sum::<f64>() / per_group.len() as f64,
        per_group,
    })
}

/// Cross-validated accuracy of predicting `labels` from the rows of `s`.
pub fn linear_separability(s: &DataMatrix, labels: &GroupLabels, seed: u64, folds: usize) -> Result<f64> {
    linear_separability_detailed(s, labels, seed, folds, &LogisticOptions::default()).map(|r| r.accuracy)
}

/// Data the model was fitted on.
#[derive(Clone, Copy, Debug)]
pub enum EvalSpace<'a> {
    Data(&'a DataMatrix),
    Gram(&'a GramMatrix),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsSpec {
    pub mmd_kernel: KernelSpec,
    pub mmd_estimator: MmdEstimator,
    pub folds: usize,
    pub logistic: LogisticOptions,
}

impl Default for MetricsSpec {
    fn default() -> Self {
        Self {
            mmd_kernel: KernelSpec::rbf(None),
            mmd_estimator: MmdEstimator::Biased,
            folds: 5,
            logistic: LogisticOptions::default(),
        }
    }
}

/// Everything needed to turn a fitted model into a [`MetricsReport`].
#[derive(Clone, Copy, Debug)]
pub struct EvalInput<'a> {
    pub space: EvalSpace<'a>,
    pub model: &'a ArchetypalModel,
    pub labels: &'a GroupLabels,
    /// Encoding used for the `penalty` field; zero when absent.
    pub encoding: Option<&'a SensitiveEncoding>,
    pub spec: &'a MetricsSpec,
    pub seed: u64,
    pub dataset_tag: &'a str,
}

/// Explained variance, group MMD², separability and penalty of one model.
pub fn evaluate(input: &EvalInput<'_>) -> Result<MetricsReport> {
    evaluate_detailed(input).map(|(report, _)| report)
}

/// [`evaluate`], also returning the per-group one-vs-rest accuracies.
pub fn evaluate_detailed(input: &EvalInput<'_>) -> Result<(MetricsReport, Separability)> {
    let s = input.model.s();
    let c = input.model.c();
    let explained_variance = match input.space {
        EvalSpace::Data(x) => explained_variance(x, s, c)?,
        EvalSpace::Gram(k) => explained_variance_kernel(k, s, c)?,
    };
    let mmd2 = group_mmd2(s, input.labels, &input.spec.mmd_kernel, input.spec.mmd_estimator)?;
    let ls = linear_separability_detailed(s, input.labels, input.seed, input.spec.folds, &input.spec.logistic)?;
    let penalty = match input.encoding {
        Some(z) => fairness_penalty(z, s)?,
        None => 0.0,
    };
    let report = MetricsReport {
        explained_variance,
        mmd2,
        ls_accuracy: ls.accuracy,
        penalty,
        lambda: input.model.config().lambda,
        k: input.model.k(),
        dataset_tag: input.dataset_tag.to_string(),
        seed: input.seed,
    };
    Ok((report, ls))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::gram;

    fn random(rows: usize, cols: usize, seed: u64) -> DataMatrix {
        let mut rng = Rng::new(seed);
        DataMatrix::from_fn(rows, cols, |_, _| rng.uniform())
    }

    fn simplex_rows(rows: usize, cols: usize, seed: u64) -> DataMatrix {
        let raw = random(rows, cols, seed);
        DataMatrix::from_fn(rows, cols, |r, c| raw.get(r, c) / raw.row(r).iter().sum::<f64>())
    }

    #[test]
    fn explained_variance_examples() {
        let x = random(6, 3, 1);
        let eye = DataMatrix::identity(6);
        assert!((explained_variance(&x, &eye, &eye).unwrap() - 1.0).abs() < 1e-12);

        // S = 1-column of ones, C = uniform weights: S C X is the mean row
        let s = DataMatrix::filled(6, 1, 1.0);
        let c = DataMatrix::filled(1, 6, 1.0 / 6.0);
        assert!(explained_variance(&x, &s, &c).unwrap().abs() < 1e-12);

        let s = simplex_rows(6, 2, 2);
        let c = simplex_rows(2, 6, 3);
        let recon = matmul(&s, &matmul(&c, &x).unwrap()).unwrap();
        let sse = frobenius_sq(&x.sub(&recon).unwrap());
        let mut sst = 0.0;
        for j in 0..3 {
            let col = x.column(j);
            let m = col.iter().sum::<f64>() / 6.0;
            sst += col.iter().map(|v| (v - m).powi(2)).sum::<f64>();
        }
        assert!((explained_variance(&x, &s, &c).unwrap() - (1.0 - sse / sst)).abs() < 1e-12);

        let flat = DataMatrix::filled(4, 2, 3.0);
        let eye4 = DataMatrix::identity(4);
        assert!(matches!(explained_variance(&flat, &eye4, &eye4), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn explained_variance_row_permutation_invariant() {
        let x = random(8, 2, 4);
        let s = simplex_rows(8, 3, 5);
        let c = simplex_rows(3, 8, 6);
        let perm = [3, 7, 0, 5, 1, 6, 2, 4];
        let xp = x.select_rows(&perm).unwrap();
        let sp = s.select_rows(&perm).unwrap();
        let cp = DataMatrix::from_fn(3, 8, |r, j| c.get(r, perm[j]));
        let a = explained_variance(&x, &s, &c).unwrap();
        let b = explained_variance(&xp, &sp, &cp).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn kernel_explained_variance_examples() {
        let x = random(10, 3, 7);
        let rbf = gram(&x, &KernelSpec::rbf(None)).unwrap();
        let eye = DataMatrix::identity(10);
        assert!((explained_variance_kernel(&rbf, &eye, &eye).unwrap() - 1.0).abs() < 1e-9);

        let n = x.rows() as f64;
        let means: Vec<f64> = (0..3).map(|j| x.column(j).iter().sum::<f64>() / n).collect();
        let centered = DataMatrix::from_fn(10, 3, |r, c| x.get(r, c) - means[c]);
        let lin = gram(&centered, &KernelSpec::linear()).unwrap();
        for seed in 0..4 {
            let s = simplex_rows(10, 3, 10 + seed);
            let c = simplex_rows(3, 10, 20 + seed);
            let a = explained_variance_kernel(&lin, &s, &c).unwrap();
            let b = explained_variance(&centered, &s, &c).unwrap();
            assert!((a - b).abs() <= 1e-9);
            assert!(explained_variance_kernel(&rbf, &s, &c).unwrap() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn mmd_examples() {
        let a = random(12, 2, 8);
        assert!(mmd2(&a, &a, &KernelSpec::rbf(None)).unwrap().abs() <= 1e-12);
        assert!(mmd2(&a, &a, &KernelSpec::linear()).unwrap().abs() <= 1e-12);

        let p = DataMatrix::from_rows(&[vec![0.0, 0.0]]).unwrap();
        let q = DataMatrix::from_rows(&[vec![0.0, 2.0]]).unwrap();
        let v = mmd2(&p, &q, &KernelSpec::rbf(Some(0.5))).unwrap();
        assert!((v - (2.0 - 2.0 * (-2.0f64).exp())).abs() < 1e-15);
        assert!((v - 1.7293).abs() < 1e-4);

        assert!(matches!(
            mmd2(&a, &random(3, 3, 1), &KernelSpec::linear()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn mmd_matches_naive_double_loop() {
        let a = random(9, 3, 30);
        let b = DataMatrix::from_fn(7, 3, |r, c| random(7, 3, 31).get(r, c) + 0.3);
        let gamma = 0.8;
        let k = |u: &[f64], v: &[f64]| (-gamma * u.iter().zip(v).map(|(x, y)| (x - y).powi(2)).sum::<f64>()).exp();
        let mean_k = |p: &DataMatrix, q: &DataMatrix| {
            let mut acc = 0.0;
            for i in 0..p.rows() {
                for j in 0..q.rows() {
                    acc += k(p.row(i), q.row(j));
                }
            }
            acc / (p.rows() * q.rows()) as f64
        };
        let naive = mean_k(&a, &a) + mean_k(&b, &b) - 2.0 * mean_k(&a, &b);
        let fast = mmd2(&a, &b, &KernelSpec::rbf(Some(gamma))).unwrap();
        assert!((naive - fast).abs() <= 1e-10);
        let swapped = mmd2(&b, &a, &KernelSpec::rbf(Some(gamma))).unwrap();
        assert!((fast - swapped).abs() <= 1e-12);

        let unbiased = mmd2_with(&a, &b, &KernelSpec::rbf(Some(gamma)), MmdEstimator::Unbiased).unwrap();
        assert!(unbiased < fast);
    }

    #[test]
    fn logistic_loss_is_monotone() {
        let x = random(60, 3, 40);
        let y: Vec<bool> = (0..60).map(|i| x.get(i, 0) + 0.3 * x.get(i, 1) > 0.6).collect();
        let rows: Vec<usize> = (0..60).collect();
        let (model, losses) = LogisticModel::train_traced(&x, &rows, &y, &LogisticOptions::default()).unwrap();
        assert!(losses.windows(2).all(|w| w[1] <= w[0]));
        assert!(model.weights.iter().all(|w| w.is_finite()) && model.bias.is_finite());
        assert!(model.train_iters > 0);
    }

    #[test]
    fn separability_extremes() {
        let n = 200;
        let labels = GroupLabels::new((0..n).map(|i| i % 2).collect()).unwrap();
        let s = DataMatrix::from_fn(n, 3, |r, _| (r % 2) as f64);
        assert!(linear_separability(&s, &labels, 1, 5).unwrap() >= 0.95);

        let constant = GroupLabels::new(vec![0; n]).unwrap();
        assert!(matches!(linear_separability(&s, &constant, 1, 5), Err(Error::InvalidInput(_))));

        let tiny = GroupLabels::new(vec![0, 0, 0, 0, 0, 0, 1, 1]).unwrap();
        assert!(matches!(
            linear_separability(&random(8, 2, 1), &tiny, 1, 5),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn separability_near_chance_for_noise() {
        let n = 400;
        let labels = GroupLabels::new((0..n).map(|i| i % 2).collect()).unwrap();
        for seed in 0..5 {
            let s = random(n, 3, 1000 + seed);
            let acc = linear_separability(&s, &labels, seed, 5).unwrap();
            assert!((0.4..=0.6).contains(&acc), "seed {seed}: {acc}");
            assert_eq!(acc, linear_separability(&s, &labels, seed, 5).unwrap());
        }
    }

    #[test]
    fn multi_group_separability_reports_each_group() {
        let n = 120;
        let labels = GroupLabels::new((0..n).map(|i| i % 3).collect()).unwrap();
        let s = DataMatrix::from_fn(n, 3, |r, c| if r % 3 == c { 1.0 } else { 0.0 });
        let res = linear_separability_detailed(&s, &labels, 2, 5, &LogisticOptions::default()).unwrap();
        assert_eq!(res.per_group.len(), 3);
        assert!(res.per_group.iter().all(|&a| a >= 0.95));
    }

    #[test]
    fn report_json_is_flat_and_round_trips() {
        let report = MetricsReport {
            explained_variance: 0.912345678901234,
            mmd2: 1e-7,
            ls_accuracy: 0.55,
            penalty: 3.25,
            lambda: 10.0,
            k: 3,
            dataset_tag: "two_class".into(),
            seed: 42,
        };
        let text = serde_json::to_string(&report).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        let keys: Vec<&String> = value.as_object().unwrap().keys().collect();
        assert_eq!(keys.len(), 8);
        assert_eq!(serde_json::from_str::<MetricsReport>(&text).unwrap(), report);
    }
}
