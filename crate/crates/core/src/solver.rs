//! Alternating projected gradient descent shared by the feature-space and
//! Gram-matrix solvers.

use crate::fairness::PenaltyTerm;
use crate::linalg::{matmul_transa, DataMatrix, Rng};
use crate::model::{FitConfig, InitMethod};

/// The reconstruction term `||Φ − S C Φ||²` for some feature map Φ, seen
/// through whatever representation is cheapest (coordinates or a Gram matrix).
pub(crate) trait Geometry {
    /// Quantities that depend only on `C`.
    type Basis;

    fn n(&self) -> usize;

    /// `tr(Φ Φᵀ)`.
    fn total(&self) -> f64;

    /// Feature-space distance between points `i` and `j`.
    fn dist(&self, i: usize, j: usize) -> f64;

    fn basis(&self, c: &DataMatrix) -> Self::Basis;

    fn recon(&self, s: &DataMatrix, basis: &Self::Basis) -> f64;

    /// `||D C Φ||²`, the second-order change of the reconstruction when `S`
    /// moves by `D`.
    fn s_curvature(&self, d: &DataMatrix, basis: &Self::Basis) -> f64;

    /// `||S D Φ||²`, the second-order change when `C` moves by `D`.
    fn c_curvature(&self, s: &DataMatrix, d: &DataMatrix) -> f64;

    /// `2 Sᵀ S V Φ Φᵀ`, the C-block Hessian applied to `V`, given `Sᵀ S`.
    fn c_hessian(&self, sts: &DataMatrix, v: &DataMatrix) -> DataMatrix;

    /// Reconstruction part of `∇_S`.
    fn grad_s(&self, s: &DataMatrix, basis: &Self::Basis) -> DataMatrix;

    /// `∇_C`.
    fn grad_c(&self, s: &DataMatrix, basis: &Self::Basis) -> DataMatrix;
}

#[derive(Debug)]
pub(crate) struct Solution {
    pub s: DataMatrix,
    pub c: DataMatrix,
    pub trace: Vec<f64>,
    pub iters_run: usize,
    pub converged: bool,
    pub stalled: bool,
}

/// Greedy furthest-sum selection of `k` point indices.
///
/// Starts from a seeded random point, takes the point furthest from it as the
/// first pick and then repeatedly adds the point with the largest summed
/// distance to the picks so far. Ties go to the lowest index.
pub(crate) fn furthest_sum<G: Geometry>(geo: &G, k: usize, rng: &mut Rng) -> Vec<usize> {
    let n = geo.n();
    let start = rng.index(n);
    let first = argmax_unpicked(n, &[], |t| geo.dist(start, t));
    let mut picked = vec![first];
    let mut summed: Vec<f64> = (0..n).map(|t| geo.dist(first, t)).collect();
    while picked.len() < k {
        let next = argmax_unpicked(n, &picked, |t| summed[t]);
        for (t, acc) in summed.iter_mut().enumerate() {
            *acc += geo.dist(next, t);
        }
        picked.push(next);
    }
    picked
}

fn argmax_unpicked(n: usize, picked: &[usize], score: impl Fn(usize) -> f64) -> usize {
    let mut best = None::<(usize, f64)>;
    for t in (0..n).filter(|t| !picked.contains(t)) {
        let v = score(t);
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((t, v));
        }
    }
    best.map(|(t, _)| t).expect("k <= n leaves a candidate")
}

pub(crate) fn initial_c<G: Geometry>(geo: &G, cfg: &FitConfig, rng: &mut Rng) -> DataMatrix {
    let n = geo.n();
    let picks = match cfg.init_method {
        InitMethod::FurthestSum => furthest_sum(geo, cfg.k, rng),
        InitMethod::RandomPoints => {
            let mut idx: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut idx);
            idx.truncate(cfg.k);
            idx
        }
    };
    let mut c = DataMatrix::zeros(cfg.k, n);
    for (row, &i) in picks.iter().enumerate() {
        c.set(row, i, 1.0);
    }
    c
}

/// Adaptive step for one block: grow on success, shrink and retry on failure.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StepControl {
    pub step: f64,
    pub scale: f64,
    pub grow: f64,
    pub shrink: f64,
    pub max_backtracks: usize,
}

impl StepControl {
    pub(crate) fn new(cfg: &FitConfig, scale: f64) -> Self {
        Self {
            step: cfg.step_init,
            scale,
            grow: cfg.step_grow,
            shrink: cfg.step_shrink,
            max_backtracks: cfg.max_backtracks,
        }
    }

    /// Tries `x − t · grad` with `t = step / scale`, projected, until the move
    /// `D` satisfies `curvature(D) ≤ ||D||² / (2t)` and `stable(x + D, t)`.
    ///
    /// Both blocks are quadratic, so the objective changes by exactly
    /// `⟨grad, D⟩ + curvature(D)`, and for a projected step the first test
    /// implies a decrease of at least `||D||² / (2t)`. The second lets a block
    /// reject steps that are too long for directions `D` does not yet contain.
    /// Returns `None` when every backtrack failed.
    pub(crate) fn advance(
        &mut self,
        x: &DataMatrix,
        grad: &DataMatrix,
        mut curvature: impl FnMut(&DataMatrix) -> f64,
        mut stable: impl FnMut(&DataMatrix, f64) -> bool,
    ) -> Option<DataMatrix> {
        for _ in 0..=self.max_backtracks {
            let t = self.step / self.scale;
            let candidate = x.projected_step(grad, t);
            let d = DataMatrix::from_fn(x.rows(), x.cols(), |r, c| candidate.get(r, c) - x.get(r, c));
            if curvature(&d) <= dot(&d, &d) / (2.0 * t) && stable(&candidate, t) {
                self.step *= self.grow;
                return Some(candidate);
            }
            self.step *= self.shrink;
        }
        None
    }
}

/// Zeroes entries outside the free set of `at` and centers each row on it,
/// giving the tangent space of the face of simplices containing `at`.
fn to_face(v: &mut DataMatrix, at: &DataMatrix) {
    for r in 0..v.rows() {
        let free: Vec<usize> = (0..v.cols()).filter(|&j| at.get(r, j) > 0.0).collect();
        let mean = if free.len() > 1 {
            free.iter().map(|&j| v.get(r, j)).sum::<f64>() / free.len() as f64
        } else {
            0.0
        };
        for j in 0..v.cols() {
            let val = if free.len() > 1 && at.get(r, j) > 0.0 { v.get(r, j) - mean } else { 0.0 };
            v.set(r, j, val);
        }
    }
}

const FACE_POWER_ITERS: usize = 20;

/// Upper bound on `t · λ_max` over the face the C step lands on. Below 2 the
/// step is nonexpansive there; without the bound the step size climbs far
/// past it along flat directions, and perturbations in the stiff ones grow
/// until a rejection cascade, which makes the path sensitive to rounding.
const C_FACE_LIMIT: f64 = 1.9;

/// Power-iteration estimate of the largest Hessian eigenvalue on the face of
/// `at`.
pub(crate) fn face_curvature(at: &DataMatrix, hess: impl Fn(&DataMatrix) -> DataMatrix) -> f64 {
    let mut v = DataMatrix::from_fn(at.rows(), at.cols(), |r, j| ((r * 7 + j * 13) % 11) as f64 - 5.0);
    to_face(&mut v, at);
    let mut norm = dot(&v, &v).sqrt();
    if norm == 0.0 {
        return 0.0;
    }
    let mut best: f64 = 0.0;
    for _ in 0..FACE_POWER_ITERS {
        v = v.scale(1.0 / norm);
        let mut w = hess(&v);
        to_face(&mut w, at);
        best = best.max(dot(&v, &w));
        norm = dot(&w, &w).sqrt();
        if norm == 0.0 {
            break;
        }
        v = w;
    }
    best
}

fn dot(a: &DataMatrix, b: &DataMatrix) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum()
}

/// `Σ_r d_rᵀ G d_r` for a symmetric k×k `G`.
pub(crate) fn row_quadratic(d: &DataMatrix, g: &DataMatrix) -> f64 {
    let mut acc = 0.0;
    for row in d.row_iter() {
        for (a, &da) in row.iter().enumerate() {
            if da != 0.0 {
                acc += da * row.iter().zip(g.row(a)).map(|(db, v)| db * v).sum::<f64>();
            }
        }
    }
    acc
}

pub(crate) fn total_scale(total: f64) -> f64 {
    if total > 0.0 {
        total
    } else {
        1.0
    }
}

/// S-only descent with `C` (through `basis`) held fixed.
pub(crate) struct SBlock<'a, G: Geometry> {
    pub geo: &'a G,
    pub penalty: Option<&'a PenaltyTerm>,
}

impl<G: Geometry> SBlock<'_, G> {
    pub(crate) fn value(&self, s: &DataMatrix, basis: &G::Basis) -> f64 {
        let rec = self.geo.recon(s, basis);
        match self.penalty {
            Some(p) => rec + p.value(s),
            None => rec,
        }
    }

    pub(crate) fn gradient(&self, s: &DataMatrix, basis: &G::Basis) -> DataMatrix {
        let mut g = self.geo.grad_s(s, basis);
        if let Some(p) = self.penalty {
            p.add_gradient(s, &mut g);
        }
        g
    }

    pub(crate) fn step(
        &self,
        ctl: &mut StepControl,
        s: &mut DataMatrix,
        f: &mut f64,
        basis: &G::Basis,
    ) -> bool {
        let grad = self.gradient(s, basis);
        let accepted = ctl.advance(
            s,
            &grad,
            |d| {
                let rec = self.geo.s_curvature(d, basis);
                match self.penalty {
                    Some(p) => rec + p.value(d),
                    None => rec,
                }
            },
            |_, _| true,
        );
        match accepted {
            Some(next) => {
                *s = next;
                *f = self.value(s, basis);
                true
            }
            None => false,
        }
    }
}

pub(crate) fn solve<G: Geometry>(geo: &G, cfg: &FitConfig, penalty: Option<&PenaltyTerm>) -> Solution {
    let n = geo.n();
    let k = cfg.k;
    let mut rng = Rng::new(cfg.seed);
    let scale = total_scale(geo.total());

    let mut c = initial_c(geo, cfg, &mut rng);
    let mut basis = geo.basis(&c);
    let mut s = DataMatrix::filled(n, k, 1.0 / k as f64);

    let block = SBlock { geo, penalty };
    let mut f = block.value(&s, &basis);
    let mut s_ctl = StepControl::new(cfg, scale / n as f64);
    let mut c_ctl = StepControl::new(cfg, scale);
    block.step(&mut s_ctl, &mut s, &mut f, &basis);

    let mut trace = vec![f];
    let mut converged = false;
    let mut stalled = false;
    let mut iters_run = 0;

    while iters_run < cfg.max_iters {
        iters_run += 1;
        let before = f;

        let s_moved = block.step(&mut s_ctl, &mut s, &mut f, &basis);

        // the penalty does not involve C, so it stays fixed during this block
        let pen = penalty.map_or(0.0, |p| p.value(&s));
        let grad = geo.grad_c(&s, &basis);
        let sts = matmul_transa(&s, &s);
        let moved = c_ctl.advance(
            &c,
            &grad,
            |d| geo.c_curvature(&s, d),
            |next, t| t * face_curvature(next, |v| geo.c_hessian(&sts, v)) <= C_FACE_LIMIT,
        );
        let c_moved = match moved {
            Some(next) => {
                c = next;
                basis = geo.basis(&c);
                f = geo.recon(&s, &basis) + pen;
                true
            }
            None => false,
        };

        trace.push(f);
        if !s_moved && !c_moved {
            stalled = true;
            break;
        }
        if before - f <= cfg.tol * f.abs() {
            converged = true;
            break;
        }
    }

    Solution {
        s,
        c,
        trace,
        iters_run,
        converged,
        stalled,
    }
}
