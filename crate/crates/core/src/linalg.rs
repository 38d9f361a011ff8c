//! Dense row-major matrices, simplex projection and the seeded generator
//! shared by every solver in the crate.

use std::fmt;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense real matrix stored row-major.
///
/// Every entry is finite and both dimensions are at least one. The matrix
/// is never mutated through the public API once built.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl TryFrom<RawMatrix> for DataMatrix {
    type Error = Error;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        DataMatrix::new(raw.rows, raw.cols, raw.values)
    }
}

impl fmt::Debug for DataMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DataMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        write!(f, "]")
    }
}

impl DataMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::shape(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if values.len() != rows * cols {
            return Err(Error::shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!(
                "non-finite entry at ({}, {})",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("ragged rows"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// All-zero matrix. Panics on a zero dimension.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        m.values.iter_mut().for_each(|v| *v = value);
        m
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.values[i * n + i] = 1.0;
        }
        m
    }

    /// Built from a closure; the closure must return finite values.
    pub(crate) fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                values.push(f(r, c));
            }
        }
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self { rows, cols, values }
    }

    /// Unchecked constructor for crate-internal arithmetic results.
    pub(crate) fn from_raw(rows: usize, cols: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), rows * cols);
        Self { rows, cols, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    #[inline]
    pub(crate) fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub(crate) fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.cols)
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    /// Rows picked by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        if idx.is_empty() {
            return Err(Error::shape("cannot select zero rows"));
        }
        let mut values = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            if i >= self.rows {
                return Err(Error::shape(format!("row {i} out of range for {} rows", self.rows)));
            }
            values.extend_from_slice(self.row(i));
        }
        Ok(Self::from_raw(idx.len(), self.cols, values))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Elementwise `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self::from_raw(self.rows, self.cols, self.values.iter().map(|v| v * factor).collect())
    }

    /// Sum of elementwise products, `tr(selfᵀ other)`.
    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum())
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self::from_raw(
            self.rows,
            self.cols,
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        ))
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    /// `self - step * dir`, then every row projected onto the simplex.
    pub(crate) fn projected_step(&self, dir: &Self, step: f64) -> Self {
        let mut out = self.clone();
        for (o, d) in out.values.iter_mut().zip(&dir.values) {
            *o -= step * d;
        }
        for r in 0..out.rows {
            project_in_place(out.row_mut(r));
        }
        out
    }

    /// True when every row is nonnegative and sums to one within `tol`.
    pub fn rows_on_simplex(&self, tol: f64) -> bool {
        self.row_iter()
            .all(|row| row.iter().all(|&v| v >= -tol) && (row.iter().sum::<f64>() - 1.0).abs() <= tol)
    }
}

/// Matrix product `a · b`.
///
/// Accumulates in i-k-j order: for each output row, rows of `b` are added in
/// ascending `k`, so results depend only on the inputs.
pub fn matmul(a: &DataMatrix, b: &DataMatrix) -> Result<DataMatrix> {
    if a.cols != b.rows {
        return Err(Error::shape(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    Ok(matmul_unchecked(a, b))
}

pub(crate) fn matmul_unchecked(a: &DataMatrix, b: &DataMatrix) -> DataMatrix {
    let (n, m) = (a.rows, b.cols);
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let out_row = &mut out[i * m..(i + 1) * m];
        for (k, &aik) in a.row(i).iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            for (o, &bkj) in out_row.iter_mut().zip(b.row(k)) {
                *o += aik * bkj;
            }
        }
    }
    DataMatrix::from_raw(n, m, out)
}

/// `a · bᵀ` without materializing the transpose.
pub(crate) fn matmul_transb(a: &DataMatrix, b: &DataMatrix) -> DataMatrix {
    debug_assert_eq!(a.cols, b.cols);
    DataMatrix::from_fn(a.rows, b.rows, |i, j| {
        a.row(i).iter().zip(b.row(j)).map(|(x, y)| x * y).sum()
    })
}

/// `aᵀ · b` without materializing the transpose.
pub(crate) fn matmul_transa(a: &DataMatrix, b: &DataMatrix) -> DataMatrix {
    debug_assert_eq!(a.rows, b.rows);
    let (n, m) = (a.cols, b.cols);
    let mut out = vec![0.0; n * m];
    for k in 0..a.rows {
        let b_row = b.row(k);
        for (i, &aki) in a.row(k).iter().enumerate() {
            if aki == 0.0 {
                continue;
            }
            for (o, &bkj) in out[i * m..(i + 1) * m].iter_mut().zip(b_row) {
                *o += aki * bkj;
            }
        }
    }
    DataMatrix::from_raw(n, m, out)
}

/// Sum of squared entries.
pub fn frobenius_sq(a: &DataMatrix) -> f64 {
    a.values.iter().map(|v| v * v).sum()
}

/// Euclidean projection of `v` onto the probability simplex
/// `{w : w_i ≥ 0, Σ w_i = 1}`.
pub fn project_row_to_simplex(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::input("cannot project an empty vector"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::input("non-finite entry in vector to project"));
    }
    let mut w = v.to_vec();
    project_in_place(&mut w);
    Ok(w)
}

/// Sort-based projection (descending sort, threshold, clip).
///
/// Inputs already feasible up to accumulated rounding are returned as-is,
/// which makes the map idempotent bit for bit.
pub(crate) fn project_in_place(v: &mut [f64]) {
    let p = v.len();
    let slack = 4.0 * p as f64 * f64::EPSILON;
    if v.iter().all(|&x| x >= 0.0) && (v.iter().sum::<f64>() - 1.0).abs() <= slack {
        return;
    }
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

/// Seeded generator used for every random choice in the crate.
///
/// Backed by ChaCha8 (`rand_chacha`), whose output stream for a given seed
/// is fixed by its algorithm and identical on every platform.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        // 53 random mantissa bits
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0);
        rand::Rng::random_range(&mut self.inner, 0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
