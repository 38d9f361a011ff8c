//! Centered sensitive-attribute encodings and the penalty `||Z S||_F²`.
//!
//! A row of `Z` is a group indicator with its mean subtracted, so `Z S = 0`
//! holds exactly when every column of `S` has the same mean in each group.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{frobenius_sq, matmul, matmul_transa, DataMatrix};

/// Dense 0-based group index per data point.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupLabels {
    labels: Vec<usize>,
    groups: usize,
}

impl GroupLabels {
    /// The group count is inferred as `max + 1`; every index below it must occur.
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        let groups = labels.iter().max().map_or(0, |m| m + 1);
        Self::with_groups(labels, groups)
    }

    pub fn with_groups(labels: Vec<usize>, groups: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::input("no labels"));
        }
        let mut counts = vec![0usize; groups];
        for &l in &labels {
            if l >= groups {
                return Err(Error::input(format!("label {l} outside [0, {groups})")));
            }
            counts[l] += 1;
        }
        if let Some(g) = counts.iter().position(|&c| c == 0) {
            return Err(Error::input(format!("group {g} has no members")));
        }
        Ok(Self { labels, groups })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.groups];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Indices of the points in group `g`, ascending.
    pub fn members(&self, g: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == g).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitiveEncoding {
    z: DataMatrix,
    group_counts: Vec<usize>,
    attribute_spans: Vec<(usize, usize)>,
}

impl SensitiveEncoding {
    /// The `m_total × n` centered matrix.
    pub fn z(&self) -> &DataMatrix {
        &self.z
    }

    /// Member count behind each row of `Z`.
    pub fn group_counts(&self) -> &[usize] {
        &self.group_counts
    }

    /// `(row offset, row count)` of each stacked attribute block.
    pub fn attribute_spans(&self) -> &[(usize, usize)] {
        &self.attribute_spans
    }

    pub fn n(&self) -> usize {
        self.z.cols()
    }

    pub fn rows(&self) -> usize {
        self.z.rows()
    }
}

fn centered_indicator(labels: &GroupLabels, group: usize) -> Vec<f64> {
    let n = labels.len() as f64;
    let count = labels.labels().iter().filter(|&&l| l == group).count() as f64;
    let mean = count / n;
    labels
        .labels()
        .iter()
        .map(|&l| if l == group { 1.0 - mean } else { -mean })
        .collect()
}

/// Single centered row `z_i − z̄` with `z_i = 1` for members of group 1.
pub fn encode_two_group(labels: &GroupLabels) -> Result<SensitiveEncoding> {
    if labels.groups() != 2 {
        return Err(Error::InvalidArity {
            expected: 2,
            found: labels.groups(),
        });
    }
    let row = centered_indicator(labels, 1);
    let counts = labels.counts();
    Ok(SensitiveEncoding {
        z: DataMatrix::new(1, labels.len(), row)?,
        group_counts: vec![counts[1]],
        attribute_spans: vec![(0, 1)],
    })
}

/// One-vs-all encoding: one centered indicator row per group.
///
/// With two groups this keeps both (mutually negated) rows, so its penalty
/// is exactly twice that of [`encode_two_group`].
pub fn encode_multi_group(labels: &GroupLabels) -> Result<SensitiveEncoding> {
    let m = labels.groups();
    if m < 2 {
        return Err(Error::input(format!("need at least two groups, found {m}")));
    }
    let counts = labels.counts();
    let mut values = Vec::with_capacity(m * labels.len());
    for g in 0..m {
        values.extend(centered_indicator(labels, g));
    }
    Ok(SensitiveEncoding {
        z: DataMatrix::new(m, labels.len(), values)?,
        group_counts: counts,
        attribute_spans: vec![(0, m)],
    })
}

/// Vertical concatenation of per-attribute encodings.
pub fn stack_attributes(encodings: &[SensitiveEncoding]) -> Result<SensitiveEncoding> {
    let first = encodings
        .first()
        .ok_or_else(|| Error::input("no encodings to stack"))?;
    let n = first.n();
    let mut values = Vec::new();
    let mut group_counts = Vec::new();
    let mut attribute_spans = Vec::new();
    let mut offset = 0;
    for enc in encodings {
        if enc.n() != n {
            return Err(Error::shape(format!(
                "encodings cover {} and {} points",
                n,
                enc.n()
            )));
        }
        values.extend_from_slice(enc.z.values());
        group_counts.extend_from_slice(&enc.group_counts);
        for &(_, len) in &enc.attribute_spans {
            attribute_spans.push((offset, len));
            offset += len;
        }
    }
    Ok(SensitiveEncoding {
        z: DataMatrix::new(offset, n, values)?,
        group_counts,
        attribute_spans,
    })
}

/// `||Z S||_F²` for an `n × k` coefficient matrix.
pub fn fairness_penalty(z: &SensitiveEncoding, s: &DataMatrix) -> Result<f64> {
    if z.n() != s.rows() {
        return Err(Error::shape(format!(
            "encoding covers {} points but S has {} rows",
            z.n(),
            s.rows()
        )));
    }
    Ok(frobenius_sq(&matmul(z.z(), s)?))
}

/// Precomputed pieces of the penalty used inside the solvers.
///
/// Holds `√λ Z` so that the penalty is `||(√λ Z) S||²` and its gradient
/// `2 λ Zᵀ Z S` is formed as `2 (√λ Z)ᵀ ((√λ Z) S)` in `O(m n k)`.
#[derive(Clone, Debug)]
pub(crate) struct PenaltyTerm {
    scaled_z: DataMatrix,
}

impl PenaltyTerm {
    pub(crate) fn new(z: &SensitiveEncoding, lambda: f64) -> Self {
        Self {
            scaled_z: z.z().scale(lambda.sqrt()),
        }
    }

    pub(crate) fn value(&self, s: &DataMatrix) -> f64 {
        frobenius_sq(&crate::linalg::matmul_unchecked(&self.scaled_z, s))
    }

    /// Adds `2 λ Zᵀ Z S` into `grad`.
    pub(crate) fn add_gradient(&self, s: &DataMatrix, grad: &mut DataMatrix) {
        let zs = crate::linalg::matmul_unchecked(&self.scaled_z, s);
        let ztzs = matmul_transa(&self.scaled_z, &zs);
        for r in 0..grad.rows() {
            for (g, v) in grad.row_mut(r).iter_mut().zip(ztzs.row(r)) {
                *g += 2.0 * v;
            }
        }
    }
}
