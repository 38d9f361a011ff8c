//! Archetypal analysis with a fairness regularizer.
//!
//! The decomposition `X ≈ S C X` describes every point as a convex
//! combination (row of `S`) of `k` archetypes, which are themselves convex
//! combinations (rows of `C`) of the data. FairAA adds `λ ||Z S||²`, where
//! `Z` holds centered sensitive-group indicators, pushing the group means of
//! every column of `S` together so that a linear probe cannot recover group
//! membership from the projections. The kernel variants replace `X Xᵀ` with
//! an arbitrary Gram matrix.
//!
//! Modules:
//! - [`linalg`]: dense matrices, simplex projection, seeded RNG
//! - [`fairness`]: two-group, one-vs-all and stacked encodings of `Z`
//! - [`model`]: objective, gradients and the alternating solver
//! - [`kernel`]: Gram matrices and the kernelized solver
//! - [`metrics`]: explained variance, MMD², linear separability
//! - [`datagen`]: toy generators and CSV ingestion

pub mod datagen;
pub mod error;
pub mod fairness;
pub mod kernel;
pub mod linalg;
pub mod metrics;
pub mod model;
mod solver;

pub use error::{Error, Result};
pub use fairness::{encode_multi_group, encode_two_group, fairness_penalty, stack_attributes, GroupLabels, SensitiveEncoding};
pub use kernel::{fit_kernel, gram, kernel_objective, GramMatrix, KernelKind, KernelSpec};
pub use linalg::{frobenius_sq, matmul, project_row_to_simplex, DataMatrix, Rng};
pub use metrics::{evaluate, explained_variance, explained_variance_kernel, linear_separability, mmd2, MetricsReport};
pub use model::{fit, grad_c, grad_s, objective, transform, ArchetypalModel, FitConfig, InitMethod};
