//! Discrete laboratory for the second Yamabe invariant.
//!
//! Profile functions on symmetry-reduced model manifolds are discretized with
//! piecewise-linear elements. The conformal eigenvalue pencil
//! `A x = λ B(u) x` (stiffness of the conformal Laplacian against the
//! `u^{N-2}`-weighted mass) is solved with rank deflation, and
//! `λ₂(u)·Vol(u)^{2/n}` is minimized over conformal factors `u ≥ 0`.
//!
//! Module map:
//! - [`constants`], [`geometry`]: dimension constants and the model-manifold catalog.
//! - [`mesh`], [`field`], [`assembly`]: finite elements, fields and assembled forms.
//! - [`pencil`]: the generalized symmetric eigensolver with deflation.
//! - [`functionals`]: Yamabe functional, `F`, span suprema, `μ_k` estimates.
//! - [`bubbles`]: concentrating test functions and their scaling laws.
//! - [`optimize`]: fixed-point and projected-gradient minimization of `μ₂`.
//! - [`inequalities`]: seeded property suites for scalar and functional inequalities.
//! - [`exec`]: sequential / rayon execution of independent work items.

// `!(x >= y)` is used on purpose so that NaN counts as a failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod bubbles;
pub mod constants;
pub mod error;
pub mod exec;
pub mod field;
pub mod functionals;
pub mod geometry;
pub mod inequalities;
pub mod mesh;
pub mod optimize;
pub mod pencil;

pub use error::{Error, Result};

/// Version string embedded in every exported artifact.
pub const VERSION: &str = concat!("mu2lab ", env!("CARGO_PKG_VERSION"));
