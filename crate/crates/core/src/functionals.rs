//! Scalar functionals of the conformal class: the Yamabe functional `Y`,
//! the quotient `F(u, v)`, sup over two-dimensional spans, `μ_k` estimates,
//! the Sobolev-type quotient `G` and the `λ⁺` quotient.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::assembly::{BlockTridiagonal, Discretization};
use crate::field::{ConformalFactor, Field};
use crate::pencil::{rayleigh, solve_pencil_blocks, EigenSolution, DEFAULT_DEFLATION_TOL};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MuEstimate {
    pub k: usize,
    /// `λ_k · Vol^{2/n}`
    pub value: f64,
    pub lambda_k: f64,
    pub volume: f64,
    pub deflated_rank: usize,
}

fn volume_factor(d: &Discretization, u: &Field) -> f64 {
    d.volume(u).powf(2.0 / d.dim())
}

/// `vᵀAv / (∫|v|^N)^{2/N}`.
pub fn yamabe_y(d: &Discretization, v: &Field) -> Result<f64> {
    if v.is_zero() {
        return Err(Error::ZeroField);
    }
    let norm = d.norm_n(v);
    if !(norm > 0.0) {
        return Err(Error::ZeroField);
    }
    Ok(d.stiffness().quadratic(&v.values) / (norm * norm))
}

fn quotient(d: &Discretization, a: &BlockTridiagonal, u: &ConformalFactor, v: &Field) -> Result<f64> {
    let b = d.weighted_mass(u.field(), d.critical_exponent() - 2.0)?;
    Ok(rayleigh(a, &b, v)? * volume_factor(d, u.field()))
}

/// `F(u, v) = (vᵀAv / vᵀB(u)v) · Vol(u)^{2/n}`.
pub fn f_functional(d: &Discretization, u: &ConformalFactor, v: &Field) -> Result<f64> {
    quotient(d, d.stiffness(), u, v)
}

/// `F` with the curvature term replaced by the constant `b0`.
pub fn sobolev_quotient_g(d: &Discretization, u: &ConformalFactor, v: &Field, b0: f64) -> Result<f64> {
    quotient(d, &d.stiffness_with_curvature(b0), u, v)
}

/// Largest eigenvalue of the Gram pencil `(VᵀAV, VᵀBV)`, i.e. the sup of the
/// Rayleigh quotient over `span(vs)`; errors when the `B`-Gram matrix is
/// numerically singular.
pub fn subspace_sup(a: &BlockTridiagonal, b: &BlockTridiagonal, vs: &[&Field]) -> Result<f64> {
    let k = vs.len();
    if k == 0 {
        return Err(Error::Precondition("empty span".into()));
    }
    let av: Vec<_> = vs.iter().map(|v| a.matvec(&v.values)).collect();
    let bv: Vec<_> = vs.iter().map(|v| b.matvec(&v.values)).collect();
    let ga = DMatrix::from_fn(k, k, |i, j| 0.5 * (vs[i].values.dot(&av[j]) + vs[j].values.dot(&av[i])));
    let gb = DMatrix::from_fn(k, k, |i, j| 0.5 * (vs[i].values.dot(&bv[j]) + vs[j].values.dot(&bv[i])));
    let eb = gb.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = (eb.min(), eb.max());
    if !(hi > 0.0) || lo <= DEFAULT_DEFLATION_TOL * hi {
        return Err(Error::DegenerateSpan(if hi > 0.0 { lo / hi } else { 0.0 }));
    }
    let l = gb.cholesky().ok_or(Error::DegenerateSpan(lo / hi))?.l();
    let linv = l.try_inverse().ok_or(Error::DegenerateSpan(lo / hi))?;
    let c = &linv * ga * linv.transpose();
    Ok(((&c + c.transpose()) * 0.5).symmetric_eigen().eigenvalues.max())
}

pub fn span_sup(a: &BlockTridiagonal, b: &BlockTridiagonal, v1: &Field, v2: &Field) -> Result<f64> {
    subspace_sup(a, b, &[v1, v2])
}

/// `sup_{v ∈ span(v1, v2) \ 0} F(u, v)`.
pub fn sup_over_span(d: &Discretization, u: &ConformalFactor, v1: &Field, v2: &Field) -> Result<f64> {
    let b = d.weighted_mass(u.field(), d.critical_exponent() - 2.0)?;
    Ok(span_sup(d.stiffness(), &b, v1, v2)? * volume_factor(d, u.field()))
}

/// As [`sup_over_span`] with the curvature term replaced by `b0`.
pub fn sobolev_sup_over_span(d: &Discretization, u: &ConformalFactor, v1: &Field, v2: &Field, b0: f64) -> Result<f64> {
    let b = d.weighted_mass(u.field(), d.critical_exponent() - 2.0)?;
    Ok(span_sup(&d.stiffness_with_curvature(b0), &b, v1, v2)? * volume_factor(d, u.field()))
}

/// `sup_{v ∈ span(vs) \ 0} F(u, v)`.
pub fn sup_over_subspace(d: &Discretization, u: &ConformalFactor, vs: &[&Field]) -> Result<f64> {
    let b = d.weighted_mass(u.field(), d.critical_exponent() - 2.0)?;
    Ok(subspace_sup(d.stiffness(), &b, vs)? * volume_factor(d, u.field()))
}

/// Pencil solve at `u` returning the estimate together with the eigenpairs.
pub fn mu_estimate_with_solution(d: &Discretization, u: &ConformalFactor, k: usize) -> Result<(MuEstimate, EigenSolution)> {
    if k == 0 {
        return Err(Error::Precondition("k must be at least 1".into()));
    }
    let b = d.weighted_mass(u.field(), d.critical_exponent() - 2.0)?;
    let sol = solve_pencil_blocks(d.stiffness(), &b, k, DEFAULT_DEFLATION_TOL)?;
    let volume = d.volume(u.field());
    let lambda_k = sol.eigenvalues[k - 1];
    let est = MuEstimate { k, value: lambda_k * volume.powf(2.0 / d.dim()), lambda_k, volume, deflated_rank: sol.deflated_rank };
    Ok((est, sol))
}

/// `λ_k(u) · Vol(u)^{2/n}`, an upper bound for `μ_k` within the symmetry class.
pub fn mu_estimate(d: &Discretization, u: &ConformalFactor, k: usize) -> Result<MuEstimate> {
    Ok(mu_estimate_with_solution(d, u, k)?.0)
}

/// `(∫|Lv|^{2n/(n+2)})^{(n+2)/n} / vᵀAv` with `Lv` the strong-form residual
/// `M_lumped⁻¹ A v`.
pub fn lambda_plus_quotient(d: &Discretization, v: &Field) -> Result<f64> {
    let av = d.stiffness().matvec(&v.values);
    let den = v.values.dot(&av);
    if !(den > 0.0) {
        return Err(Error::NotPositiveCone(den));
    }
    let lv = Field { values: av.component_div(&d.lumped_mass()) };
    let n = d.dim();
    let q = 2.0 * n / (n + 2.0);
    Ok(d.integrate_power(&lv, q).powf((n + 2.0) / n) / den)
}
