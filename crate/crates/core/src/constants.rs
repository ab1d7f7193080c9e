//! Dimension-dependent constants of the Yamabe problem.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

use crate::{Error, Result};

/// Constants attached to a dimension `n ≥ 3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionConstants {
    pub n: usize,
    /// Coefficient of the Laplacian in the conformal Laplacian, `4(n-1)/(n-2)`.
    pub c_n: f64,
    /// Critical Sobolev exponent `N = 2n/(n-2)`.
    pub critical_exponent: f64,
    /// Volume of the unit round `Sⁿ`.
    pub omega_n: f64,
    /// Yamabe invariant of the round sphere, `n(n-1)·ω_n^{2/n}`.
    pub mu1_sphere: f64,
}

impl DimensionConstants {
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidDimension(n));
        }
        let nf = n as f64;
        let omega_n = sphere_volume(n);
        Ok(Self {
            n,
            c_n: 4.0 * (nf - 1.0) / (nf - 2.0),
            critical_exponent: 2.0 * nf / (nf - 2.0),
            omega_n,
            mu1_sphere: nf * (nf - 1.0) * omega_n.powf(2.0 / nf),
        })
    }

    pub fn dim(&self) -> f64 {
        self.n as f64
    }

    /// Exponent of the eigenvalue weight, `N - 2 = 4/(n-2)`.
    pub fn weight_exponent(&self) -> f64 {
        4.0 / (self.dim() - 2.0)
    }

    /// Scalar curvature of the unit round sphere, `n(n-1)`.
    pub fn sphere_curvature(&self) -> f64 {
        self.dim() * (self.dim() - 1.0)
    }

    /// `2^{2/n}·μ₁`, the lower bound for `μ₂` given a Yamabe invariant `μ₁ ≥ 0`.
    pub fn two_point_lower_bound(&self, mu1: f64) -> f64 {
        2f64.powf(2.0 / self.dim()) * mu1
    }

    /// `(μ₁^{n/2} + μ₁(Sⁿ)^{n/2})^{2/n}`, the two-bubble upper bound for `μ₂`.
    pub fn two_bubble_upper_bound(&self, mu1: f64) -> f64 {
        let h = self.dim() / 2.0;
        (mu1.max(0.0).powf(h) + self.mu1_sphere.powf(h)).powf(1.0 / h)
    }

    /// Eigenvalue of the conformal Laplacian on the round sphere for the
    /// degree-`l` spherical harmonics: `c_n·l(l+n-1) + n(n-1)`.
    pub fn sphere_eigenvalue(&self, l: usize) -> f64 {
        let l = l as f64;
        self.c_n * l * (l + self.dim() - 1.0) + self.sphere_curvature()
    }
}

/// `constants(n)`.
pub fn constants(n: usize) -> Result<DimensionConstants> {
    DimensionConstants::new(n)
}

/// Volume of the unit round `S^m` (`m ≥ 0`): `2π^{(m+1)/2} / Γ((m+1)/2)`.
pub fn sphere_volume(m: usize) -> f64 {
    let a = (m as f64 + 1.0) / 2.0;
    2.0 * PI.powf(a) / gamma(a)
}
