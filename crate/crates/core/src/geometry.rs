//! Symmetry-reduced model manifolds.
//!
//! A geometry is a list of components. Each component is an interval
//! `[0, T]` carrying a profile density `ρ(t)` (the area of the level set
//! through `t`) and a constant scalar curvature. Functions on the manifold are
//! restricted to profiles `v(t)`, so every integral reduces to
//! `∫₀^T (…) ρ(t) dt`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

use crate::constants::{sphere_volume, DimensionConstants};
use crate::{Error, Result};

/// Closed-form profile density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Density {
    /// `ρ ≡ value`.
    Constant { value: f64 },
    /// `ρ(t) = scale · sin(π t / T)^power`.
    SinePower { scale: f64, power: f64 },
}

impl Density {
    pub fn eval(&self, t: f64, length: f64) -> f64 {
        match *self {
            Density::Constant { value } => value,
            Density::SinePower { scale, power } => {
                let s = (PI * t / length).sin().max(0.0);
                scale * s.powf(power)
            }
        }
    }

    /// `∫₀^T ρ dt` in closed form.
    pub fn integral(&self, length: f64) -> f64 {
        match *self {
            Density::Constant { value } => value * length,
            Density::SinePower { scale, power } => {
                // ∫₀^π sin^p = √π Γ((p+1)/2) / Γ(p/2 + 1)
                let wallis = PI.sqrt() * gamma((power + 1.0) / 2.0) / gamma(power / 2.0 + 1.0);
                scale * length / PI * wallis
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndCondition {
    /// `ρ → 0` at both ends (sphere-like poles); natural boundary treatment.
    DensityVanishing,
    /// `t = 0` and `t = T` are identified (circle-like).
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub length: f64,
    pub density: Density,
    pub scalar_curvature: f64,
    pub end: EndCondition,
}

impl Component {
    pub fn density_at(&self, t: f64) -> f64 {
        self.density.eval(t, self.length)
    }

    pub fn volume(&self) -> f64 {
        self.density.integral(self.length)
    }

    pub fn is_periodic(&self) -> bool {
        self.end == EndCondition::Periodic
    }

    /// `index`-th eigenvalue (ascending, with multiplicity) of the conformal
    /// Laplacian on profile functions of this component, when the density
    /// admits a closed form.
    pub fn zonal_eigenvalue(&self, consts: &DimensionConstants, index: usize) -> f64 {
        let i = index as f64;
        match (self.density.clone(), self.end) {
            (Density::SinePower { power, .. }, _) => {
                let k = PI / self.length;
                consts.c_n * i * (i + power) * k * k + self.scalar_curvature
            }
            (Density::Constant { .. }, _) => {
                let m = index.div_ceil(2) as f64;
                let k = 2.0 * PI * m / self.length;
                consts.c_n * k * k + self.scalar_curvature
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::InvalidGeometry(format!("interval length {} must be positive", self.length)));
        }
        if !self.scalar_curvature.is_finite() {
            return Err(Error::InvalidGeometry("scalar curvature must be finite".into()));
        }
        match (&self.density, self.end) {
            (Density::Constant { value }, EndCondition::Periodic) => {
                if !(*value > 0.0 && value.is_finite()) {
                    return Err(Error::InvalidGeometry(format!("density value {value} must be positive")));
                }
            }
            (Density::Constant { .. }, EndCondition::DensityVanishing) => {
                return Err(Error::InvalidGeometry(
                    "constant density does not vanish at the ends".into(),
                ));
            }
            (Density::SinePower { scale, power }, EndCondition::DensityVanishing) => {
                if !(*scale > 0.0 && scale.is_finite()) {
                    return Err(Error::InvalidGeometry(format!("density scale {scale} must be positive")));
                }
                if !(*power > 0.0 && power.is_finite()) {
                    return Err(Error::InvalidGeometry(format!(
                        "density power {power} must be positive for a vanishing end"
                    )));
                }
            }
            (Density::SinePower { .. }, EndCondition::Periodic) => {
                // ρ(0) = ρ(T) = 0 would pinch the circle
                return Err(Error::InvalidGeometry(
                    "periodic component needs rho(0) = rho(T) > 0".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Serializable description of a catalog geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeometrySpec {
    Sphere {
        n: usize,
        #[serde(default = "one")]
        radius: f64,
    },
    DisjointUnion {
        parts: Vec<GeometrySpec>,
    },
    Product {
        p: usize,
        q: usize,
        #[serde(default = "one")]
        radius_ratio: f64,
    },
    Synthetic {
        n: usize,
        length: f64,
        density: Density,
        scalar_curvature: f64,
        end: EndCondition,
    },
}

fn one() -> f64 {
    1.0
}

impl GeometrySpec {
    pub fn build(&self) -> Result<ModelGeometry> {
        match self {
            GeometrySpec::Sphere { n, radius } => make_sphere_with_radius(*n, *radius),
            GeometrySpec::DisjointUnion { parts } => {
                let mut it = parts.iter();
                let first = it
                    .next()
                    .ok_or_else(|| Error::InvalidGeometry("disjoint union needs at least one part".into()))?
                    .build()?;
                it.try_fold(first, |acc, p| make_disjoint_union(&acc, &p.build()?))
            }
            GeometrySpec::Product { p, q, radius_ratio } => make_product_sphere(*p, *q, *radius_ratio),
            GeometrySpec::Synthetic { n, length, density, scalar_curvature, end } => {
                make_synthetic(*n, *length, density.clone(), *scalar_curvature, *end)
            }
        }
    }
}

/// A symmetry-reduced manifold: dimension plus an ordered list of components.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGeometry {
    pub consts: DimensionConstants,
    pub components: Vec<Component>,
    pub spec: GeometrySpec,
}

impl ModelGeometry {
    pub fn n(&self) -> usize {
        self.consts.n
    }

    pub fn volume(&self) -> f64 {
        self.components.iter().map(Component::volume).sum()
    }

    pub fn is_round_sphere(&self) -> bool {
        matches!(self.spec, GeometrySpec::Sphere { .. })
    }

    /// Whether every component is a round sphere of the same dimension
    /// (so the Yamabe invariant is `μ₁(Sⁿ)`).
    pub fn is_union_of_round_spheres(&self) -> bool {
        fn rec(s: &GeometrySpec) -> bool {
            match s {
                GeometrySpec::Sphere { .. } => true,
                GeometrySpec::DisjointUnion { parts } => parts.iter().all(rec),
                _ => false,
            }
        }
        rec(&self.spec)
    }

    /// The `count` smallest eigenvalues of the conformal Laplacian on profile
    /// functions (unit weight), merged over components.
    pub fn closed_form_spectrum(&self, count: usize) -> Vec<f64> {
        let mut all: Vec<f64> = self
            .components
            .iter()
            .flat_map(|c| (0..count).map(move |i| c.zonal_eigenvalue(&self.consts, i)))
            .collect();
        all.sort_by(|a, b| a.total_cmp(b));
        all.truncate(count);
        all
    }
}

pub fn make_sphere(n: usize) -> Result<ModelGeometry> {
    make_sphere_with_radius(n, 1.0)
}

/// Round `Sⁿ` of the given radius, profiled by geodesic distance from a pole.
pub fn make_sphere_with_radius(n: usize, radius: f64) -> Result<ModelGeometry> {
    let consts = DimensionConstants::new(n)?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidGeometry(format!("radius {radius} must be positive")));
    }
    let nf = n as f64;
    let component = Component {
        length: PI * radius,
        density: Density::SinePower {
            scale: sphere_volume(n - 1) * radius.powf(nf - 1.0),
            power: nf - 1.0,
        },
        scalar_curvature: nf * (nf - 1.0) / (radius * radius),
        end: EndCondition::DensityVanishing,
    };
    Ok(ModelGeometry {
        consts,
        components: vec![component],
        spec: GeometrySpec::Sphere { n, radius },
    })
}

pub fn make_disjoint_union(g1: &ModelGeometry, g2: &ModelGeometry) -> Result<ModelGeometry> {
    if g1.n() != g2.n() {
        return Err(Error::DimensionMismatch(g1.n(), g2.n()));
    }
    let mut components = g1.components.clone();
    components.extend(g2.components.iter().cloned());
    let mut parts = match &g1.spec {
        GeometrySpec::DisjointUnion { parts } => parts.clone(),
        s => vec![s.clone()],
    };
    match &g2.spec {
        GeometrySpec::DisjointUnion { parts: p2 } => parts.extend(p2.iter().cloned()),
        s => parts.push(s.clone()),
    }
    Ok(ModelGeometry {
        consts: g1.consts,
        components,
        spec: GeometrySpec::DisjointUnion { parts },
    })
}

/// `S^p × S^q_r`, with profiles varying along the colatitude of `S^p` only.
pub fn make_product_sphere(p: usize, q: usize, radius_ratio: f64) -> Result<ModelGeometry> {
    if p < 2 || q < 2 {
        return Err(Error::InvalidGeometry(format!("product needs p >= 2 and q >= 2, got p={p}, q={q}")));
    }
    if !(radius_ratio > 0.0 && radius_ratio.is_finite()) {
        return Err(Error::InvalidGeometry(format!("radius ratio {radius_ratio} must be positive")));
    }
    let n = p + q;
    let consts = DimensionConstants::new(n)?;
    let (pf, qf, r) = (p as f64, q as f64, radius_ratio);
    let fibre = sphere_volume(q) * r.powf(qf);
    let component = Component {
        length: PI,
        density: Density::SinePower {
            scale: fibre * sphere_volume(p - 1),
            power: pf - 1.0,
        },
        scalar_curvature: pf * (pf - 1.0) + qf * (qf - 1.0) / (r * r),
        end: EndCondition::DensityVanishing,
    };
    Ok(ModelGeometry {
        consts,
        components: vec![component],
        spec: GeometrySpec::Product { p, q, radius_ratio },
    })
}

/// Arbitrary profile data; no isometric realization is claimed.
pub fn make_synthetic(
    n: usize,
    length: f64,
    density: Density,
    scalar_curvature: f64,
    end: EndCondition,
) -> Result<ModelGeometry> {
    let consts = DimensionConstants::new(n)?;
    let component = Component { length, density: density.clone(), scalar_curvature, end };
    component.validate()?;
    Ok(ModelGeometry {
        consts,
        components: vec![component],
        spec: GeometrySpec::Synthetic { n, length, density, scalar_curvature, end },
    })
}

/// Transverse volume of the standard flat `(ℝ/2πℤ)^{n-1}`.
pub fn standard_torus_fibre(n: usize) -> f64 {
    (2.0 * PI).powi(n as i32 - 1)
}

/// Band of the flat torus `(ℝ/2πℤ)ⁿ` with curvature term `scalar_curvature`
/// (0 for the genuine flat torus, negative for the synthetic demo profile).
pub fn make_torus_band(n: usize, scalar_curvature: f64) -> Result<ModelGeometry> {
    make_synthetic(
        n,
        2.0 * PI,
        Density::Constant { value: standard_torus_fibre(n) },
        scalar_curvature,
        EndCondition::Periodic,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sphere_data() {
        let s3 = make_sphere(3).unwrap();
        assert_relative_eq!(s3.volume(), 2.0 * PI * PI, max_relative = 1e-13);
        assert_eq!(make_sphere(4).unwrap().components[0].scalar_curvature, 12.0);
        let s5 = make_sphere(5).unwrap();
        assert_relative_eq!(s5.components[0].density_at(PI / 2.0), sphere_volume(4), max_relative = 1e-15);
        assert!(make_sphere(2).is_err());
    }

    #[test]
    fn disjoint_unions() {
        let s3 = make_sphere(3).unwrap();
        let u = make_disjoint_union(&s3, &s3).unwrap();
        assert_eq!(u.components.len(), 2);
        assert_relative_eq!(u.volume(), 4.0 * PI * PI, max_relative = 1e-13);
        let u3 = make_disjoint_union(&u, &s3).unwrap();
        assert_eq!(u3.components.len(), 3);
        assert!(u3.is_union_of_round_spheres());
        let s4 = make_sphere(4).unwrap();
        assert!(matches!(make_disjoint_union(&s3, &s4), Err(Error::DimensionMismatch(3, 4))));
    }

    #[test]
    fn products() {
        assert_eq!(make_product_sphere(2, 2, 1.0).unwrap().components[0].scalar_curvature, 4.0);
        let g = make_product_sphere(2, 3, 1.0).unwrap();
        assert_eq!(g.n(), 5);
        assert_eq!(g.components[0].scalar_curvature, 8.0);
        assert_relative_eq!(
            make_product_sphere(3, 2, 2.0).unwrap().components[0].scalar_curvature,
            6.5
        );
        assert!(make_product_sphere(1, 3, 1.0).is_err());
        let v = make_product_sphere(2, 2, 1.0).unwrap().volume();
        assert_relative_eq!(v, sphere_volume(2) * sphere_volume(2), max_relative = 1e-13);
    }

    #[test]
    fn synthetic_bands() {
        let flat = make_synthetic(3, 2.0 * PI, Density::Constant { value: 1.5 }, 0.0, EndCondition::Periodic).unwrap();
        assert_relative_eq!(flat.volume(), 2.0 * PI * 1.5);
        let neg = make_torus_band(3, -6.0).unwrap();
        assert_eq!(neg.components[0].scalar_curvature, -6.0);
        assert!(make_synthetic(3, 1.0, Density::Constant { value: 1.0 }, 0.0, EndCondition::DensityVanishing).is_err());
        assert!(make_synthetic(3, 1.0, Density::SinePower { scale: 1.0, power: 2.0 }, 0.0, EndCondition::Periodic).is_err());
        assert!(make_synthetic(3, -1.0, Density::Constant { value: 1.0 }, 0.0, EndCondition::Periodic).is_err());
    }

    #[test]
    fn synthetic_sphere_matches_catalog() {
        let s4 = make_sphere(4).unwrap();
        let syn = make_synthetic(
            4,
            PI,
            Density::SinePower { scale: sphere_volume(3), power: 3.0 },
            12.0,
            EndCondition::DensityVanishing,
        )
        .unwrap();
        assert_eq!(s4.components[0], syn.components[0]);
    }

    #[test]
    fn closed_form_spectra() {
        let s3 = make_sphere(3).unwrap();
        assert_eq!(s3.closed_form_spectrum(3), vec![6.0, 30.0, 70.0]);
        let u = make_disjoint_union(&s3, &s3).unwrap();
        assert_eq!(u.closed_form_spectrum(3), vec![6.0, 6.0, 30.0]);
        let band = make_torus_band(3, 0.0).unwrap();
        let sp = band.closed_form_spectrum(3);
        assert_eq!(sp[0], 0.0);
        assert_relative_eq!(sp[1], 8.0);
        assert_relative_eq!(sp[2], 8.0);
    }

    #[test]
    fn spec_round_trip() {
        let json = r#"{"kind":"disjoint_union","parts":[{"kind":"sphere","n":3},{"kind":"sphere","n":3}]}"#;
        let spec: GeometrySpec = serde_json::from_str(json).unwrap();
        let g = spec.build().unwrap();
        assert_eq!(g.components.len(), 2);
        let back: GeometrySpec = serde_json::from_str(&serde_json::to_string(&g.spec).unwrap()).unwrap();
        assert_eq!(back, g.spec);
    }
}
