//! One-dimensional meshes over the components of a [`ModelGeometry`] and
//! Gauss–Legendre quadrature.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::Range;

use crate::geometry::ModelGeometry;
use crate::{Error, Result};

pub const MIN_ELEMENTS: usize = 8;
pub const DEFAULT_QUADRATURE_ORDER: usize = 6;

/// Node placement along each component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "grading", rename_all = "snake_case")]
pub enum MeshSpec {
    Uniform { elements: usize },
    /// Logarithmic refinement toward both ends: element size grows like
    /// `r + core` with the distance `r` to the nearer end.
    PoleGraded { elements: usize, core: f64 },
    /// Power-law refinement toward the midpoint `T/2`.
    CenterGraded { elements: usize, power: f64 },
}

impl MeshSpec {
    pub fn elements(&self) -> usize {
        match *self {
            MeshSpec::Uniform { elements }
            | MeshSpec::PoleGraded { elements, .. }
            | MeshSpec::CenterGraded { elements, .. } => elements,
        }
    }

    pub fn with_elements(self, elements: usize) -> Self {
        match self {
            MeshSpec::Uniform { .. } => MeshSpec::Uniform { elements },
            MeshSpec::PoleGraded { core, .. } => MeshSpec::PoleGraded { elements, core },
            MeshSpec::CenterGraded { power, .. } => MeshSpec::CenterGraded { elements, power },
        }
    }

    /// Node coordinates on `[0, length]`.
    pub fn nodes(&self, length: f64) -> Result<Vec<f64>> {
        let m = self.elements();
        if m < MIN_ELEMENTS {
            return Err(Error::InvalidMesh(format!("{m} elements, need at least {MIN_ELEMENTS}")));
        }
        let nodes = match *self {
            MeshSpec::Uniform { .. } => (0..=m).map(|i| length * i as f64 / m as f64).collect(),
            MeshSpec::PoleGraded { core, .. } => {
                if !(core > 0.0) {
                    return Err(Error::InvalidMesh(format!("grading core {core} must be positive")));
                }
                let half = length / 2.0;
                let ratio = 1.0 + half / core;
                let side = m / 2;
                let left: Vec<f64> = (0..=side)
                    .map(|i| core * (ratio.powf(i as f64 / side as f64) - 1.0))
                    .collect();
                let right_count = m - side;
                let mut nodes = left.clone();
                nodes.pop();
                // mirror image, regraded if m is odd
                let right: Vec<f64> = (0..=right_count)
                    .map(|i| length - core * (ratio.powf((right_count - i) as f64 / right_count as f64) - 1.0))
                    .collect();
                nodes.extend(right);
                nodes
            }
            MeshSpec::CenterGraded { power, .. } => {
                if !(power >= 1.0) {
                    return Err(Error::InvalidMesh(format!("grading power {power} must be >= 1")));
                }
                (0..=m)
                    .map(|i| {
                        let s = 2.0 * i as f64 / m as f64 - 1.0;
                        length / 2.0 * (1.0 + s.signum() * s.abs().powf(power))
                    })
                    .collect()
            }
        };
        let mut nodes: Vec<f64> = nodes;
        nodes[0] = 0.0;
        nodes[m] = length;
        Ok(nodes)
    }
}

/// Nodes of one component; periodic components identify the last node with
/// the first, so they carry one degree of freedom fewer.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentMesh {
    pub nodes: Vec<f64>,
    pub periodic: bool,
}

impl ComponentMesh {
    pub fn elements(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn dofs(&self) -> usize {
        if self.periodic {
            self.elements()
        } else {
            self.nodes.len()
        }
    }

    /// Degree-of-freedom indices (local) of the two ends of element `e`.
    pub fn element_dofs(&self, e: usize) -> (usize, usize) {
        let right = if self.periodic && e + 1 == self.elements() { 0 } else { e + 1 };
        (e, right)
    }

    pub fn element_size(&self, e: usize) -> f64 {
        self.nodes[e + 1] - self.nodes[e]
    }

    pub fn length(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }
}

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on `P_k` from the Chebyshev-like initial guesses.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be positive");
        let k = order;
        let mut points = vec![0.0; k];
        let mut weights = vec![0.0; k];
        for i in 0..k.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(k, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(k, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            points[i] = -x;
            points[k - 1 - i] = x;
            weights[i] = w;
            weights[k - 1 - i] = w;
        }
        Self { points, weights }
    }
}

fn legendre(k: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if k == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=k {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = k as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Mesh over every component of a geometry, plus the quadrature rule used by
/// all assembly routines.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub components: Vec<ComponentMesh>,
    pub quadrature: GaussLegendre,
    offsets: Vec<usize>,
}

impl Mesh {
    /// Same node placement on every component.
    pub fn new(geom: &ModelGeometry, spec: MeshSpec) -> Result<Self> {
        let nodes = geom
            .components
            .iter()
            .map(|c| spec.nodes(c.length))
            .collect::<Result<Vec<_>>>()?;
        Self::from_nodes(geom, nodes, DEFAULT_QUADRATURE_ORDER)
    }

    pub fn uniform(geom: &ModelGeometry, elements: usize) -> Result<Self> {
        Self::new(geom, MeshSpec::Uniform { elements })
    }

    pub fn from_nodes(geom: &ModelGeometry, nodes: Vec<Vec<f64>>, quadrature_order: usize) -> Result<Self> {
        if nodes.len() != geom.components.len() {
            return Err(Error::InvalidMesh(format!(
                "{} node lists for {} components",
                nodes.len(),
                geom.components.len()
            )));
        }
        if quadrature_order < 1 {
            return Err(Error::InvalidMesh("quadrature order must be positive".into()));
        }
        let mut components = Vec::with_capacity(nodes.len());
        for (c, (ns, comp)) in nodes.into_iter().zip(&geom.components).enumerate() {
            if ns.len() < MIN_ELEMENTS + 1 {
                return Err(Error::InvalidMesh(format!(
                    "component {c}: {} elements, need at least {MIN_ELEMENTS}",
                    ns.len().saturating_sub(1)
                )));
            }
            if ns[0] != 0.0 || (ns[ns.len() - 1] - comp.length).abs() > 1e-12 * comp.length {
                return Err(Error::InvalidMesh(format!("component {c}: nodes must span [0, {}]", comp.length)));
            }
            if ns.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidMesh(format!("component {c}: nodes not strictly increasing")));
            }
            components.push(ComponentMesh { nodes: ns, periodic: comp.is_periodic() });
        }
        let mut offsets = Vec::with_capacity(components.len() + 1);
        offsets.push(0);
        for cm in &components {
            offsets.push(offsets[offsets.len() - 1] + cm.dofs());
        }
        Ok(Self { components, quadrature: GaussLegendre::new(quadrature_order), offsets })
    }

    pub fn with_quadrature(mut self, order: usize) -> Self {
        self.quadrature = GaussLegendre::new(order);
        self
    }

    /// Total number of degrees of freedom.
    pub fn dofs(&self) -> usize {
        self.offsets[self.offsets.len() - 1]
    }

    /// Global index range of component `c`.
    pub fn range(&self, c: usize) -> Range<usize> {
        self.offsets[c]..self.offsets[c + 1]
    }

    /// `(component, t)` of every degree of freedom, in global order.
    pub fn dof_coordinates(&self) -> Vec<(usize, f64)> {
        self.components
            .iter()
            .enumerate()
            .flat_map(|(c, cm)| cm.nodes[..cm.dofs()].iter().map(move |&t| (c, t)))
            .collect()
    }
}
