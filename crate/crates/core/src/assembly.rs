//! Piecewise-linear assembly of the forms entering every functional:
//! the conformal-Laplacian stiffness, the `u^p`-weighted mass, the plain mass
//! and power integrals `∫|f|^p ρ dt`.
//!
//! Weights are evaluated interpolate-then-power: `u` is interpolated linearly
//! at each quadrature point and only then raised to the exponent, which keeps
//! `B(u)` positive semi-definite for every `u ≥ 0`.

use nalgebra::{DMatrix, DVector};

use crate::field::{ConformalFactor, Field};
use crate::geometry::ModelGeometry;
use crate::mesh::Mesh;
use crate::{Error, Result};

/// Symmetric tridiagonal block; `off[i]` couples `i` and `(i + 1) mod m`
/// (so a periodic block has `m` off-diagonal entries, an open one `m - 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalBlock {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
    pub periodic: bool,
}

impl TridiagonalBlock {
    fn zeros(m: usize, periodic: bool) -> Self {
        Self { diag: vec![0.0; m], off: vec![0.0; if periodic { m } else { m - 1 }], periodic }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        let m = self.dim();
        if i == j {
            self.diag[i] += v;
        } else if j == (i + 1) % m {
            self.off[i] += v / 2.0;
        } else {
            debug_assert_eq!(i, (j + 1) % m);
            self.off[j] += v / 2.0;
        }
    }

    fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        let m = self.dim();
        for i in 0..m {
            y[i] = self.diag[i] * x[i];
        }
        for (i, &o) in self.off.iter().enumerate() {
            let j = (i + 1) % m;
            y[i] += o * x[j];
            y[j] += o * x[i];
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let m = self.dim();
        let mut d = DMatrix::from_diagonal(&DVector::from_column_slice(&self.diag));
        for (i, &o) in self.off.iter().enumerate() {
            let j = (i + 1) % m;
            d[(i, j)] += o;
            d[(j, i)] += o;
        }
        d
    }
}

/// Block-diagonal matrix with one tridiagonal block per component. Entries
/// coupling different components do not exist in this representation.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTridiagonal {
    pub blocks: Vec<TridiagonalBlock>,
    offsets: Vec<usize>,
}

impl BlockTridiagonal {
    fn zeros(mesh: &Mesh) -> Self {
        let blocks = mesh.components.iter().map(|c| TridiagonalBlock::zeros(c.dofs(), c.periodic)).collect();
        let offsets = (0..=mesh.components.len()).map(|c| if c == 0 { 0 } else { mesh.range(c - 1).end }).collect();
        Self { blocks, offsets }
    }

    pub fn from_blocks(blocks: Vec<TridiagonalBlock>) -> Self {
        let mut offsets = vec![0];
        for b in &blocks {
            offsets.push(offsets[offsets.len() - 1] + b.dim());
        }
        Self { blocks, offsets }
    }

    pub fn dim(&self) -> usize {
        self.offsets[self.offsets.len() - 1]
    }

    pub fn block_range(&self, b: usize) -> std::ops::Range<usize> {
        self.offsets[b]..self.offsets[b + 1]
    }

    pub fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.dim());
        for (b, blk) in self.blocks.iter().enumerate() {
            let r = self.block_range(b);
            blk.matvec_into(&x.as_slice()[r.clone()], &mut y.as_mut_slice()[r]);
        }
        y
    }

    pub fn bilinear(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        x.dot(&self.matvec(y))
    }

    pub fn quadratic(&self, x: &DVector<f64>) -> f64 {
        self.bilinear(x, x)
    }

    pub fn scaled(&self, c: f64) -> Self {
        let blocks = self
            .blocks
            .iter()
            .map(|b| TridiagonalBlock {
                diag: b.diag.iter().map(|v| v * c).collect(),
                off: b.off.iter().map(|v| v * c).collect(),
                periodic: b.periodic,
            })
            .collect();
        Self { blocks, offsets: self.offsets.clone() }
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| {
                let m = b.dim();
                (0..m).map(move |i| {
                    let left = if i > 0 { b.off[i - 1].abs() } else if b.periodic { b.off[m - 1].abs() } else { 0.0 };
                    let right = if i + 1 < m || b.periodic { b.off[i % b.off.len().max(1)].abs() } else { 0.0 };
                    b.diag[i].abs() + left + right
                })
            })
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut d = DMatrix::zeros(n, n);
        for (b, blk) in self.blocks.iter().enumerate() {
            let r = self.block_range(b);
            d.view_mut((r.start, r.start), (r.len(), r.len())).copy_from(&blk.to_dense());
        }
        d
    }
}

/// Stiffness, weighted mass, plain mass and volume for one conformal factor.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledForms {
    pub stiffness: BlockTridiagonal,
    pub weighted_mass: BlockTridiagonal,
    pub plain_mass: BlockTridiagonal,
    pub volume: f64,
}

#[derive(Debug, Clone, Copy)]
struct QuadPoint {
    block: usize,
    i: usize,
    j: usize,
    phi_i: f64,
    phi_j: f64,
    /// quadrature weight times density
    weight: f64,
    /// 1/h of the element
    inv_h: f64,
}

/// Geometry plus mesh with precomputed quadrature data; every assembly
/// routine goes through here.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub geom: ModelGeometry,
    pub mesh: Mesh,
    points: Vec<QuadPoint>,
    offsets: Vec<usize>,
    stiffness: BlockTridiagonal,
    plain_mass: BlockTridiagonal,
}

impl Discretization {
    pub fn new(geom: &ModelGeometry, mesh: &Mesh) -> Result<Self> {
        if mesh.components.len() != geom.components.len() {
            return Err(Error::InvalidMesh("mesh and geometry have different component counts".into()));
        }
        let q = &mesh.quadrature;
        let mut points = Vec::new();
        for (c, (cm, comp)) in mesh.components.iter().zip(&geom.components).enumerate() {
            for e in 0..cm.elements() {
                let (a, b) = (cm.nodes[e], cm.nodes[e + 1]);
                let h = b - a;
                let (i, j) = cm.element_dofs(e);
                for (xi, wq) in q.points.iter().zip(&q.weights) {
                    let x = 0.5 * (a + b) + 0.5 * h * xi;
                    points.push(QuadPoint {
                        block: c,
                        i,
                        j,
                        phi_i: (b - x) / h,
                        phi_j: (x - a) / h,
                        weight: 0.5 * h * wq * comp.density_at(x),
                        inv_h: 1.0 / h,
                    });
                }
            }
        }
        let offsets = (0..=mesh.components.len()).map(|c| if c == 0 { 0 } else { mesh.range(c - 1).end }).collect();
        let mut d = Self {
            geom: geom.clone(),
            mesh: mesh.clone(),
            points,
            offsets,
            stiffness: BlockTridiagonal::zeros(mesh),
            plain_mass: BlockTridiagonal::zeros(mesh),
        };
        d.plain_mass = d.mass_with(|_| 1.0);
        d.stiffness = d.stiffness_with(|c| geom.components[c].scalar_curvature);
        Ok(d)
    }

    pub fn dofs(&self) -> usize {
        self.mesh.dofs()
    }

    pub fn dim(&self) -> f64 {
        self.geom.consts.dim()
    }

    pub fn critical_exponent(&self) -> f64 {
        self.geom.consts.critical_exponent
    }

    /// `A_ij = Σ ∫ (c_n ρ φ_i' φ_j' + S ρ φ_i φ_j) dt`.
    pub fn stiffness(&self) -> &BlockTridiagonal {
        &self.stiffness
    }

    pub fn plain_mass(&self) -> &BlockTridiagonal {
        &self.plain_mass
    }

    /// Stiffness with the curvature term replaced by the constant `b0`.
    pub fn stiffness_with_curvature(&self, b0: f64) -> BlockTridiagonal {
        self.stiffness_with(|_| b0)
    }

    fn stiffness_with(&self, curvature: impl Fn(usize) -> f64) -> BlockTridiagonal {
        let c_n = self.geom.consts.c_n;
        let mut a = BlockTridiagonal::zeros(&self.mesh);
        for p in &self.points {
            let s = curvature(p.block);
            let blk = &mut a.blocks[p.block];
            let g = c_n * p.weight * p.inv_h * p.inv_h;
            blk.add(p.i, p.i, g + s * p.weight * p.phi_i * p.phi_i);
            blk.add(p.j, p.j, g + s * p.weight * p.phi_j * p.phi_j);
            blk.add(p.i, p.j, 2.0 * (-g + s * p.weight * p.phi_i * p.phi_j));
        }
        a
    }

    fn mass_with(&self, weight: impl Fn(&QuadPoint) -> f64) -> BlockTridiagonal {
        let mut m = BlockTridiagonal::zeros(&self.mesh);
        for p in &self.points {
            let w = weight(p) * p.weight;
            let blk = &mut m.blocks[p.block];
            blk.add(p.i, p.i, w * p.phi_i * p.phi_i);
            blk.add(p.j, p.j, w * p.phi_j * p.phi_j);
            blk.add(p.i, p.j, 2.0 * w * p.phi_i * p.phi_j);
        }
        m
    }

    #[inline]
    fn interp(&self, p: &QuadPoint, f: &DVector<f64>) -> f64 {
        let o = self.offsets[p.block];
        f[o + p.i] * p.phi_i + f[o + p.j] * p.phi_j
    }

    fn check_len(&self, f: &Field) -> Result<()> {
        if f.len() != self.dofs() {
            return Err(Error::FieldShape { expected: self.dofs(), found: f.len() });
        }
        Ok(())
    }

    /// `B_ij = ∫ ũ^p ρ φ_i φ_j dt` with `ũ` the linear interpolant of `u`.
    pub fn weighted_mass(&self, u: &Field, exponent: f64) -> Result<BlockTridiagonal> {
        self.check_len(u)?;
        if exponent < 0.0 && u.min() <= 0.0 {
            return Err(Error::SingularPower(exponent));
        }
        Ok(self.mass_with(|p| self.interp(p, &u.values).abs().powf(exponent)))
    }

    /// As [`weighted_mass`](Self::weighted_mass) with `ũ` replaced by `max(ũ, floor)`.
    pub fn weighted_mass_floored(&self, u: &Field, exponent: f64, floor: f64) -> Result<BlockTridiagonal> {
        self.check_len(u)?;
        if exponent < 0.0 && floor <= 0.0 && u.min() <= 0.0 {
            return Err(Error::SingularPower(exponent));
        }
        Ok(self.mass_with(|p| self.interp(p, &u.values).abs().max(floor).powf(exponent)))
    }

    /// `∫ |f|^p ρ dt`.
    pub fn integrate_power(&self, f: &Field, p: f64) -> f64 {
        self.points.iter().map(|q| self.interp(q, &f.values).abs().powf(p) * q.weight).sum()
    }

    /// `∫ g(f̃₁, …, f̃_k) ρ dt` for an arbitrary pointwise integrand.
    pub fn integrate_with(&self, fields: &[&Field], g: impl Fn(&[f64]) -> f64) -> f64 {
        let mut vals = vec![0.0; fields.len()];
        self.points
            .iter()
            .map(|q| {
                for (v, f) in vals.iter_mut().zip(fields) {
                    *v = self.interp(q, &f.values);
                }
                g(&vals) * q.weight
            })
            .sum()
    }

    /// Load vector `b_j = ∫ g(f̃₁, …, f̃_k) φ_j ρ dt`.
    pub fn load_vector(&self, fields: &[&Field], g: impl Fn(&[f64]) -> f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.dofs());
        let mut vals = vec![0.0; fields.len()];
        for q in &self.points {
            for (v, f) in vals.iter_mut().zip(fields) {
                *v = self.interp(q, &f.values);
            }
            let w = g(&vals) * q.weight;
            let o = self.offsets[q.block];
            out[o + q.i] += w * q.phi_i;
            out[o + q.j] += w * q.phi_j;
        }
        out
    }

    /// `∫ ũ^N ρ dt`, the volume of `u^{N-2} g`.
    pub fn volume(&self, u: &Field) -> f64 {
        self.integrate_power(u, self.critical_exponent())
    }

    /// `‖f‖_{L^N}`.
    pub fn norm_n(&self, f: &Field) -> f64 {
        let big_n = self.critical_exponent();
        self.integrate_power(f, big_n).powf(1.0 / big_n)
    }

    /// `u / (∫u^N)^{1/N}`.
    pub fn normalize_volume(&self, u: &Field) -> Result<ConformalFactor> {
        let f = ConformalFactor::new(u.clone())?;
        let norm = self.norm_n(f.field());
        if !(norm > 0.0) {
            return Err(Error::ZeroField);
        }
        Ok(ConformalFactor::normalized_unchecked(u.scaled(1.0 / norm)))
    }

    /// All forms for the conformal factor `u` with the eigenvalue weight `u^{N-2}`.
    pub fn assemble(&self, u: &Field) -> Result<AssembledForms> {
        let big_n = self.critical_exponent();
        Ok(AssembledForms {
            stiffness: self.stiffness.clone(),
            weighted_mass: self.weighted_mass(u, big_n - 2.0)?,
            plain_mass: self.plain_mass.clone(),
            volume: self.volume(u),
        })
    }

    /// Row sums of the plain mass (lumped mass), strictly positive.
    pub fn lumped_mass(&self) -> DVector<f64> {
        self.plain_mass.matvec(&DVector::from_element(self.dofs(), 1.0))
    }
}

pub fn assemble_stiffness(geom: &ModelGeometry, mesh: &Mesh) -> Result<BlockTridiagonal> {
    Ok(Discretization::new(geom, mesh)?.stiffness().clone())
}

pub fn assemble_weighted_mass(geom: &ModelGeometry, mesh: &Mesh, u: &ConformalFactor, exponent: f64) -> Result<BlockTridiagonal> {
    Discretization::new(geom, mesh)?.weighted_mass(u.field(), exponent)
}

pub fn integrate_power(geom: &ModelGeometry, mesh: &Mesh, f: &Field, p: f64) -> Result<f64> {
    Ok(Discretization::new(geom, mesh)?.integrate_power(f, p))
}

pub fn normalize_volume(geom: &ModelGeometry, mesh: &Mesh, u: &Field) -> Result<ConformalFactor> {
    Discretization::new(geom, mesh)?.normalize_volume(u)
}
