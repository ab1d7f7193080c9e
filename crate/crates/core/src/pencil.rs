//! Generalized symmetric eigenproblem `A x = λ B(u) x` with a possibly
//! singular weight.
//!
//! Directions on which `B` vanishes are not simply dropped: they are
//! eliminated by minimizing the energy (a Schur complement of `A`), which is
//! what the min-max over subspaces injective on `{u > 0}` computes.
//! A dense path works on any pair of matrices; the structured path exploits
//! the tridiagonal blocks produced by the assembly.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::assembly::{BlockTridiagonal, TridiagonalBlock};
use crate::field::Field;
use crate::{Error, Result};

pub const DEFAULT_DEFLATION_TOL: f64 = 1e-10;
pub const ORTHONORMALITY_TOL: f64 = 1e-8;
pub const RESIDUAL_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenSolution {
    pub eigenvalues: Vec<f64>,
    #[serde(skip)]
    pub eigenvectors: Vec<Field>,
    pub deflated_rank: usize,
    pub b_orthonormal: bool,
}

/// A symmetric matrix that can be applied to a vector.
pub trait SymmetricForm {
    fn dim(&self) -> usize;
    fn apply(&self, x: &DVector<f64>) -> DVector<f64>;
    fn norm_inf(&self) -> f64;
}

impl SymmetricForm for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self * x
    }
    fn norm_inf(&self) -> f64 {
        self.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }
}

impl SymmetricForm for BlockTridiagonal {
    fn dim(&self) -> usize {
        BlockTridiagonal::dim(self)
    }
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self.matvec(x)
    }
    fn norm_inf(&self) -> f64 {
        BlockTridiagonal::norm_inf(self)
    }
}

impl EigenSolution {
    /// Largest relative residual `‖Ax − λBx‖ / (‖A‖ + |λ|‖B‖)` (infinity norms).
    pub fn max_residual<F: SymmetricForm>(&self, a: &F, b: &F) -> f64 {
        let (na, nb) = (a.norm_inf(), b.norm_inf());
        self.eigenvalues
            .iter()
            .zip(&self.eigenvectors)
            .map(|(&l, x)| {
                let r = a.apply(&x.values) - b.apply(&x.values) * l;
                r.amax() / (na + l.abs() * nb)
            })
            .fold(0.0, f64::max)
    }

    /// Largest deviation of the `B`-Gram matrix from the identity.
    pub fn orthonormality_error<F: SymmetricForm>(&self, b: &F) -> f64 {
        let bx: Vec<_> = self.eigenvectors.iter().map(|x| b.apply(&x.values)).collect();
        let mut err: f64 = 0.0;
        for (i, xi) in self.eigenvectors.iter().enumerate() {
            for bj in bx.iter().skip(i) {
                let target = if std::ptr::eq(bj, &bx[i]) { 1.0 } else { 0.0 };
                err = err.max((xi.values.dot(bj) - target).abs());
            }
        }
        err
    }

    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// `xᵀAx / xᵀBx`; errors when the weighted norm of `x` vanishes.
pub fn rayleigh<F: SymmetricForm>(a: &F, b: &F, x: &Field) -> Result<f64> {
    let num = x.values.dot(&a.apply(&x.values));
    let den = x.values.dot(&b.apply(&x.values));
    let scale = b.norm_inf() * x.values.norm_squared();
    if !(den > DEFAULT_DEFLATION_TOL * scale) {
        return Err(Error::DegenerateDenominator);
    }
    Ok(num / den)
}

fn fields(vectors: Vec<DVector<f64>>) -> Vec<Field> {
    vectors.into_iter().map(|values| Field { values }).collect()
}

/// Dense solver: spectral decomposition of `B`, deflation of the directions
/// with `B`-eigenvalue `≤ deflation_tol · max`, energy-minimizing elimination
/// of those directions, then a standard symmetric eigenproblem.
pub fn solve_pencil(a: &DMatrix<f64>, b: &DMatrix<f64>, k: usize, deflation_tol: f64) -> Result<EigenSolution> {
    let bmax = b.clone().symmetric_eigen().eigenvalues.amax();
    solve_dense_abs(a, b, k, deflation_tol * bmax)
}

fn solve_dense_abs(a: &DMatrix<f64>, b: &DMatrix<f64>, k: usize, threshold: f64) -> Result<EigenSolution> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(Error::DimensionMismatch(n, b.nrows()));
    }
    if k == 0 {
        return Err(Error::Precondition("k must be at least 1".into()));
    }
    let a = (a + a.transpose()) * 0.5;
    let eb = ((b + b.transpose()) * 0.5).symmetric_eigen();
    let keep: Vec<usize> = (0..n).filter(|&i| eb.eigenvalues[i] > threshold && eb.eigenvalues[i] > 0.0).collect();
    let null: Vec<usize> = (0..n).filter(|i| !keep.contains(i)).collect();
    let rank = keep.len();
    if rank < k {
        return Err(Error::RankDeficient { k, rank });
    }
    let r = eb.eigenvectors.select_columns(&keep);
    let d = DVector::from_iterator(rank, keep.iter().map(|&i| eb.eigenvalues[i]));
    let p = if null.is_empty() {
        r
    } else {
        let kk = eb.eigenvectors.select_columns(&null);
        let akk = kk.transpose() * &a * &kk;
        let akr = kk.transpose() * &a * &r;
        let z = match akk.clone().cholesky() {
            Some(ch) => -ch.solve(&akr),
            None => {
                // positive semi-definite with a kernel is still bounded
                let e = akk.symmetric_eigen();
                let scale = e.eigenvalues.amax().max(a.amax());
                if e.eigenvalues.min() < -1e-10 * scale {
                    return Err(Error::Unbounded);
                }
                let inv = DVector::from_iterator(
                    e.eigenvalues.len(),
                    e.eigenvalues.iter().map(|&l| if l > 1e-12 * scale { 1.0 / l } else { 0.0 }),
                );
                let rhs = e.eigenvectors.transpose() * &akr;
                -(&e.eigenvectors * DMatrix::from_diagonal(&inv) * rhs)
            }
        };
        r + kk * z
    };
    let x = p * DMatrix::from_diagonal(&d.map(|v| 1.0 / v.sqrt()));
    let c = x.transpose() * &a * &x;
    let ec = ((&c + c.transpose()) * 0.5).symmetric_eigen();
    let mut order: Vec<usize> = (0..rank).collect();
    order.sort_by(|&i, &j| ec.eigenvalues[i].total_cmp(&ec.eigenvalues[j]));
    let eigenvalues: Vec<f64> = order[..k].iter().map(|&i| ec.eigenvalues[i]).collect();
    let vectors: Vec<DVector<f64>> = order[..k].iter().map(|&i| &x * ec.eigenvectors.column(i)).collect();
    finish(eigenvalues, vectors, rank, b)
}

fn finish<F: SymmetricForm>(eigenvalues: Vec<f64>, vectors: Vec<DVector<f64>>, rank: usize, b: &F) -> Result<EigenSolution> {
    let mut sol = EigenSolution { eigenvalues, eigenvectors: fields(vectors), deflated_rank: rank, b_orthonormal: false };
    sol.b_orthonormal = sol.orthonormality_error(b) <= ORTHONORMALITY_TOL;
    Ok(sol)
}

/// Structured solver for block-tridiagonal pencils from the assembly.
///
/// Open blocks use Sturm counts of `A − σB` (inertia of the deflated rows
/// subtracted) with bisection, then inverse iteration; periodic blocks fall
/// back to the dense path. A row is deflated when its `B` row sum is at most
/// `deflation_tol` times the largest row sum over all blocks.
pub fn solve_pencil_blocks(a: &BlockTridiagonal, b: &BlockTridiagonal, k: usize, deflation_tol: f64) -> Result<EigenSolution> {
    if a.blocks.len() != b.blocks.len() || a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    if k == 0 {
        return Err(Error::Precondition("k must be at least 1".into()));
    }
    let threshold = deflation_tol * b.norm_inf();
    let mut pairs: Vec<(f64, DVector<f64>)> = Vec::new();
    let mut rank = 0;
    for (idx, (ab, bb)) in a.blocks.iter().zip(&b.blocks).enumerate() {
        let range = a.block_range(idx);
        let (r, block_pairs) = if ab.periodic {
            dense_block(ab, bb, k, threshold)?
        } else {
            match SturmBlock::new(ab, bb, threshold)? {
                Some(sb) => sb.solve(k)?,
                None => dense_block(ab, bb, k, threshold)?,
            }
        };
        rank += r;
        for (l, v) in block_pairs {
            let mut full = DVector::zeros(a.dim());
            full.rows_mut(range.start, range.len()).copy_from(&v);
            pairs.push((l, full));
        }
    }
    if rank < k {
        return Err(Error::RankDeficient { k, rank });
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    pairs.truncate(k);
    let (eigenvalues, vectors) = pairs.into_iter().unzip();
    finish(eigenvalues, vectors, rank, b)
}

type BlockPairs = (usize, Vec<(f64, DVector<f64>)>);

fn dense_block(a: &TridiagonalBlock, b: &TridiagonalBlock, k: usize, threshold: f64) -> Result<BlockPairs> {
    let (ad, bd) = (a.to_dense(), b.to_dense());
    let eb = bd.clone().symmetric_eigen();
    let rank = eb.eigenvalues.iter().filter(|&&l| l > threshold && l > 0.0).count();
    if rank == 0 {
        return Ok((0, Vec::new()));
    }
    let sol = solve_dense_abs(&ad, &bd, k.min(rank), threshold)?;
    Ok((rank, sol.eigenvalues.into_iter().zip(sol.eigenvectors.into_iter().map(|f| f.values)).collect()))
}

/// One open tridiagonal block with its deflated rows marked.
struct SturmBlock<'a> {
    a: &'a TridiagonalBlock,
    /// `B` with deflated rows and columns zeroed
    bdiag: Vec<f64>,
    boff: Vec<f64>,
    /// negative inertia of `A` restricted to the deflated rows
    neg_deflated: usize,
    rank: usize,
    pivmin: f64,
    scale: f64,
}

impl<'a> SturmBlock<'a> {
    /// `None` when the deflated part of `A` is singular (dense fallback).
    fn new(a: &'a TridiagonalBlock, b: &TridiagonalBlock, threshold: f64) -> Result<Option<Self>> {
        let m = a.dim();
        let row = |i: usize| {
            b.diag[i].abs() + if i > 0 { b.off[i - 1].abs() } else { 0.0 } + if i + 1 < m { b.off[i].abs() } else { 0.0 }
        };
        let keep: Vec<bool> = (0..m).map(|i| row(i) > threshold && b.diag[i] > 0.0).collect();
        let bdiag: Vec<f64> = (0..m).map(|i| if keep[i] { b.diag[i] } else { 0.0 }).collect();
        let boff: Vec<f64> = (0..m - 1).map(|i| if keep[i] && keep[i + 1] { b.off[i] } else { 0.0 }).collect();
        let rank = keep.iter().filter(|&&x| x).count();
        let scale = a.diag.iter().chain(&a.off).fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
        let pivmin = f64::MIN_POSITIVE.max(f64::EPSILON * f64::EPSILON * scale);
        // inertia of A on the deflated rows, run by run
        let mut neg = 0;
        let mut d = 0.0;
        let mut prev: Option<usize> = None;
        for i in (0..m).filter(|&i| !keep[i]) {
            d = match prev {
                Some(p) if p + 1 == i => a.diag[i] - a.off[p] * a.off[p] / d,
                _ => a.diag[i],
            };
            if d.abs() <= 1e-13 * scale {
                return Ok(None);
            }
            if d < 0.0 {
                neg += 1;
            }
            prev = Some(i);
        }
        if neg > 0 {
            return Err(Error::Unbounded);
        }
        Ok(Some(Self { a, bdiag, boff, neg_deflated: neg, rank, pivmin, scale }))
    }

    /// Number of reduced eigenvalues strictly below `sigma`.
    fn count(&self, sigma: f64) -> usize {
        let a = self.a;
        let mut neg = 0;
        let mut d = 0.0;
        for i in 0..a.dim() {
            let t = a.diag[i] - sigma * self.bdiag[i];
            d = if i == 0 {
                t
            } else {
                let o = a.off[i - 1] - sigma * self.boff[i - 1];
                t - o * o / d
            };
            if d.abs() <= self.pivmin {
                d = -self.pivmin;
            }
            if d < 0.0 {
                neg += 1;
            }
        }
        neg - self.neg_deflated
    }

    fn solve(&self, k: usize) -> Result<BlockPairs> {
        let kb = k.min(self.rank);
        if kb == 0 {
            return Ok((0, Vec::new()));
        }
        let mut lo = 0.0;
        let mut step = 1.0f64.max(self.scale * 1e-12);
        while self.count(lo) > 0 {
            lo = -step;
            step *= 2.0;
            if !step.is_finite() {
                return Err(Error::Solver("no lower bound for the spectrum".into()));
            }
        }
        let mut hi = 1.0f64;
        while self.count(hi) < kb {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::Solver("no upper bound for the spectrum".into()));
            }
        }
        let floor = 1e-15 * (hi - lo);
        let mut pairs: Vec<(f64, DVector<f64>)> = Vec::with_capacity(kb);
        for j in 1..=kb {
            // j-th eigenvalue: count(l) < j <= count(h)
            let (mut l, mut h) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (l + h);
                if h - l <= 2.0 * f64::EPSILON * l.abs().max(h.abs()) + floor || mid <= l || mid >= h {
                    break;
                }
                if self.count(mid) >= j {
                    h = mid;
                } else {
                    l = mid;
                }
            }
            let lambda = 0.5 * (l + h);
            let x = self.inverse_iteration(lambda, &pairs, j)?;
            pairs.push((lambda, x));
        }
        Ok((self.rank, pairs))
    }

    fn bmul(&self, x: &DVector<f64>) -> DVector<f64> {
        let m = x.len();
        let mut y = DVector::zeros(m);
        for i in 0..m {
            y[i] = self.bdiag[i] * x[i];
        }
        for i in 0..m - 1 {
            y[i] += self.boff[i] * x[i + 1];
            y[i + 1] += self.boff[i] * x[i];
        }
        y
    }

    fn inverse_iteration(&self, lambda: f64, previous: &[(f64, DVector<f64>)], seed: usize) -> Result<DVector<f64>> {
        let a = self.a;
        let m = a.dim();
        let diag: Vec<f64> = (0..m).map(|i| a.diag[i] - lambda * self.bdiag[i]).collect();
        let off: Vec<f64> = (0..m - 1).map(|i| a.off[i] - lambda * self.boff[i]).collect();
        let lu = TridiagonalLu::factor(&diag, &off, f64::EPSILON * self.scale);
        let cluster = 1e-7 * lambda.abs().max(1.0);
        let golden = 0.618_033_988_749_894_9;
        let mut x = DVector::from_fn(m, |i, _| 1.0 + 0.5 * ((i + 1) as f64 * golden * (seed as f64 + 1.0)).fract());
        let anorm = a.diag.iter().map(|v| v.abs()).fold(0.0, f64::max) * 3.0;
        let bnorm = self.bdiag.iter().map(|v| v.abs()).fold(0.0, f64::max) * 3.0;
        for _ in 0..8 {
            let mut rhs = self.bmul(&x);
            lu.solve(rhs.as_mut_slice());
            x = rhs;
            for (mu, v) in previous {
                if (mu - lambda).abs() <= cluster {
                    let c = v.dot(&self.bmul(&x));
                    x -= v * c;
                }
            }
            let nrm = x.dot(&self.bmul(&x));
            if !(nrm > 0.0) || !nrm.is_finite() {
                return Err(Error::Solver("inverse iteration lost the weighted norm".into()));
            }
            x /= nrm.sqrt();
            // residual of the full (undeflated-row) system
            let mut r = DVector::zeros(m);
            for i in 0..m {
                r[i] = diag[i] * x[i];
            }
            for i in 0..m - 1 {
                r[i] += off[i] * x[i + 1];
                r[i + 1] += off[i] * x[i];
            }
            if r.amax() <= 1e-12 * (anorm + lambda.abs() * bnorm) * x.amax() {
                break;
            }
        }
        Ok(x)
    }
}

/// LU factorization with partial pivoting of a symmetric tridiagonal matrix.
struct TridiagonalLu {
    d: Vec<f64>,
    dl: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swap: Vec<bool>,
}

impl TridiagonalLu {
    fn factor(diag: &[f64], off: &[f64], tiny: f64) -> Self {
        let n = diag.len();
        let tiny = tiny.max(f64::MIN_POSITIVE);
        let mut d = diag.to_vec();
        let mut dl = off.to_vec();
        let mut du = off.to_vec();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swap = vec![false; n.saturating_sub(1)];
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i].abs() < tiny {
                    d[i] = tiny;
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swap[i] = true;
            }
        }
        if d[n - 1].abs() < tiny {
            d[n - 1] = tiny;
        }
        Self { d, dl, du, du2, swap }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n - 1 {
            if self.swap[i] {
                let t = b[i];
                b[i] = b[i + 1];
                b[i + 1] = t - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::Discretization;
    use crate::geometry::{make_disjoint_union, make_sphere, make_torus_band};
    use crate::mesh::{Mesh, MeshSpec};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn sphere(m: usize) -> Discretization {
        let g = make_sphere(3).unwrap();
        Discretization::new(&g, &Mesh::uniform(&g, m).unwrap()).unwrap()
    }

    fn round_weight(d: &Discretization) -> BlockTridiagonal {
        let u = d.normalize_volume(&Field::constant(&d.mesh, 1.0)).unwrap();
        d.weighted_mass(u.field(), 4.0).unwrap()
    }

    #[test]
    fn round_sphere_first_two_eigenvalues() {
        let d = sphere(400);
        let b = round_weight(&d);
        let sol = solve_pencil_blocks(d.stiffness(), &b, 2, DEFAULT_DEFLATION_TOL).unwrap();
        let mu1 = 6.0 * (2.0 * PI * PI).powf(2.0 / 3.0);
        assert!((sol.eigenvalues[0] - mu1).abs() < 1e-3);
        assert!((sol.eigenvalues[1] / sol.eigenvalues[0] - 5.0).abs() < 1e-3);
        assert!(sol.b_orthonormal);
        assert!(sol.max_residual(d.stiffness(), &b) < RESIDUAL_TOL);
    }

    #[test]
    fn structured_matches_dense() {
        let d = sphere(80);
        let weights = [
            Field::from_fn(&d.mesh, |_, t| 1.0 + 0.3 * t.cos()),
            Field::from_fn(&d.mesh, |_, t| (t.cos()).max(0.0)),
            Field::from_fn(&d.mesh, |_, t| (t - 1.5).abs().min(0.2) - 0.1).map(|v| v.max(0.0)),
        ];
        for u in &weights {
            let b = d.weighted_mass(u, 4.0).unwrap();
            let s = solve_pencil_blocks(d.stiffness(), &b, 4, DEFAULT_DEFLATION_TOL).unwrap();
            let dn = solve_pencil(&d.stiffness().to_dense(), &b.to_dense(), 4, DEFAULT_DEFLATION_TOL).unwrap();
            assert_eq!(s.deflated_rank, dn.deflated_rank);
            for (x, y) in s.eigenvalues.iter().zip(&dn.eigenvalues) {
                assert_relative_eq!(x, y, max_relative = 1e-8);
            }
            assert!(s.max_residual(d.stiffness(), &b) < RESIDUAL_TOL);
            assert!(dn.max_residual(&d.stiffness().to_dense(), &b.to_dense()) < RESIDUAL_TOL);
            assert!(s.b_orthonormal && dn.b_orthonormal);
        }
    }

    #[test]
    fn degenerate_pair_from_two_separated_bumps() {
        // symmetric bumps near both poles: nearly degenerate pair
        let d = sphere(100);
        let u = Field::from_fn(&d.mesh, |_, t| ((0.5 - t).max(0.0)).max(t - (PI - 0.5)));
        let b = d.weighted_mass(&u, 4.0).unwrap();
        let s = solve_pencil_blocks(d.stiffness(), &b, 3, DEFAULT_DEFLATION_TOL).unwrap();
        let dn = solve_pencil(&d.stiffness().to_dense(), &b.to_dense(), 3, DEFAULT_DEFLATION_TOL).unwrap();
        for (x, y) in s.eigenvalues.iter().zip(&dn.eigenvalues) {
            assert_relative_eq!(x, y, max_relative = 1e-8);
        }
        assert!(s.b_orthonormal);
        assert!(s.max_residual(d.stiffness(), &b) < RESIDUAL_TOL);
    }

    #[test]
    fn identity_pencil() {
        let d = sphere(30);
        let m0 = d.plain_mass().to_dense();
        let sol = solve_pencil(&m0, &m0, 5, DEFAULT_DEFLATION_TOL).unwrap();
        for l in sol.eigenvalues {
            assert_relative_eq!(l, 1.0, max_relative = 1e-10);
        }
        let sol = solve_pencil_blocks(d.plain_mass(), d.plain_mass(), 5, DEFAULT_DEFLATION_TOL).unwrap();
        for l in sol.eigenvalues {
            assert_relative_eq!(l, 1.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn weight_on_one_component() {
        let s = make_sphere(3).unwrap();
        let g = make_disjoint_union(&s, &s).unwrap();
        let mesh = Mesh::uniform(&g, 40).unwrap();
        let d = Discretization::new(&g, &mesh).unwrap();
        let u = Field::from_fn(&mesh, |c, _| if c == 0 { 1.0 } else { 0.0 });
        let b = d.weighted_mass(&u, 4.0).unwrap();
        let sol = solve_pencil_blocks(d.stiffness(), &b, 2, DEFAULT_DEFLATION_TOL).unwrap();
        assert_eq!(sol.deflated_rank, 41);
        // block oracle: the first sphere alone
        let single = Discretization::new(&s, &Mesh::uniform(&s, 40).unwrap()).unwrap();
        let bs = single.weighted_mass(&Field::constant(&single.mesh, 1.0), 4.0).unwrap();
        let oracle = solve_pencil(&single.stiffness().to_dense(), &bs.to_dense(), 2, DEFAULT_DEFLATION_TOL).unwrap();
        for (x, y) in sol.eigenvalues.iter().zip(&oracle.eigenvalues) {
            assert_relative_eq!(x, y, max_relative = 1e-9);
        }
        assert!(sol.eigenvectors.iter().all(|v| v.values.rows(41, 41).amax() == 0.0));
        let dense = solve_pencil(&d.stiffness().to_dense(), &b.to_dense(), 2, DEFAULT_DEFLATION_TOL).unwrap();
        assert_relative_eq!(dense.eigenvalues[1], sol.eigenvalues[1], max_relative = 1e-9);
        assert!(matches!(
            solve_pencil_blocks(d.stiffness(), &b, 42, DEFAULT_DEFLATION_TOL),
            Err(Error::RankDeficient { k: 42, rank: 41 })
        ));
        assert!(matches!(
            solve_pencil(&d.stiffness().to_dense(), &b.to_dense(), 42, DEFAULT_DEFLATION_TOL),
            Err(Error::RankDeficient { k: 42, .. })
        ));
    }

    #[test]
    fn scaling_b_scales_eigenvalues() {
        let d = sphere(50);
        let b = round_weight(&d);
        let s1 = solve_pencil_blocks(d.stiffness(), &b, 3, DEFAULT_DEFLATION_TOL).unwrap();
        let s2 = solve_pencil_blocks(d.stiffness(), &b.scaled(4.0), 3, DEFAULT_DEFLATION_TOL).unwrap();
        for (x, y) in s1.eigenvalues.iter().zip(&s2.eigenvalues) {
            assert_relative_eq!(*x, 4.0 * y, max_relative = 1e-12);
        }
    }

    #[test]
    fn padding_does_not_change_spectrum() {
        let d = sphere(30);
        let b = round_weight(&d).to_dense();
        let a = d.stiffness().to_dense();
        let n = a.nrows();
        let mut ap = DMatrix::zeros(n + 1, n + 1);
        ap.view_mut((0, 0), (n, n)).copy_from(&a);
        ap[(n, n)] = 7.0;
        let mut bp = DMatrix::zeros(n + 1, n + 1);
        bp.view_mut((0, 0), (n, n)).copy_from(&b);
        let s = solve_pencil(&a, &b, 4, DEFAULT_DEFLATION_TOL).unwrap();
        let sp = solve_pencil(&ap, &bp, 4, DEFAULT_DEFLATION_TOL).unwrap();
        for (x, y) in s.eigenvalues.iter().zip(&sp.eigenvalues) {
            assert!((x - y).abs() <= 1e-10 * x.abs());
        }
    }

    #[test]
    fn negative_deflated_energy_is_unbounded() {
        let g = make_torus_band(3, -50.0).unwrap();
        let d = Discretization::new(&g, &Mesh::uniform(&g, 40).unwrap()).unwrap();
        let u = Field::from_fn(&d.mesh, |_, t| if t < 1.0 { 1.0 } else { 0.0 });
        let b = d.weighted_mass(&u, 4.0).unwrap();
        assert!(matches!(solve_pencil_blocks(d.stiffness(), &b, 1, DEFAULT_DEFLATION_TOL), Err(Error::Unbounded)));
    }

    #[test]
    fn periodic_flat_band_has_zero_ground_state() {
        let g = make_torus_band(3, 0.0).unwrap();
        let d = Discretization::new(&g, &Mesh::uniform(&g, 64).unwrap()).unwrap();
        let b = d.weighted_mass(&Field::constant(&d.mesh, 1.0), 4.0).unwrap();
        let sol = solve_pencil_blocks(d.stiffness(), &b, 3, DEFAULT_DEFLATION_TOL).unwrap();
        assert!(sol.eigenvalues[0].abs() < 1e-8);
        // cos t and sin t pair
        assert_relative_eq!(sol.eigenvalues[1], sol.eigenvalues[2], max_relative = 1e-9);
    }

    #[test]
    fn rayleigh_quotients() {
        let d = sphere(100);
        let b = round_weight(&d);
        let sol = solve_pencil_blocks(d.stiffness(), &b, 2, DEFAULT_DEFLATION_TOL).unwrap();
        for (l, x) in sol.eigenvalues.iter().zip(&sol.eigenvectors) {
            assert_relative_eq!(rayleigh(d.stiffness(), &b, x).unwrap(), *l, max_relative = 1e-9);
        }
        let one = Field::constant(&d.mesh, 1.0);
        assert!((rayleigh(d.stiffness(), &b, &one).unwrap() - 43.82323).abs() < 1e-3);
        let u = Field::from_fn(&d.mesh, |_, t| if t < 1.0 { 1.0 } else { 0.0 });
        let bu = d.weighted_mass(&u, 4.0).unwrap();
        let x = Field::from_fn(&d.mesh, |_, t| if t > 2.0 { 1.0 } else { 0.0 });
        assert!(matches!(rayleigh(d.stiffness(), &bu, &x), Err(Error::DegenerateDenominator)));
    }

    #[test]
    fn graded_mesh_pencil() {
        let g = make_sphere(5).unwrap();
        let mesh = Mesh::new(&g, MeshSpec::PoleGraded { elements: 200, core: 3e-3 }).unwrap();
        let d = Discretization::new(&g, &mesh).unwrap();
        let u = d.normalize_volume(&Field::constant(&mesh, 1.0)).unwrap();
        let b = d.weighted_mass(u.field(), d.critical_exponent() - 2.0).unwrap();
        let sol = solve_pencil_blocks(d.stiffness(), &b, 2, DEFAULT_DEFLATION_TOL).unwrap();
        let c = g.consts;
        assert_relative_eq!(sol.eigenvalues[0], c.mu1_sphere, max_relative = 1e-8);
        assert!(sol.max_residual(d.stiffness(), &b) < RESIDUAL_TOL);
    }
}
