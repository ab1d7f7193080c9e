//! Seeded property suites for the scalar and functional inequalities the
//! μ₂ theory relies on.
//!
//! Every suite draws its samples sequentially from a `ChaCha8Rng` seeded with
//! the suite seed and only then evaluates them (possibly in parallel), so a
//! report is a pure function of its inputs. Margins are relative:
//! `(rhs − lhs) / scale`, and a sample is a violation when its margin is below
//! `−tolerance`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::assembly::Discretization;
use crate::bubbles::antipodal_bubbles;
use crate::constants::constants;
use crate::exec::{self, Execution};
use crate::field::Field;
use crate::functionals::{mu_estimate, sobolev_sup_over_span};
use crate::geometry::make_sphere;
use crate::mesh::Mesh;
use crate::pencil::solve_pencil_blocks;
use crate::{Error, Result};

pub const DEFAULT_SEED: u64 = 42;
pub const SCALAR_TOL: f64 = 1e-12;
pub const SOBOLEV_TOL: f64 = 1e-4;
pub const SHARP_TOL: f64 = 1e-3;
pub const NEAR_SHARP_FACTOR: f64 = 1.05;
pub const NEAR_SHARP_EPSILON: f64 = 1e-3;
pub const NEAR_SHARP_DELTA: f64 = 0.5;
pub const MUNK_EIGEN_TOL: f64 = 1e-3;
pub const ESTIM_GRID: usize = 2001;
const LOG_RANGE: f64 = 6.0;
const MAX_MODES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub samples: usize,
    pub violations: usize,
    pub worst_margin: f64,
    pub tolerance: f64,
    pub seed: u64,
    /// Suite-specific numbers (fitted constants, calibration errors, ...).
    #[serde(default)]
    pub details: BTreeMap<String, f64>,
}

impl SuiteReport {
    fn from_margins(suite: &str, margins: &[f64], tolerance: f64, seed: u64) -> Self {
        let worst = margins.iter().copied().fold(f64::INFINITY, f64::min);
        Self {
            suite: suite.to_string(),
            samples: margins.len(),
            violations: margins.iter().filter(|&&m| !(m >= -tolerance)).count(),
            worst_margin: worst,
            tolerance,
            seed,
            details: BTreeMap::new(),
        }
    }

    fn detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn log_uniform(rng: &mut ChaCha8Rng) -> f64 {
    10f64.powf(rng.random_range(-LOG_RANGE..=LOG_RANGE))
}

fn relative_margin(lhs: f64, rhs: f64) -> f64 {
    let scale = lhs.abs().max(rhs.abs());
    if scale == 0.0 {
        0.0
    } else {
        (rhs - lhs) / scale
    }
}

// ---------------------------------------------------------------------------
// (a + b)^α ≤ a^α + b^α + C (a^{α−1} b + a b^{α−1})

/// `((1+x)^α − 1 − x^α) / (x^{α−1} + x)`, evaluated without cancellation at
/// both ends.
pub fn estim_ratio(alpha: f64, x: f64) -> f64 {
    let num = if x < 1.0 {
        (alpha * x.ln_1p()).exp_m1() - x.powf(alpha)
    } else {
        x.powf(alpha) * (alpha * (1.0 / x).ln_1p()).exp_m1() - 1.0
    };
    num / (x.powf(alpha - 1.0) + x)
}

/// Sup of [`estim_ratio`] over a log grid on `[1e−6, 1e6]`, refined by golden
/// section around the best node, and never below the limit value `α`.
pub fn estim_constant(alpha: f64, grid: usize) -> Result<f64> {
    if !(alpha > 2.0) {
        return Err(Error::Precondition(format!("alpha = {alpha} must exceed 2")));
    }
    if grid < 3 {
        return Err(Error::Precondition("estim grid needs at least 3 points".into()));
    }
    let s = |i: usize| -LOG_RANGE + 2.0 * LOG_RANGE * i as f64 / (grid - 1) as f64;
    let f = |s: f64| estim_ratio(alpha, 10f64.powf(s));
    let (best, best_val) = (0..grid)
        .map(|i| (i, f(s(i))))
        .fold((0, f64::NEG_INFINITY), |acc, p| if p.1 > acc.1 { p } else { acc });
    let (mut lo, mut hi) = (s(best.saturating_sub(1)), s((best + 1).min(grid - 1)));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..60 {
        if f1 > f2 {
            hi = x2;
            (x2, f2) = (x1, f1);
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            (x1, f1) = (x2, f2);
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    Ok(best_val.max(f1).max(f2).max(alpha))
}

pub fn check_estim(alpha: f64, samples: usize, seed: u64, exec: Execution) -> Result<SuiteReport> {
    let c = estim_constant(alpha, ESTIM_GRID)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = vec![(0.0, 1.0), (1.0, 0.0), (1.0, 1.0), (1e-6, 1e6), (1e6, 1e6)];
    while pairs.len() < samples {
        pairs.push((log_uniform(&mut rng), log_uniform(&mut rng)));
    }
    pairs.truncate(samples.max(5));
    let margins = exec::map(exec, &pairs, |&(a, b): &(f64, f64)| {
        let lhs = (a + b).powf(alpha);
        let rhs = a.powf(alpha) + b.powf(alpha) + c * (a.powf(alpha - 1.0) * b + a * b.powf(alpha - 1.0));
        relative_margin(lhs, rhs)
    });
    Ok(SuiteReport::from_margins(&format!("estim(alpha={alpha})"), &margins, SCALAR_TOL, seed)
        .detail("alpha", alpha)
        .detail("C", c))
}

// ---------------------------------------------------------------------------
// Truncated powers F_l, G_l used in the integrability bootstrap.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    pub q: f64,
    pub l: f64,
}

impl Truncation {
    pub fn beta(&self) -> f64 {
        2.0 * self.q - 1.0
    }

    pub fn f(&self, x: f64) -> f64 {
        let Self { q, l } = *self;
        if x < 0.0 {
            0.0
        } else if x < l {
            x.powf(q)
        } else {
            q * l.powf(q - 1.0) * x - (q - 1.0) * l.powf(q)
        }
    }

    pub fn g(&self, x: f64) -> f64 {
        let Self { q, l } = *self;
        if x < 0.0 {
            0.0
        } else if x < l {
            x.powf(self.beta())
        } else {
            l.powf(q - 1.0) * (q * l.powf(q - 1.0) * x - (q - 1.0) * l.powf(q))
        }
    }

    /// Right derivative of `F_l`.
    pub fn df(&self, x: f64) -> f64 {
        let Self { q, l } = *self;
        if x < 0.0 {
            0.0
        } else if x < l {
            q * x.powf(q - 1.0)
        } else {
            q * l.powf(q - 1.0)
        }
    }

    /// Right derivative of `G_l`.
    pub fn dg(&self, x: f64) -> f64 {
        let Self { q, l } = *self;
        if x < 0.0 {
            0.0
        } else if x < l {
            self.beta() * x.powf(self.beta() - 1.0)
        } else {
            q * l.powf(2.0 * q - 2.0)
        }
    }

    /// Smallest relative margin of the three pointwise inequalities at `x`.
    pub fn margin(&self, x: f64) -> f64 {
        let df = self.df(x);
        let f = self.f(x);
        let g = self.g(x);
        let i1 = relative_margin(df * df, self.q * self.dg(x));
        let i2 = relative_margin(x * g, f * f);
        let i3 = relative_margin(x * self.dg(x), self.beta() * g);
        i1.min(i2).min(i3)
    }

    /// Jump of `F_l` and `G_l` at `x = l`, relative to their size.
    pub fn continuity_defect(&self) -> f64 {
        let Self { q, l } = *self;
        let df = (self.f(l) - l.powf(q)).abs() / l.powf(q);
        let dg = (self.g(l) - l.powf(self.beta())).abs() / l.powf(self.beta());
        df.max(dg)
    }
}

pub fn check_truncation(q: f64, l: f64, samples: usize, seed: u64, exec: Execution) -> Result<SuiteReport> {
    if !(q > 1.0) || !(l > 0.0) {
        return Err(Error::Precondition(format!("truncation needs q > 1 and l > 0, got q = {q}, l = {l}")));
    }
    let t = Truncation { q, l };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = vec![-1.0, -1e-300, 0.0, l * 0.5, l * (1.0 - 1e-12), l, l * (1.0 + 1e-12), 2.0 * l];
    while xs.len() < samples {
        let x = log_uniform(&mut rng);
        xs.push(if rng.random_bool(0.1) { -x } else { x });
    }
    let mut margins = exec::map(exec, &xs, |&x| t.margin(x));
    margins.push(-t.continuity_defect());
    Ok(SuiteReport::from_margins(&format!("truncation(q={q},l={l})"), &margins, SCALAR_TOL, seed)
        .detail("q", q)
        .detail("l", l)
        .detail("beta", t.beta())
        .detail("continuity_defect", t.continuity_defect()))
}

// ---------------------------------------------------------------------------
// a + b ≤ 2^{2/N} (a^{N/(N−2)} + b^{N/(N−2)})^{(N−2)/N}

pub fn two_term_holder_margin(big_n: f64, a: f64, b: f64) -> f64 {
    let p = big_n / (big_n - 2.0);
    let rhs = 2f64.powf(2.0 / big_n) * (a.powf(p) + b.powf(p)).powf(1.0 / p);
    relative_margin(a + b, rhs)
}

pub fn check_two_term_holder(big_n: f64, samples: usize, seed: u64, exec: Execution) -> Result<SuiteReport> {
    if !(big_n > 2.0) {
        return Err(Error::Precondition(format!("N = {big_n} must exceed 2")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = vec![(1.0, 1.0), (1.0, 0.0), (0.0, 1.0), (0.0, 0.0)];
    while pairs.len() < samples {
        pairs.push((log_uniform(&mut rng), log_uniform(&mut rng)));
    }
    let margins = exec::map(exec, &pairs, |&(a, b): &(f64, f64)| two_term_holder_margin(big_n, a, b));
    Ok(SuiteReport::from_margins(&format!("two_term_holder(N={big_n})"), &margins, SCALAR_TOL, seed)
        .detail("N", big_n))
}

// ---------------------------------------------------------------------------
// Functional inequalities on the round sphere.

/// Random zonal profile `Σ c_l cos(l t)` over at most ten low modes with
/// coefficients uniform in `[−1, 1]`.
pub fn random_zonal(d: &Discretization, rng: &mut ChaCha8Rng) -> Field {
    let count = rng.random_range(1..=MAX_MODES);
    let mut modes: Vec<(f64, f64)> = Vec::with_capacity(count);
    for _ in 0..count {
        let l = rng.random_range(0..MAX_MODES) as f64;
        modes.push((l, rng.random_range(-1.0..=1.0)));
    }
    let length = d.geom.components[0].length;
    Field::from_fn(&d.mesh, |_, t| modes.iter().map(|&(l, c)| c * (l * PI * t / length).cos()).sum())
}

fn require_sphere(d: &Discretization) -> Result<()> {
    if d.geom.is_round_sphere() {
        Ok(())
    } else {
        Err(Error::Precondition("suite requires the round sphere".into()))
    }
}

/// `(c_n|∇v|² + B₀v²) / ‖v‖_N²` for a single profile.
pub fn sobolev_quotient(d: &Discretization, v: &Field, b0: f64) -> Result<f64> {
    let norm = d.norm_n(v);
    if !(norm > 0.0) {
        return Err(Error::ZeroField);
    }
    Ok(d.stiffness_with_curvature(b0).quadratic(&v.values) / (norm * norm))
}

/// Relative quotient errors at the two known extremal/eigen profiles: the
/// constant (equality case) and the first coordinate function, whose
/// Rayleigh quotient against the plain mass is the closed-form eigenvalue.
pub fn sobolev_calibration(d: &Discretization) -> Result<f64> {
    require_sphere(d)?;
    let consts = &d.geom.consts;
    let one = Field::constant(&d.mesh, 1.0);
    let e0 = (sobolev_quotient(d, &one, consts.sphere_curvature())? / consts.mu1_sphere - 1.0).abs();
    let length = d.geom.components[0].length;
    let x1 = Field::from_fn(&d.mesh, |_, t| (PI * t / length).cos());
    let a = d.stiffness();
    let ray = a.quadratic(&x1.values) / d.plain_mass().quadratic(&x1.values);
    let e1 = (ray / consts.sphere_eigenvalue(1) - 1.0).abs();
    Ok(e0.max(e1))
}

pub fn check_sobolev_s(d: &Discretization, b0: f64, samples: usize, seed: u64, exec: Execution) -> Result<SuiteReport> {
    require_sphere(d)?;
    let mu1 = d.geom.consts.mu1_sphere;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fields = vec![Field::constant(&d.mesh, 1.0)];
    while fields.len() < samples {
        let v = random_zonal(d, &mut rng);
        if !v.is_zero() {
            fields.push(v);
        }
    }
    let margins = exec::map(exec, &fields, |v| sobolev_quotient(d, v, b0).map(|q| (q - mu1) / mu1))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(SuiteReport::from_margins("sobolev_S", &margins, SOBOLEV_TOL, seed)
        .detail("B0", b0)
        .detail("mu1_sphere", mu1)
        .detail("mesh_calibration", sobolev_calibration(d)?))
}

fn random_admissible_factor(d: &Discretization, rng: &mut ChaCha8Rng, clipped: bool) -> Field {
    loop {
        let z = random_zonal(d, rng);
        let u = if clipped {
            Field { values: z.values.map(|x| x.max(0.0)) }
        } else {
            z.abs()
        };
        if u.max() > 0.0 {
            return u;
        }
    }
}

/// `λ₂·Vol^{2/n}` at the antipodal two-bubble factor, divided by the sharp
/// constant `2^{2/n}μ₁(𝕊ⁿ)`.
pub fn near_sharp_ratio(d: &Discretization, epsilon: f64, delta: f64) -> Result<f64> {
    require_sphere(d)?;
    let consts = &d.geom.consts;
    let (u, _, _) = antipodal_bubbles(d, epsilon, delta)?;
    Ok(mu_estimate(d, &u, 2)?.value / consts.two_point_lower_bound(consts.mu1_sphere))
}

pub fn check_sharp_mu2_inequality(d: &Discretization, samples: usize, seed: u64, exec: Execution) -> Result<SuiteReport> {
    require_sphere(d)?;
    let consts = &d.geom.consts;
    let b0 = consts.sphere_curvature();
    let scale = consts.two_point_lower_bound(consts.mu1_sphere);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::with_capacity(samples);
    for i in 0..samples {
        let u = random_admissible_factor(d, &mut rng, i % 2 == 1);
        let v1 = random_zonal(d, &mut rng);
        let v2 = random_zonal(d, &mut rng);
        cases.push((u, v1, v2));
    }
    let outcomes = exec::map(exec, &cases, |(u, v1, v2)| {
        let u = d.normalize_volume(u)?;
        match sobolev_sup_over_span(d, &u, v1, v2, b0) {
            Ok(s) => Ok(Some((s - scale) / scale)),
            Err(Error::DegenerateSpan(_)) => Ok(None),
            Err(e) => Err(e),
        }
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let skipped = outcomes.iter().filter(|m| m.is_none()).count();
    let mut margins: Vec<f64> = outcomes.into_iter().flatten().collect();
    let ratio = near_sharp_ratio(d, NEAR_SHARP_EPSILON, NEAR_SHARP_DELTA)?;
    margins.push(NEAR_SHARP_FACTOR - ratio);
    Ok(SuiteReport::from_margins("sharp_mu2", &margins, SHARP_TOL, seed)
        .detail("scale", scale)
        .detail("degenerate_spans_skipped", skipped as f64)
        .detail("near_sharp_ratio", ratio))
}

// ---------------------------------------------------------------------------
// μ_{n+2}(𝕊ⁿ) < (n+2)^{2/n} μ₁(𝕊ⁿ) via the coordinate functions.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MunkRow {
    pub n: usize,
    pub bound_value: f64,
    pub target: f64,
    pub strict: bool,
    pub equality: bool,
    pub discrete_l1: f64,
    pub l1_relative_error: f64,
}

pub const MUNK_ELEMENTS: usize = 400;

pub fn munk_row(n: usize) -> Result<MunkRow> {
    let consts = constants(n)?;
    let nf = n as f64;
    let eigen = nf * (nf - 1.0) * (nf + 2.0) / (nf - 2.0);
    let bound_value = eigen * consts.omega_n.powf(2.0 / nf);
    let target = (nf + 2.0).powf(2.0 / nf) * consts.mu1_sphere;
    let equality = ((bound_value - target) / target).abs() <= 1e-12;
    let geom = make_sphere(n)?;
    let mesh = Mesh::uniform(&geom, MUNK_ELEMENTS)?;
    let d = Discretization::new(&geom, &mesh)?;
    let sol = solve_pencil_blocks(d.stiffness(), d.plain_mass(), 2, crate::pencil::DEFAULT_DEFLATION_TOL)?;
    let discrete_l1 = sol.eigenvalues[1];
    Ok(MunkRow {
        n,
        bound_value,
        target,
        strict: bound_value < target && !equality,
        equality,
        discrete_l1,
        l1_relative_error: (discrete_l1 / eigen - 1.0).abs(),
    })
}

pub fn munk_table(ns: &[usize], exec: Execution) -> Result<Vec<MunkRow>> {
    exec::map(exec, ns, |&n| munk_row(n)).into_iter().collect()
}

/// A row fails when its strictness verdict disagrees with `n ≥ 7` or its
/// discrete coordinate eigenvalue misses the closed form.
pub fn check_munk_sphere(ns: &[usize], exec: Execution) -> Result<SuiteReport> {
    if ns.iter().any(|&n| n < 3) {
        return Err(Error::Precondition("munk suite needs n ≥ 3".into()));
    }
    let rows = munk_table(ns, exec)?;
    let margins: Vec<f64> = rows
        .iter()
        .map(|r| {
            let verdict: f64 = if r.strict == (r.n >= 7) { 0.0 } else { -1.0 };
            verdict.min(MUNK_EIGEN_TOL - r.l1_relative_error)
        })
        .collect();
    let worst_l1 = rows.iter().map(|r| r.l1_relative_error).fold(0.0, f64::max);
    Ok(SuiteReport::from_margins("munk", &margins, 0.0, 0).detail("worst_l1_relative_error", worst_l1))
}

// ---------------------------------------------------------------------------
// The full battery.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatteryConfig {
    pub seed: u64,
    pub alphas: Vec<f64>,
    pub estim_samples: usize,
    pub truncation_qs: Vec<f64>,
    pub truncation_l: f64,
    pub truncation_samples: usize,
    pub holder_samples: usize,
    pub sobolev_samples: usize,
    pub sharp_samples: usize,
    pub munk_dims: Vec<usize>,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            alphas: vec![2.5, 3.0, 10.0 / 3.0, 4.0, 6.0],
            estim_samples: 10_000,
            truncation_qs: vec![1.25, 1.5],
            truncation_l: 10.0,
            truncation_samples: 10_000,
            holder_samples: 10_000,
            sobolev_samples: 500,
            sharp_samples: 200,
            munk_dims: (3..=10).collect(),
        }
    }
}

pub const SUITES: [&str; 6] = ["estim", "truncation", "holder", "sobolev", "sharp_mu2", "munk"];

/// Run the named suites. Functional suites use `d` (which must be a round
/// sphere); truncation also tests `q = n/(n−2)` for the dimension of `d`.
pub fn run_suites(names: &[&str], d: &Discretization, cfg: &BatteryConfig, exec: Execution) -> Result<Vec<SuiteReport>> {
    if let Some(bad) = names.iter().find(|s| !SUITES.contains(s)) {
        return Err(Error::Precondition(format!("unknown suite '{bad}' (known: {})", SUITES.join(", "))));
    }
    let seed = cfg.seed;
    let consts = &d.geom.consts;
    let mut out = Vec::new();
    for &name in names {
        match name {
            "estim" => {
                for &a in &cfg.alphas {
                    out.push(check_estim(a, cfg.estim_samples, seed, exec)?);
                }
            }
            "truncation" => {
                let mut qs = cfg.truncation_qs.clone();
                qs.push(consts.dim() / (consts.dim() - 2.0));
                for q in qs {
                    out.push(check_truncation(q, cfg.truncation_l, cfg.truncation_samples, seed, exec)?);
                }
            }
            "holder" => out.push(check_two_term_holder(consts.critical_exponent, cfg.holder_samples, seed, exec)?),
            "sobolev" => out.push(check_sobolev_s(d, consts.sphere_curvature(), cfg.sobolev_samples, seed, exec)?),
            "sharp_mu2" => out.push(check_sharp_mu2_inequality(d, cfg.sharp_samples, seed, exec)?),
            "munk" => out.push(check_munk_sphere(&cfg.munk_dims, exec)?),
            _ => unreachable!(),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshSpec;
    use approx::assert_relative_eq;

    fn sphere3(spec: MeshSpec) -> Discretization {
        let geom = make_sphere(3).unwrap();
        let mesh = Mesh::new(&geom, spec).unwrap();
        Discretization::new(&geom, &mesh).unwrap()
    }

    #[test]
    fn estim_cubic_is_flat() {
        for x in [1e-6, 0.1, 1.0, 7.0, 1e6] {
            assert_relative_eq!(estim_ratio(3.0, x), 3.0, max_relative = 1e-9);
        }
        assert_relative_eq!(estim_constant(3.0, ESTIM_GRID).unwrap(), 3.0, max_relative = 1e-9);
        // a = b = 1: 8 ≤ 1 + 1 + 3·2 with equality
        let r = check_estim(3.0, 100, 1, Execution::Sequential).unwrap();
        assert!(r.passed());
        assert!(r.worst_margin.abs() < 1e-14);
    }

    #[test]
    fn estim_rejects_small_alpha() {
        assert!(check_estim(2.0, 10, 1, Execution::Sequential).is_err());
    }

    #[test]
    fn estim_constant_bounded_below_by_alpha() {
        let a = 10.0 / 3.0;
        assert!(estim_constant(a, ESTIM_GRID).unwrap() >= a);
        let coarse = estim_constant(a, ESTIM_GRID).unwrap();
        let fine = estim_constant(a, 2 * ESTIM_GRID).unwrap();
        assert!((coarse / fine - 1.0).abs() < 1e-2);
    }

    #[test]
    fn truncation_worked_example() {
        let t = Truncation { q: 2.0, l: 10.0 };
        assert_relative_eq!(t.f(5.0), 25.0);
        assert_relative_eq!(t.df(5.0).powi(2), 100.0);
        assert_relative_eq!(t.dg(5.0), 75.0);
        assert!(t.margin(5.0) > 0.0 || t.margin(5.0).abs() < 1e-15);
        assert_eq!(t.margin(-3.0), 0.0);
        assert!(t.continuity_defect() < 1e-12);
    }

    #[test]
    fn holder_edge_cases() {
        assert!(two_term_holder_margin(6.0, 1.0, 1.0).abs() < 1e-15);
        assert!(two_term_holder_margin(6.0, 1.0, 0.0) > 0.0);
    }

    #[test]
    fn suites_are_deterministic_across_modes() {
        let a = check_two_term_holder(6.0, 500, 42, Execution::Sequential).unwrap();
        let b = check_two_term_holder(6.0, 500, 42, Execution::Parallel).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn sobolev_constant_is_equality_case() {
        let d = sphere3(MeshSpec::Uniform { elements: 200 });
        let one = Field::constant(&d.mesh, 1.0);
        let q = sobolev_quotient(&d, &one, 6.0).unwrap();
        assert_relative_eq!(q, d.geom.consts.mu1_sphere, max_relative = 1e-10);
        let x1 = Field::from_fn(&d.mesh, |_, t| t.cos());
        assert!(sobolev_quotient(&d, &x1, 6.0).unwrap() > d.geom.consts.mu1_sphere);
    }

    #[test]
    fn round_factor_span_of_first_modes() {
        let d = sphere3(MeshSpec::Uniform { elements: 400 });
        let u = d.normalize_volume(&Field::constant(&d.mesh, 1.0)).unwrap();
        let one = Field::constant(&d.mesh, 1.0);
        let x1 = Field::from_fn(&d.mesh, |_, t| t.cos());
        let s = sobolev_sup_over_span(&d, &u, &one, &x1, 6.0).unwrap();
        // λ of the coordinate functions times Vol(𝕊³)^{2/3}
        assert_relative_eq!(s, 30.0 * (2.0 * PI * PI).powf(2.0 / 3.0), max_relative = 1e-4);
        assert!(s > d.geom.consts.two_point_lower_bound(d.geom.consts.mu1_sphere));
    }

    #[test]
    fn munk_flips_at_seven() {
        let six = munk_row(6).unwrap();
        assert!(six.equality && !six.strict);
        let seven = munk_row(7).unwrap();
        assert!(seven.strict);
        assert_relative_eq!(seven.bound_value / seven.target, 1.8 / 9f64.powf(2.0 / 7.0), max_relative = 1e-12);
        assert!(!munk_row(3).unwrap().strict);
    }

    #[test]
    fn unknown_suite_is_rejected() {
        let d = sphere3(MeshSpec::Uniform { elements: 40 });
        assert!(run_suites(&["nope"], &d, &BatteryConfig::default(), Execution::Sequential).is_err());
    }
}
