//! Minimization of `J(u) = λ₂(u) · Vol(u)^{2/n}` over conformal factors.
//!
//! Two drivers: the damped Euler–Lagrange fixed point `u ← |w|` and a
//! projected gradient descent on the exact derivative of the discrete `J`.
//! Both record a trace with the bound monitors and end with a nodal analysis
//! of the second eigenfunction.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::assembly::Discretization;
use crate::bubbles::{aubin_bubble, BubbleCenter, BubbleParams};
use crate::exec::{self, Execution};
use crate::field::{ConformalFactor, Field};
use crate::functionals::mu_estimate_with_solution;
use crate::pencil::EigenSolution;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerParams {
    pub tau0: f64,
    pub tau_min: f64,
    pub max_iters: usize,
    /// relative stagnation tolerance on `J`
    pub tol: f64,
    /// floor relative to the mean of `u`, used when `n ≥ 7`
    pub u_floor: f64,
    /// relative `λ₂ − λ₁` below which the eigenspace is treated as degenerate
    pub tie_tol: f64,
    /// relative gap below which the derivative formula is refused
    pub gap_tol: f64,
    pub armijo_c: f64,
    pub snapshot_every: usize,
}

impl Default for OptimizerParams {
    fn default() -> Self {
        Self {
            tau0: 0.5,
            tau_min: 1e-8,
            max_iters: 200,
            tol: 1e-8,
            u_floor: 1e-8,
            tie_tol: 1e-3,
            gap_tol: 1e-8,
            armijo_c: 1e-4,
            snapshot_every: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    Stalled,
    MaxIters,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::Converged => "converged",
            Termination::Stalled => "stalled",
            Termination::MaxIters => "max_iters",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    #[serde(rename = "J")]
    pub j: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub gap: f64,
    pub tau: f64,
    pub lower_bound: f64,
    pub u_vs_absw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerTrace {
    pub rows: Vec<TraceRow>,
    pub snapshots: Vec<(usize, Field)>,
    /// `2^{2/n} μ₁`
    pub lower_bound: f64,
    /// `(μ₁^{n/2} + μ₁(𝕊ⁿ)^{n/2})^{2/n}`
    pub upper_target: f64,
    pub termination: Termination,
    /// accepted iterates below the lower-bound monitor
    pub monitor_violations: usize,
    /// gradient driver only: steps taken by the fixed-point map instead
    pub fallback_steps: usize,
}

impl OptimizerTrace {
    pub fn final_j(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.j)
    }

    pub fn iterations(&self) -> usize {
        self.rows.last().map_or(0, |r| r.iter)
    }

    pub fn write_csv<W: Write>(&self, preamble: &[String], mut out: W) -> Result<()> {
        for line in preamble {
            writeln!(out, "# {line}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodalReport {
    pub sign_changes: usize,
    pub positive_domains: usize,
    pub negative_domains: usize,
    pub el_residual: f64,
    pub u_vs_absw: f64,
    /// whether `w` takes both signs
    pub nodal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationRun {
    pub u: ConformalFactor,
    pub w: Field,
    pub j: f64,
    pub trace: OptimizerTrace,
    pub report: NodalReport,
}

/// Bound monitors derived from a `μ₁` estimate.
pub fn bounds(d: &Discretization, mu1: f64) -> (f64, f64) {
    let c = &d.geom.consts;
    (c.two_point_lower_bound(mu1), c.two_bubble_upper_bound(mu1.max(0.0)))
}

/// Relative slack under which a step counts as not increasing `J`: eigenvalue
/// roundoff, so that `u` can keep moving toward `|w|` once `J` is flat.
pub const J_ROUNDOFF: f64 = 1e-11;

/// Tolerance of the lower-bound monitor.
pub fn monitor_tolerance(lower_bound: f64) -> f64 {
    1e-6 * lower_bound.abs().max(1.0)
}

struct State {
    u: ConformalFactor,
    sol: EigenSolution,
    j: f64,
}

impl State {
    fn lambda1(&self) -> f64 {
        self.sol.eigenvalues[0]
    }
    fn lambda2(&self) -> f64 {
        self.sol.eigenvalues[1]
    }
}

fn evaluate(d: &Discretization, raw: &Field) -> Result<State> {
    let u = d.normalize_volume(raw)?;
    let (est, sol) = mu_estimate_with_solution(d, &u, 2)?;
    Ok(State { u, sol, j: est.value })
}

/// `J(u)` after volume normalization.
pub fn objective(d: &Discretization, u: &Field) -> Result<f64> {
    Ok(evaluate(d, u)?.j)
}

/// `‖f‖_N`-relative distance `‖u − |w|‖_N / ‖u‖_N`.
pub fn u_vs_absw(d: &Discretization, u: &Field, w: &Field) -> f64 {
    d.norm_n(&u.combine(1.0, &w.abs(), -1.0)) / d.norm_n(u)
}

fn sign_changes_in(values: &[f64], cut: f64) -> usize {
    let signs: Vec<bool> = values.iter().filter(|v| v.abs() > cut).map(|&v| v > 0.0).collect();
    signs.windows(2).filter(|s| s[0] != s[1]).count()
}

/// Sign changes along each component profile, summed.
pub fn sign_changes(d: &Discretization, w: &Field) -> usize {
    let cut = 1e-10 * w.values.amax();
    (0..d.mesh.components.len()).map(|c| sign_changes_in(&w.values.as_slice()[d.mesh.range(c)], cut)).sum()
}

fn choose_w(d: &Discretization, st: &State, params: &OptimizerParams) -> Field {
    let (l1, l2) = (st.lambda1(), st.lambda2());
    let x2 = &st.sol.eigenvectors[1];
    if (l2 - l1).abs() >= params.tie_tol * l2.abs().max(f64::MIN_POSITIVE) {
        return x2.clone();
    }
    // Degenerate pair: prefer the most sign changes; among those, the
    // combination whose damped step lowers J the most.
    let x1 = &st.sol.eigenvectors[0];
    let at = |th: f64| x1.combine(th.cos(), x2, th.sin());
    let trial = |w: &Field| {
        let cand = st.u.field().combine(1.0 - params.tau0, &w.abs(), params.tau0);
        evaluate(d, &cand).map_or(f64::INFINITY, |s| s.j)
    };
    let count = 36;
    let step = std::f64::consts::PI / count as f64;
    let angles: Vec<(f64, usize)> = (0..count).map(|i| (step * i as f64, sign_changes(d, &at(step * i as f64)))).collect();
    let sc = angles.iter().map(|a| a.1).max().unwrap_or(0);
    let score = |th: f64| {
        let w = at(th);
        if sign_changes(d, &w) == sc { trial(&w) } else { f64::INFINITY }
    };
    let (mut th, mut best) = (0.0, f64::INFINITY);
    for &(t, s) in &angles {
        if s == sc {
            let j = score(t);
            if j < best {
                th = t;
                best = j;
            }
        }
    }
    // golden-section refinement around the best grid angle
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (th - step, th + step);
    let (mut c, mut e) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fe) = (score(c), score(e));
    for _ in 0..30 {
        if fc < fe {
            b = e;
            e = c;
            fe = fc;
            c = b - g * (b - a);
            fc = score(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + g * (b - a);
            fe = score(e);
        }
    }
    let mid = 0.5 * (a + b);
    if score(mid) < best {
        th = mid;
    }
    at(th)
}

/// Sign changes, per-sign interval counts, Euler–Lagrange residual
/// `‖Aw − μ₂ B(|w|) w‖ / ‖Aw‖` and `‖u − |w|‖_N / ‖u‖_N`.
pub fn nodal_analysis(d: &Discretization, w: &Field, u: &Field, mu2_value: f64) -> Result<NodalReport> {
    if w.is_zero() {
        return Err(Error::ZeroField);
    }
    let cut = 1e-10 * w.values.amax();
    let (mut pos, mut neg) = (0, 0);
    for (c, cm) in d.mesh.components.iter().enumerate() {
        let signs: Vec<bool> = w.values.as_slice()[d.mesh.range(c)].iter().filter(|v| v.abs() > cut).map(|&v| v > 0.0).collect();
        if signs.is_empty() {
            continue;
        }
        let mut runs: Vec<bool> = Vec::new();
        for s in signs {
            if runs.last() != Some(&s) {
                runs.push(s);
            }
        }
        if cm.periodic && runs.len() > 1 && runs[0] == runs[runs.len() - 1] {
            runs.pop();
        }
        pos += runs.iter().filter(|&&s| s).count();
        neg += runs.iter().filter(|&&s| !s).count();
    }
    let aw = d.stiffness().matvec(&w.values);
    let bw = d.weighted_mass(&w.abs(), d.critical_exponent() - 2.0)?.matvec(&w.values);
    let el_residual = (&aw - bw * mu2_value).norm() / aw.norm();
    Ok(NodalReport {
        sign_changes: sign_changes(d, w),
        positive_domains: pos,
        negative_domains: neg,
        el_residual,
        u_vs_absw: u_vs_absw(d, u, w),
        nodal: pos > 0 && neg > 0,
    })
}

/// `G_j = λ₂(N−2)(∫ û^{N−1} φ_j ρ − ∫ û^{N−3} w² φ_j ρ)` at the normalized `û`,
/// with `w` the `B`-normalized second eigenvector from `sol`.
pub fn gradient(d: &Discretization, u: &Field, sol: &EigenSolution, gap_tol: f64) -> Result<Field> {
    if sol.eigenvalues.len() < 2 {
        return Err(Error::Precondition("gradient needs the first two eigenpairs".into()));
    }
    let (l1, l2) = (sol.eigenvalues[0], sol.eigenvalues[1]);
    let gap = l2 - l1;
    if gap <= gap_tol * l2.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateGap { gap });
    }
    let big_n = d.critical_exponent();
    if big_n - 3.0 < 0.0 && u.min() <= 0.0 {
        return Err(Error::SingularPower(big_n - 3.0));
    }
    let u = d.normalize_volume(u)?;
    let w = &sol.eigenvectors[1];
    let g = d.load_vector(&[u.field(), w], |v| {
        let (uh, wh) = (v[0].abs(), v[1]);
        uh.powf(big_n - 1.0) - uh.powf(big_n - 3.0) * wh * wh
    });
    Ok(Field { values: g * (l2 * (big_n - 2.0)) })
}

/// Convenience: solve at `u` and return `(J, G)`.
pub fn objective_and_gradient(d: &Discretization, u: &Field, gap_tol: f64) -> Result<(f64, Field)> {
    let st = evaluate(d, u)?;
    let g = gradient(d, st.u.field(), &st.sol, gap_tol)?;
    Ok((st.j, g))
}

fn floor_of(d: &Discretization, u: &Field, params: &OptimizerParams) -> f64 {
    if d.critical_exponent() - 3.0 < 0.0 {
        (params.u_floor * u.mean() - u.min()).max(0.0)
    } else {
        0.0
    }
}

struct Recorder {
    rows: Vec<TraceRow>,
    snapshots: Vec<(usize, Field)>,
    lower: f64,
    violations: usize,
    every: usize,
}

impl Recorder {
    fn push(&mut self, d: &Discretization, iter: usize, st: &State, w: &Field, tau: f64) {
        if st.j < self.lower - monitor_tolerance(self.lower) {
            self.violations += 1;
        }
        self.rows.push(TraceRow {
            iter,
            j: st.j,
            lambda1: st.lambda1(),
            lambda2: st.lambda2(),
            gap: st.lambda2() - st.lambda1(),
            tau,
            lower_bound: self.lower,
            u_vs_absw: u_vs_absw(d, st.u.field(), w),
        });
        if self.every > 0 && iter.is_multiple_of(self.every) {
            self.snapshots.push((iter, st.u.field().clone()));
        }
    }
}

fn self_consistent(d: &Discretization, st: &State, w: &Field, tol: f64) -> Result<bool> {
    let r = nodal_analysis(d, w, st.u.field(), st.lambda2())?;
    Ok(r.u_vs_absw <= 10.0 * tol && r.el_residual <= 1e-5)
}

fn finish(d: &Discretization, st: State, w: Field, rec: Recorder, termination: Termination, upper: f64, fallback: usize) -> Result<OptimizationRun> {
    let report = nodal_analysis(d, &w, st.u.field(), st.lambda2())?;
    let mut snapshots = rec.snapshots;
    let last = rec.rows.last().map_or(0, |r| r.iter);
    if snapshots.last().map(|s| s.0) != Some(last) {
        snapshots.push((last, st.u.field().clone()));
    }
    Ok(OptimizationRun {
        j: st.j,
        u: st.u,
        w,
        trace: OptimizerTrace {
            rows: rec.rows,
            snapshots,
            lower_bound: rec.lower,
            upper_target: upper,
            termination,
            monitor_violations: rec.violations,
            fallback_steps: fallback,
        },
        report,
    })
}

/// One damped fixed-point step from `st`: `normalize((1−τ)u + τ|w| + floor)`
/// with `τ` halved until `J` does not increase.
fn fixed_point_step(d: &Discretization, st: &State, w: &Field, params: &OptimizerParams) -> Result<Option<(State, f64)>> {
    let mut tau = params.tau0;
    let target = w.abs();
    while tau >= params.tau_min {
        let mut cand = st.u.field().combine(1.0 - tau, &target, tau);
        let fl = floor_of(d, &cand, params);
        if fl > 0.0 {
            cand = cand.map(|v| v + fl);
        }
        if let Ok(next) = evaluate(d, &cand) {
            if next.j <= st.j + J_ROUNDOFF * st.j.abs() {
                return Ok(Some((next, tau)));
            }
        }
        tau *= 0.5;
    }
    Ok(None)
}

/// Damped Euler–Lagrange iteration. "Converged" is reported only when `J`
/// has stagnated and the iterate is self-consistent (`u ≈ |w|`, small
/// Euler–Lagrange residual); otherwise the run ends stalled or at `max_iters`.
pub fn minimize_fixed_point(d: &Discretization, u0: &Field, params: &OptimizerParams, mu1: f64) -> Result<OptimizationRun> {
    let (lower, upper) = bounds(d, mu1);
    let mut st = evaluate(d, u0)?;
    let mut w = choose_w(d, &st, params);
    let mut rec = Recorder { rows: Vec::new(), snapshots: Vec::new(), lower, violations: 0, every: params.snapshot_every };
    rec.push(d, 0, &st, &w, 0.0);
    let mut termination = Termination::MaxIters;
    for iter in 1..=params.max_iters {
        let Some((next, tau)) = fixed_point_step(d, &st, &w, params)? else {
            termination = if self_consistent(d, &st, &w, params.tol)? { Termination::Converged } else { Termination::Stalled };
            break;
        };
        let dj = st.j - next.j;
        st = next;
        w = choose_w(d, &st, params);
        rec.push(d, iter, &st, &w, tau);
        if dj <= params.tol * st.j.abs() && self_consistent(d, &st, &w, params.tol)? {
            termination = Termination::Converged;
            break;
        }
    }
    finish(d, st, w, rec, termination, upper, 0)
}

/// Projected gradient descent with the lumped-mass preconditioned direction
/// `M_L⁻¹ G` and Armijo backtracking; degenerate gaps fall back to a
/// fixed-point step.
pub fn minimize_gradient(d: &Discretization, u0: &Field, params: &OptimizerParams, mu1: f64) -> Result<OptimizationRun> {
    let (lower, upper) = bounds(d, mu1);
    let lumped = d.lumped_mass();
    let mut st = evaluate(d, u0)?;
    let mut w = choose_w(d, &st, params);
    let mut rec = Recorder { rows: Vec::new(), snapshots: Vec::new(), lower, violations: 0, every: params.snapshot_every };
    rec.push(d, 0, &st, &w, 0.0);
    let mut termination = Termination::MaxIters;
    let mut fallback = 0;
    let mut step_scale = 0.25;
    for iter in 1..=params.max_iters {
        let u = st.u.field().clone();
        let floor = params.u_floor * u.mean();
        let accepted = match gradient(d, &u, &st.sol, params.gap_tol) {
            Ok(g) => {
                let dir = Field { values: g.values.component_div(&lumped) };
                let slope = g.values.dot(&dir.values);
                let mut s = step_scale * u.max() / dir.values.amax().max(f64::MIN_POSITIVE);
                let mut out = None;
                while s * dir.values.amax() >= params.tau_min * u.max() {
                    let cand = u.combine(1.0, &dir, -s).map(|v| v.max(floor));
                    if let Ok(next) = evaluate(d, &cand) {
                        if next.j <= st.j - params.armijo_c * s * slope {
                            out = Some((next, s));
                            break;
                        }
                    }
                    s *= 0.5;
                }
                if let Some((_, s)) = &out {
                    let used = s * dir.values.amax() / u.max();
                    step_scale = (2.0 * used).min(0.5);
                }
                out
            }
            Err(Error::DegenerateGap { .. }) => {
                fallback += 1;
                fixed_point_step(d, &st, &w, params)?
            }
            Err(e) => return Err(e),
        };
        let Some((next, tau)) = accepted else {
            termination = if self_consistent(d, &st, &w, params.tol)? { Termination::Converged } else { Termination::Stalled };
            break;
        };
        let dj = st.j - next.j;
        st = next;
        w = choose_w(d, &st, params);
        rec.push(d, iter, &st, &w, tau);
        if dj <= params.tol * st.j.abs() && self_consistent(d, &st, &w, params.tol)? {
            termination = Termination::Converged;
            break;
        }
    }
    finish(d, st, w, rec, termination, upper, fallback)
}

#[derive(Debug, Clone, PartialEq)]
pub struct YamabeEstimate {
    pub mu1: f64,
    pub minimizer: Field,
    pub component: usize,
}

/// Discrete Yamabe invariant: the `k = 1` fixed point `u ← |x₁|` started from
/// the indicator of each component, minimized over components.
pub fn yamabe_estimate(d: &Discretization, params: &OptimizerParams) -> Result<YamabeEstimate> {
    let mut best: Option<YamabeEstimate> = None;
    for c in 0..d.mesh.components.len() {
        let start = Field::from_fn(&d.mesh, |cc, _| if cc == c { 1.0 } else { 0.0 });
        let eval = |raw: &Field| -> Result<(f64, Field)> {
            let u = d.normalize_volume(raw)?;
            let (est, sol) = mu_estimate_with_solution(d, &u, 1)?;
            Ok((est.value, sol.eigenvectors[0].clone()))
        };
        let mut u = d.normalize_volume(&start)?.into_field();
        let (mut j, mut x) = eval(&u)?;
        for _ in 0..params.max_iters {
            let mut tau = params.tau0;
            let mut moved = false;
            while tau >= params.tau_min {
                let cand = u.combine(1.0 - tau, &x.abs(), tau);
                if let Ok((jn, xn)) = eval(&cand) {
                    if jn <= j {
                        let dj = j - jn;
                        u = d.normalize_volume(&cand)?.into_field();
                        j = jn;
                        x = xn;
                        moved = dj > params.tol * j.abs().max(1.0);
                        break;
                    }
                }
                tau *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if best.as_ref().is_none_or(|b| j < b.mu1) {
            best = Some(YamabeEstimate { mu1: j, minimizer: x.abs(), component: c });
        }
    }
    best.ok_or_else(|| Error::Precondition("geometry has no components".into()))
}

/// Starting factor for a multistart run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Start {
    Constant,
    TwoBubbles { epsilon: f64 },
    Random { seed: u64 },
}

impl std::fmt::Display for Start {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Start::Constant => write!(f, "constant"),
            Start::TwoBubbles { epsilon } => write!(f, "two_bubbles(eps={epsilon:e})"),
            Start::Random { seed } => write!(f, "random(seed={seed})"),
        }
    }
}

/// Constant, two antipodal bubbles at three `ε`, three random positive seeds.
pub fn default_starts(seed: u64) -> Vec<Start> {
    let mut s = vec![Start::Constant];
    s.extend([1e-2, 1e-3, 1e-4].map(|epsilon| Start::TwoBubbles { epsilon }));
    s.extend((0..3).map(|i| Start::Random { seed: seed.wrapping_add(i) }));
    s
}

/// Cutoff radius used for the bubble starts.
pub const START_DELTA: f64 = 0.5;

pub fn start_field(d: &Discretization, start: &Start) -> Result<Field> {
    match *start {
        Start::Constant => Ok(Field::constant(&d.mesh, 1.0)),
        Start::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(Field::from_fn(&d.mesh, |_, _| 0.5 + rng.random::<f64>()))
        }
        Start::TwoBubbles { epsilon } => {
            let comp = &d.geom.components[0];
            let (a, b) = if comp.is_periodic() {
                let t = comp.length;
                let delta = START_DELTA.min(t / 16.0);
                (
                    BubbleParams { epsilon, delta, component: 0, center: BubbleCenter::Interior { t: t / 4.0 } },
                    BubbleParams { epsilon, delta, component: 0, center: BubbleCenter::Interior { t: 0.75 * t } },
                )
            } else {
                let delta = START_DELTA.min(comp.length / 4.0 * 0.99);
                (BubbleParams::at_pole(epsilon, delta), BubbleParams { center: BubbleCenter::End, ..BubbleParams::at_pole(epsilon, delta) })
            };
            let (va, vb) = (aubin_bubble(d, &a)?, aubin_bubble(d, &b)?);
            Ok(va.field.combine(1.0, &vb.field, 1.0))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    FixedPoint,
    Gradient,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StartSummary {
    pub start: Start,
    pub label: String,
    pub initial_j: Option<f64>,
    pub final_j: Option<f64>,
    pub iterations: usize,
    pub termination: Option<Termination>,
    pub monitor_violations: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct MultistartResult {
    pub best: OptimizationRun,
    pub best_start: Start,
    pub summaries: Vec<StartSummary>,
    pub runs: Vec<Option<OptimizationRun>>,
}

/// Run every start independently and keep the smallest final `J`.
pub fn multistart(
    d: &Discretization,
    starts: &[Start],
    params: &OptimizerParams,
    mu1: f64,
    method: Method,
    exec: Execution,
) -> Result<MultistartResult> {
    let outcomes = exec::map(exec, starts, |s| {
        let u0 = start_field(d, s)?;
        match method {
            Method::FixedPoint => minimize_fixed_point(d, &u0, params, mu1),
            Method::Gradient => minimize_gradient(d, &u0, params, mu1),
        }
    });
    let mut summaries = Vec::new();
    let mut runs = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for (i, (s, out)) in starts.iter().zip(outcomes).enumerate() {
        match out {
            Ok(run) => {
                summaries.push(StartSummary {
                    start: *s,
                    label: s.to_string(),
                    initial_j: run.trace.rows.first().map(|r| r.j),
                    final_j: Some(run.j),
                    iterations: run.trace.iterations(),
                    termination: Some(run.trace.termination),
                    monitor_violations: run.trace.monitor_violations,
                    error: None,
                });
                if best.is_none_or(|(_, j)| run.j < j) {
                    best = Some((i, run.j));
                }
                runs.push(Some(run));
            }
            Err(e) => {
                summaries.push(StartSummary {
                    start: *s,
                    label: s.to_string(),
                    initial_j: None,
                    final_j: None,
                    iterations: 0,
                    termination: None,
                    monitor_violations: 0,
                    error: Some(e.to_string()),
                });
                runs.push(None);
            }
        }
    }
    let (bi, _) = best.ok_or_else(|| Error::Solver("every start failed".into()))?;
    Ok(MultistartResult { best: runs[bi].clone().expect("best run exists"), best_start: starts[bi], summaries, runs })
}

/// Deterministic random positive field, used by tests and the inequality suites.
pub fn random_positive(d: &Discretization, rng: &mut ChaCha8Rng, lo: f64) -> Field {
    Field::from_fn(&d.mesh, |_, _| lo + rng.random::<f64>())
}

/// Random perturbation supported where `u` exceeds `floor`, zero elsewhere.
pub fn random_interior_direction(u: &Field, floor: f64, rng: &mut ChaCha8Rng) -> Field {
    Field { values: DVector::from_iterator(u.len(), u.values.iter().map(|&v| if v > floor { rng.random_range(-1.0..1.0) } else { 0.0 })) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_disjoint_union, make_sphere, make_torus_band};
    use crate::mesh::{Mesh, MeshSpec};
    use approx::assert_relative_eq;

    fn s3(m: usize) -> Discretization {
        let g = make_sphere(3).unwrap();
        Discretization::new(&g, &Mesh::new(&g, MeshSpec::PoleGraded { elements: m, core: 3e-3 }).unwrap()).unwrap()
    }

    #[test]
    fn objective_values() {
        let d = s3(200);
        let mu1 = d.geom.consts.mu1_sphere;
        let round = objective(&d, &Field::constant(&d.mesh, 1.0)).unwrap();
        assert_relative_eq!(round, 5.0 * mu1, max_relative = 1e-3);
        let u = start_field(&d, &Start::TwoBubbles { epsilon: 1e-2 }).unwrap();
        assert!(objective(&d, &u).unwrap() < 1.10 * 2f64.powf(2.0 / 3.0) * mu1);
    }

    #[test]
    fn nodal_counts() {
        let d = s3(100);
        let w = Field::from_fn(&d.mesh, |_, t| t.cos());
        let r = nodal_analysis(&d, &w, &Field::constant(&d.mesh, 1.0), 1.0).unwrap();
        assert_eq!((r.sign_changes, r.positive_domains, r.negative_domains), (1, 1, 1));
        assert!(r.nodal);
        let r = nodal_analysis(&d, &w.abs(), &Field::constant(&d.mesh, 1.0), 1.0).unwrap();
        assert_eq!(r.sign_changes, 0);
        assert!(!r.nodal);
        let g = make_torus_band(3, 0.0).unwrap();
        let d = Discretization::new(&g, &Mesh::uniform(&g, 64).unwrap()).unwrap();
        let w = Field::from_fn(&d.mesh, |_, t| t.cos());
        let r = nodal_analysis(&d, &w, &Field::constant(&d.mesh, 1.0), 1.0).unwrap();
        assert_eq!((r.sign_changes, r.positive_domains, r.negative_domains), (2, 1, 1));
    }

    #[test]
    fn gradient_vanishes_on_self_consistent_pair() {
        let d = s3(80);
        let st = evaluate(&d, &Field::from_fn(&d.mesh, |_, t| 1.0 + 0.5 * t.cos())).unwrap();
        let mut sol = st.sol.clone();
        sol.eigenvectors[1] = st.u.field().clone();
        let g = gradient(&d, st.u.field(), &sol, 1e-8).unwrap();
        assert!(g.values.amax() < 1e-12 * st.j);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let d = s3(100);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = d.normalize_volume(&random_positive(&d, &mut rng, 0.5)).unwrap().into_field();
        let (j, g) = objective_and_gradient(&d, &u, 1e-8).unwrap();
        let h = random_interior_direction(&u, 0.0, &mut rng);
        let t = 1e-6;
        let fd = (objective(&d, &u.combine(1.0, &h, t)).unwrap() - objective(&d, &u.combine(1.0, &h, -t)).unwrap()) / (2.0 * t);
        assert!((g.values.dot(&h.values) - fd).abs() <= 1e-4 * j.abs());
        // invariant under scaling of u
        let (_, g2) = objective_and_gradient(&d, &u.scaled(3.0), 1e-8).unwrap();
        assert!((g.values.clone() - g2.values).amax() <= 1e-10 * g.values.amax());
    }

    #[test]
    fn degenerate_gap_refused() {
        let s = make_sphere(3).unwrap();
        let g = make_disjoint_union(&s, &s).unwrap();
        let d = Discretization::new(&g, &Mesh::uniform(&g, 40).unwrap()).unwrap();
        let st = evaluate(&d, &Field::constant(&d.mesh, 1.0)).unwrap();
        assert!(matches!(gradient(&d, st.u.field(), &st.sol, 1e-8), Err(Error::DegenerateGap { .. })));
    }

    #[test]
    fn fixed_point_descends_on_sphere() {
        let d = s3(100);
        let mu1 = d.geom.consts.mu1_sphere;
        let u0 = start_field(&d, &Start::TwoBubbles { epsilon: 1e-2 }).unwrap();
        let params = OptimizerParams { max_iters: 30, ..Default::default() };
        let run = minimize_fixed_point(&d, &u0, &params, mu1).unwrap();
        assert!(run.trace.rows.windows(2).all(|w| w[1].j <= w[0].j + J_ROUNDOFF * w[0].j.abs()));
        assert_eq!(run.trace.monitor_violations, 0);
        assert!(run.j >= run.trace.lower_bound - monitor_tolerance(run.trace.lower_bound));
        assert!(run.report.nodal);
    }

    #[test]
    fn yamabe_estimate_on_sphere_and_union() {
        let d = s3(60);
        let y = yamabe_estimate(&d, &OptimizerParams::default()).unwrap();
        assert_relative_eq!(y.mu1, d.geom.consts.mu1_sphere, max_relative = 1e-9);
        let s = make_sphere(3).unwrap();
        let g = make_disjoint_union(&s, &s).unwrap();
        let d = Discretization::new(&g, &Mesh::uniform(&g, 40).unwrap()).unwrap();
        let y = yamabe_estimate(&d, &OptimizerParams::default()).unwrap();
        assert_relative_eq!(y.mu1, g.consts.mu1_sphere, max_relative = 1e-9);
    }

    #[test]
    fn trace_csv_header() {
        let d = s3(40);
        let params = OptimizerParams { max_iters: 2, ..Default::default() };
        let run = minimize_fixed_point(&d, &Field::constant(&d.mesh, 1.0), &params, d.geom.consts.mu1_sphere).unwrap();
        let mut buf = Vec::new();
        run.trace.write_csv(&["x".into()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# x\niter,J,lambda1,lambda2,gap,tau,lower_bound,u_vs_absw\n"));
    }
}
