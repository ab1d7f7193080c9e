//! Concentrating test functions: the Aubin bubble `v_ε`, its norm scaling
//! laws, two-bubble conformal factors and the negative-curvature divergence
//! construction.

use serde::{Deserialize, Serialize};

use crate::assembly::Discretization;
use crate::exec::{self, Execution};
use crate::field::{ConformalFactor, Field};
use crate::functionals::{sup_over_span, sup_over_subspace, yamabe_y};
use crate::geometry::EndCondition;
use crate::pencil::{solve_pencil_blocks, DEFAULT_DEFLATION_TOL};
use crate::{Error, Result};

/// Nodes required inside `r ≤ √ε`.
pub const MIN_CORE_NODES: usize = 8;

/// Where the bubble concentrates on its component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "at", rename_all = "snake_case")]
pub enum BubbleCenter {
    /// the end `t = 0`
    Start,
    /// the end `t = T`
    End,
    Interior { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubbleParams {
    pub epsilon: f64,
    /// cutoff radius: `η = 1` on `r ≤ δ`, `η = 0` on `r ≥ 2δ`
    pub delta: f64,
    pub component: usize,
    pub center: BubbleCenter,
}

impl BubbleParams {
    pub fn at_pole(epsilon: f64, delta: f64) -> Self {
        Self { epsilon, delta, component: 0, center: BubbleCenter::Start }
    }

    pub fn with_epsilon(self, epsilon: f64) -> Self {
        Self { epsilon, ..self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bubble {
    pub field: Field,
    /// normalization constant making `∫ v_ε^N = 1`
    pub c_eps: f64,
    /// `∫ (ε^{(n-2)/4} η (ε + r²)^{(2-n)/2})^N`, bounded uniformly in `ε`
    pub scaled_mass: f64,
    pub params: BubbleParams,
}

/// Quintic smoothstep cutoff, `C²`, with `|η'| ≤ 15/(8δ)`.
pub fn cutoff(r: f64, delta: f64) -> f64 {
    let s = ((r - delta) / delta).clamp(0.0, 1.0);
    1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

fn distance(center: BubbleCenter, t: f64, length: f64, periodic: bool) -> f64 {
    match center {
        BubbleCenter::Start => t,
        BubbleCenter::End => length - t,
        BubbleCenter::Interior { t: t0 } => {
            let r = (t - t0).abs();
            if periodic {
                r.min(length - r)
            } else {
                r
            }
        }
    }
}

fn validate(d: &Discretization, p: &BubbleParams) -> Result<()> {
    if !(p.epsilon > 0.0) || !(p.delta > 0.0) {
        return Err(Error::Precondition(format!("bubble needs ε > 0 and δ > 0 (got {}, {})", p.epsilon, p.delta)));
    }
    let comp = d
        .geom
        .components
        .get(p.component)
        .ok_or_else(|| Error::Precondition(format!("no component {}", p.component)))?;
    let length = comp.length;
    match p.center {
        BubbleCenter::Start | BubbleCenter::End => {
            if comp.end != EndCondition::DensityVanishing {
                return Err(Error::Precondition("pole bubbles need a component with density-vanishing ends".into()));
            }
            if 2.0 * p.delta >= length {
                return Err(Error::Precondition(format!("cutoff 2δ = {} must stay below T = {length}", 2.0 * p.delta)));
            }
        }
        BubbleCenter::Interior { t } => {
            let room = if comp.is_periodic() { length / 2.0 } else { t.min(length - t) };
            if !(0.0..=length).contains(&t) || 2.0 * p.delta >= room {
                return Err(Error::Precondition(format!("cutoff support of radius {} does not fit around t = {t}", 2.0 * p.delta)));
            }
        }
    }
    Ok(())
}

/// `v_ε = C_ε η(r) (ε + r²)^{(2-n)/2}` on the chosen component, zero elsewhere.
pub fn aubin_bubble(d: &Discretization, p: &BubbleParams) -> Result<Bubble> {
    validate(d, p)?;
    let comp = &d.geom.components[p.component];
    let cm = &d.mesh.components[p.component];
    let radius = p.epsilon.sqrt();
    let found = cm.nodes.iter().filter(|&&t| distance(p.center, t, comp.length, cm.periodic) <= radius).count();
    if found < MIN_CORE_NODES {
        return Err(Error::UnderResolved { required: MIN_CORE_NODES, found });
    }
    let n = d.dim();
    let scale = p.epsilon.powf((n - 2.0) / 4.0);
    let raw = Field::from_fn(&d.mesh, |c, t| {
        if c != p.component {
            return 0.0;
        }
        let r = distance(p.center, t, comp.length, cm.periodic);
        scale * cutoff(r, p.delta) * (p.epsilon + r * r).powf((2.0 - n) / 2.0)
    });
    let scaled_mass = d.volume(&raw);
    let norm = scaled_mass.powf(1.0 / d.critical_exponent());
    Ok(Bubble { field: raw.scaled(1.0 / norm), c_eps: scale / norm, scaled_mass, params: *p })
}

/// `count` log-spaced points in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

/// Twelve points in `[1e-4, 1e-1]`.
pub fn default_epsilon_grid() -> Vec<f64> {
    log_grid(1e-4, 1e-1, 12)
}

/// Twelve points in `[1e-6, 1e-3]`, deep enough in the asymptotic regime for
/// slope fits to settle.
pub fn fit_epsilon_grid() -> Vec<f64> {
    log_grid(1e-6, 1e-3, 12)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingRegime {
    Subcritical,
    Critical,
    Supercritical,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub p: f64,
    pub regime: ScalingRegime,
    pub expected_slope: f64,
    pub slope: f64,
    /// RMS residual of the least-squares line
    pub residual: f64,
    pub log_corrected: bool,
    /// residual of the plain fit, reported alongside a log-corrected one
    pub uncorrected_residual: Option<f64>,
}

impl ScalingFit {
    pub fn passes(&self, tol: f64) -> bool {
        (self.slope - self.expected_slope).abs() <= tol
    }
}

/// Least-squares line `y = a + s x`; returns `(s, a, rms residual)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let s = sxy / sxx;
    let a = my - s * mx;
    let rms = (x.iter().zip(y).map(|(a0, b)| (b - a - s * a0).powi(2)).sum::<f64>() / n).sqrt();
    (s, a, rms)
}

/// Exponent of `∫ v_ε^p ~ ε^s` predicted by the three-regime law.
pub fn expected_norm_slope(n: f64, p: f64) -> (ScalingRegime, f64) {
    let pc = n / (n - 2.0);
    if (p - pc).abs() <= 1e-9 * pc {
        (ScalingRegime::Critical, n / 4.0)
    } else if p > pc {
        (ScalingRegime::Supercritical, (2.0 * n - (n - 2.0) * p) / 4.0)
    } else {
        (ScalingRegime::Subcritical, (n - 2.0) * p / 4.0)
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 8 {
        return Err(Error::Precondition(format!("ε-grid needs at least 8 points, got {}", grid.len())));
    }
    let ratios: Vec<f64> = grid.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    if ratios.iter().any(|&r| !(r > 0.0) || (r - ratios[0]).abs() > 1e-6 * ratios[0].abs()) {
        return Err(Error::Precondition("ε-grid must be increasing and log-spaced".into()));
    }
    Ok(())
}

/// Slope of `log ∫ v_ε^p` against `log ε`. At the critical exponent
/// `p = n/(n-2)` the law carries a `|log ε|` factor, which must be divided out
/// (`log_correction`); the plain fit's residual is reported for comparison.
pub fn norm_scaling_fit(
    d: &Discretization,
    template: &BubbleParams,
    p: f64,
    grid: &[f64],
    log_correction: bool,
    exec: Execution,
) -> Result<ScalingFit> {
    check_grid(grid)?;
    let (regime, expected_slope) = expected_norm_slope(d.dim(), p);
    if regime == ScalingRegime::Critical && !log_correction {
        return Err(Error::Precondition(format!("p = {p} sits on the regime boundary; enable the log correction")));
    }
    let integrals: Vec<f64> = exec::map(exec, grid, |&e| {
        aubin_bubble(d, &template.with_epsilon(e)).map(|b| d.integrate_power(&b.field, p))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let x: Vec<f64> = grid.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = integrals.iter().map(|v| v.ln()).collect();
    let (plain_slope, _, plain_res) = linear_fit(&x, &y);
    if log_correction {
        let yc: Vec<f64> = y.iter().zip(grid).map(|(v, e)| v - e.ln().abs().ln()).collect();
        let (slope, _, residual) = linear_fit(&x, &yc);
        Ok(ScalingFit { p, regime, expected_slope, slope, residual, log_corrected: true, uncorrected_residual: Some(plain_res) })
    } else {
        Ok(ScalingFit {
            p,
            regime,
            expected_slope,
            slope: plain_slope,
            residual: plain_res,
            log_corrected: false,
            uncorrected_residual: None,
        })
    }
}

/// Log-log slope of `C_ε`, expected `(n-2)/4`.
pub fn c_eps_slope(d: &Discretization, template: &BubbleParams, grid: &[f64], exec: Execution) -> Result<f64> {
    check_grid(grid)?;
    let c: Vec<f64> = exec::map(exec, grid, |&e| aubin_bubble(d, &template.with_epsilon(e)).map(|b| b.c_eps))
        .into_iter()
        .collect::<Result<_>>()?;
    let x: Vec<f64> = grid.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = c.iter().map(|v| v.ln()).collect();
    Ok(linear_fit(&x, &y).0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoBubble {
    pub u: ConformalFactor,
    pub v_eps: Field,
    pub v: Field,
    pub yamabe_eps: f64,
    /// `(μ₁^{n/2} + μ₁(𝕊ⁿ)^{n/2})^{2/n}`
    pub bound_target: f64,
}

impl TwoBubble {
    /// `sup` of `F(u_ε, ·)` over `span(v_ε, v)`.
    pub fn sup_span(&self, d: &Discretization) -> Result<f64> {
        sup_over_span(d, &self.u, &self.v_eps, &self.v)
    }
}

/// `u_ε = Y(v_ε)^{1/(N-2)} v_ε + μ₁^{1/(N-2)} v` with `v` a volume-normalized
/// Yamabe minimizer and `μ₁ = Y(v)`; for `μ₁ = 0` the factor is `v_ε` alone.
pub fn two_bubble_config(d: &Discretization, params: &BubbleParams, minimizer: &Field, mu1: f64) -> Result<TwoBubble> {
    let scale = 1e-10 * d.geom.consts.mu1_sphere;
    if mu1 < -scale {
        return Err(Error::Precondition(format!("μ₁ estimate {mu1} is negative; see the divergence construction")));
    }
    let bubble = aubin_bubble(d, params)?;
    let v = d.normalize_volume(&minimizer.abs())?.into_field();
    let y = yamabe_y(d, &bubble.field)?;
    let q = 1.0 / (d.critical_exponent() - 2.0);
    let raw = if mu1.abs() <= scale { bubble.field.clone() } else { bubble.field.combine(y.powf(q), &v, mu1.powf(q)) };
    let u = d.normalize_volume(&raw)?;
    let bound_target = d.geom.consts.two_bubble_upper_bound(mu1.max(0.0));
    Ok(TwoBubble { u, v_eps: bubble.field, v, yamabe_eps: y, bound_target })
}

/// Two bubbles at both poles of component 0, normalized.
pub fn antipodal_bubbles(d: &Discretization, epsilon: f64, delta: f64) -> Result<(ConformalFactor, Field, Field)> {
    let north = aubin_bubble(d, &BubbleParams::at_pole(epsilon, delta))?;
    let south = aubin_bubble(d, &BubbleParams { center: BubbleCenter::End, ..BubbleParams::at_pole(epsilon, delta) })?;
    let u = d.normalize_volume(&north.field.combine(1.0, &south.field, 1.0))?;
    Ok((u, north.field, south.field))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    #[serde(rename = "Y")]
    pub y: f64,
    #[serde(rename = "C_eps")]
    pub c_eps: f64,
    pub norm_p: f64,
    pub sup_span: f64,
    pub bound_target: f64,
}

/// One row per `ε`: `Y(v_ε)`, `C_ε`, `∫ v_ε^p` and, when a minimizer with its
/// `μ₁` is supplied, the two-bubble sup against its target.
pub fn epsilon_sweep(
    d: &Discretization,
    template: &BubbleParams,
    grid: &[f64],
    p: f64,
    minimizer: Option<(&Field, f64)>,
    exec: Execution,
) -> Result<Vec<SweepRow>> {
    exec::map(exec, grid, |&e| {
        let params = template.with_epsilon(e);
        let b = aubin_bubble(d, &params)?;
        let (sup_span, bound_target) = match minimizer {
            Some((v, mu1)) => {
                let tb = two_bubble_config(d, &params, v, mu1)?;
                (tb.sup_span(d)?, tb.bound_target)
            }
            None => (f64::NAN, f64::NAN),
        };
        Ok(SweepRow { epsilon: e, y: yamabe_y(d, &b.field)?, c_eps: b.c_eps, norm_p: d.integrate_power(&b.field, p), sup_span, bound_target })
    })
    .into_iter()
    .collect()
}

/// Whether `values` is monotone (non-increasing if `decreasing`) up to a
/// relative noise allowance.
pub fn monotone_trend(values: &[f64], decreasing: bool, rel_noise: f64) -> bool {
    values.windows(2).all(|w| {
        let slack = rel_noise * w[0].abs().max(w[1].abs());
        if decreasing {
            w[1] <= w[0] + slack
        } else {
            w[1] >= w[0] - slack
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceDemo {
    pub k: usize,
    /// `λ_k` of the plain pencil `(A, M₀)`
    pub plain_lambda_k: f64,
    pub epsilons: Vec<f64>,
    pub values: Vec<f64>,
    pub deflated_ranks: Vec<usize>,
}

/// With `λ_k(A, M₀) < 0`, the weight `u_ε = v_ε + ε` makes the sup of `F` over
/// the first `k` plain eigenvectors diverge to `-∞` as `ε → 0`.
pub fn negative_divergence_demo(
    d: &Discretization,
    template: &BubbleParams,
    grid: &[f64],
    k: usize,
    exec: Execution,
) -> Result<DivergenceDemo> {
    let plain = solve_pencil_blocks(d.stiffness(), d.plain_mass(), k, DEFAULT_DEFLATION_TOL)?;
    let plain_lambda_k = plain.eigenvalues[k - 1];
    if plain_lambda_k >= 0.0 {
        return Err(Error::Precondition(format!("λ_{k} = {plain_lambda_k} of the plain pencil is not negative")));
    }
    let vs: Vec<&Field> = plain.eigenvectors.iter().collect();
    let rows: Vec<(f64, usize)> = exec::map(exec, grid, |&e| {
        let b = aubin_bubble(d, &template.with_epsilon(e))?;
        let u = ConformalFactor::new(b.field.map(|v| v + e))?;
        let w = d.weighted_mass(u.field(), d.critical_exponent() - 2.0)?;
        // the sup over a fixed subspace deflates nothing; every row with a
        // positive weight counts
        let rank = w.blocks.iter().flat_map(|b| &b.diag).filter(|&&v| v > 0.0).count();
        Ok((sup_over_subspace(d, &u, &vs)?, rank))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let (values, deflated_ranks) = rows.into_iter().unzip();
    Ok(DivergenceDemo { k, plain_lambda_k, epsilons: grid.to_vec(), values, deflated_ranks })
}
