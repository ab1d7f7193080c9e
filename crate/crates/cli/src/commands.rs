use mu2_core::assembly::Discretization;
use mu2_core::bubbles::{
    aubin_bubble, c_eps_slope, epsilon_sweep, expected_norm_slope, monotone_trend, norm_scaling_fit, BubbleParams,
    ScalingRegime,
};
use mu2_core::field::Field;
use mu2_core::geometry::ModelGeometry;
use mu2_core::inequalities::{munk_table, run_suites, SuiteReport, SUITES};
use mu2_core::mesh::Mesh;
use mu2_core::optimize::{bounds, default_starts, multistart, yamabe_estimate, NodalReport, StartSummary};
use mu2_core::pencil::{solve_pencil_blocks, DEFAULT_DEFLATION_TOL};
use serde::Serialize;

use crate::config::{RunConfig, USpec};
use crate::error::CliError;
use crate::output::Artifacts;

fn setup(cfg: &RunConfig, elements: Option<usize>) -> Result<(ModelGeometry, Discretization), CliError> {
    let geom = cfg.geometry()?.build()?;
    let spec = elements.map_or(cfg.mesh, |m| cfg.mesh.with_elements(m));
    let mesh = Mesh::new(&geom, spec)?;
    let d = Discretization::new(&geom, &mesh)?;
    Ok((geom, d))
}

fn weight(cfg: &RunConfig, d: &Discretization) -> Result<Field, CliError> {
    Ok(match &cfg.u {
        USpec::Constant { value } => Field::constant(&d.mesh, *value),
        USpec::File { path } => {
            let file = std::fs::File::open(path)
                .map_err(|e| CliError::Config(format!("cannot open u file {}: {e}", path.display())))?;
            Field::read_csv(&d.mesh, file)?
        }
        USpec::Bubble { epsilon, delta } => aubin_bubble(d, &BubbleParams::at_pole(*epsilon, *delta))?.field,
    })
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct SpectrumRow {
    index: usize,
    lambda: f64,
    mu_estimate: f64,
    mu_closed_form: Option<f64>,
}

#[derive(Serialize)]
struct ConvergenceRow {
    #[serde(rename = "M")]
    m: usize,
    index: usize,
    lambda: f64,
    closed_form: Option<f64>,
    error: Option<f64>,
    ratio: Option<f64>,
}

/// Unit-weight eigenvalues rescaled to a constant weight `c`: `λ / c^{N−2}`.
fn closed_form(cfg: &RunConfig, geom: &ModelGeometry, k: usize) -> Option<Vec<f64>> {
    match cfg.u {
        USpec::Constant { value } => {
            let s = value.powf(geom.consts.weight_exponent());
            Some(geom.closed_form_spectrum(k).into_iter().map(|l| l / s).collect())
        }
        _ => None,
    }
}

fn solve(d: &Discretization, u: &Field, k: usize) -> Result<Vec<f64>, CliError> {
    let b = d.weighted_mass(u, d.critical_exponent() - 2.0)?;
    Ok(solve_pencil_blocks(d.stiffness(), &b, k, DEFAULT_DEFLATION_TOL)?.eigenvalues)
}

pub fn spectrum(cfg: &RunConfig) -> Result<(), CliError> {
    let (geom, d) = setup(cfg, None)?;
    let out = Artifacts::create(cfg)?;
    let u = weight(cfg, &d)?;
    let b = d.weighted_mass(&u, d.critical_exponent() - 2.0)?;
    let sol = solve_pencil_blocks(d.stiffness(), &b, cfg.k, DEFAULT_DEFLATION_TOL)?;
    let vol = d.volume(&u).powf(2.0 / d.dim());
    let closed = closed_form(cfg, &geom, cfg.k);
    let rows: Vec<SpectrumRow> = sol
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &l)| SpectrumRow {
            index: i + 1,
            lambda: l,
            mu_estimate: l * vol,
            mu_closed_form: closed.as_ref().map(|c| c[i] * vol),
        })
        .collect();
    out.csv("spectrum.csv", &rows)?;
    out.field("u.csv", &d.mesh, &u)?;
    for (i, v) in sol.eigenvectors.iter().enumerate() {
        out.field(&format!("eigenvector_{}.csv", i + 1), &d.mesh, v)?;
    }

    let mut conv = Vec::new();
    if !matches!(cfg.u, USpec::File { .. }) {
        let mut prev: Option<Vec<Option<f64>>> = None;
        for &m in &cfg.mesh_sizes {
            let (_, dm) = setup(cfg, Some(m))?;
            let lambdas = solve(&dm, &weight(cfg, &dm)?, cfg.k)?;
            let errors: Vec<Option<f64>> =
                (0..lambdas.len()).map(|i| closed.as_ref().map(|c| (lambdas[i] - c[i]).abs())).collect();
            for (i, &l) in lambdas.iter().enumerate() {
                let ratio = match (&prev, errors[i]) {
                    (Some(p), Some(e)) => p[i].map(|pe| pe / e),
                    _ => None,
                };
                conv.push(ConvergenceRow {
                    m,
                    index: i + 1,
                    lambda: l,
                    closed_form: closed.as_ref().map(|c| c[i]),
                    error: errors[i],
                    ratio,
                });
            }
            prev = Some(errors);
        }
        out.csv("convergence.csv", &conv)?;
    }

    println!("{:>5}  {:>20}  {:>20}  {:>20}", "index", "lambda", "mu_estimate", "mu_closed_form");
    for r in &rows {
        let cf = r.mu_closed_form.map_or("-".to_string(), |v| format!("{v:.12}"));
        println!("{:>5}  {:>20.12}  {:>20.12}  {:>20}", r.index, r.lambda, r.mu_estimate, cf);
    }
    println!("wrote {}", out.dir().display());
    Ok(())
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct Mu2Report<'a> {
    #[serde(rename = "J")]
    j: f64,
    mu1: f64,
    lower_bound: f64,
    upper_bound: f64,
    best_start: String,
    termination: String,
    monitor_violations: usize,
    nodal: &'a NodalReport,
    verdict: String,
    starts: &'a [StartSummary],
}

#[derive(Serialize)]
struct StartRow<'a> {
    start: &'a str,
    initial_j: Option<f64>,
    final_j: Option<f64>,
    iterations: usize,
    termination: String,
    monitor_violations: usize,
    error: &'a str,
}

/// Whether `w` keeps one sign on every component (up to relative noise).
fn one_signed_per_component(d: &Discretization, w: &Field) -> bool {
    let scale = w.values.amax().max(f64::MIN_POSITIVE);
    (0..d.mesh.components.len()).all(|c| {
        let vals = &w.values.as_slice()[d.mesh.range(c)];
        vals.iter().all(|&v| v >= -1e-8 * scale) || vals.iter().all(|&v| v <= 1e-8 * scale)
    })
}

pub fn mu2(cfg: &RunConfig) -> Result<(), CliError> {
    let (geom, d) = setup(cfg, None)?;
    let out = Artifacts::create(cfg)?;
    let ye = yamabe_estimate(&d, &cfg.optimizer)?;
    let (lb, ub) = bounds(&d, ye.mu1);
    let starts = cfg.starts.clone().unwrap_or_else(|| default_starts(cfg.seed));
    let ms = multistart(&d, &starts, &cfg.optimizer, ye.mu1, cfg.method, cfg.execution)?;
    let best = &ms.best;
    let j = best.j;
    let sphere = geom.consts.mu1_sphere;

    let mut verdict = vec![format!(
        "J = {j:.6}; 2^(2/n)*mu1 = {lb:.6} ({}); two-bubble bound {ub:.6} ({})",
        if j >= lb * (1.0 - 1e-6) { "respected" } else { "VIOLATED" },
        if j <= ub * (1.0 + 1e-6) { "holds" } else { "exceeded" },
    )];
    if geom.is_round_sphere() {
        verdict.push(format!("round sphere: J/(2^(2/n)*mu1) = {:.6}", j / lb));
    } else if geom.is_union_of_round_spheres() && geom.components.len() > 1 {
        let attained = (j / lb - 1.0).abs() < 5e-3 && one_signed_per_component(&d, &best.w);
        verdict.push(format!(
            "union of spheres: {}",
            if attained { "attained at the round factor, w one-signed per component" } else { "round-factor value not reached" }
        ));
    } else {
        verdict.push(format!(
            "J {} mu1(S^n) = {sphere:.6}",
            if j < sphere { "<" } else { ">=" }
        ));
    }
    let verdict = verdict.join("; ");

    let mut trace = std::io::BufWriter::new(std::fs::File::create(out.dir().join("trace.csv"))?);
    best.trace.write_csv(&cfg.preamble(), &mut trace)?;
    drop(trace);
    out.field("u.csv", &d.mesh, best.u.field())?;
    out.field("w.csv", &d.mesh, &best.w)?;
    let rows: Vec<StartRow> = ms
        .summaries
        .iter()
        .map(|s| StartRow {
            start: &s.label,
            initial_j: s.initial_j,
            final_j: s.final_j,
            iterations: s.iterations,
            termination: s.termination.map_or(String::new(), |t| t.to_string()),
            monitor_violations: s.monitor_violations,
            error: s.error.as_deref().unwrap_or(""),
        })
        .collect();
    out.csv("starts.csv", &rows)?;
    out.json(
        "report.json",
        &Mu2Report {
            j,
            mu1: ye.mu1,
            lower_bound: lb,
            upper_bound: ub,
            best_start: ms.best_start.to_string(),
            termination: best.trace.termination.to_string(),
            monitor_violations: best.trace.monitor_violations,
            nodal: &best.report,
            verdict: verdict.clone(),
            starts: &ms.summaries,
        },
    )?;

    for r in &rows {
        let fj = r.final_j.map_or("failed".to_string(), |v| format!("{v:.6}"));
        println!("{:<28} {:>14} {:>6} {}", r.start, fj, r.iterations, r.termination);
    }
    println!("best: {} ({})", ms.best_start, best.trace.termination);
    println!("{verdict}");
    Ok(())
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct SlopeRow {
    quantity: String,
    p: Option<f64>,
    regime: Option<ScalingRegime>,
    expected: f64,
    slope: f64,
    residual: Option<f64>,
    uncorrected_residual: Option<f64>,
    pass: bool,
}

pub fn bubbles(cfg: &RunConfig) -> Result<(), CliError> {
    let (geom, d) = setup(cfg, None)?;
    let template = BubbleParams { center: cfg.bubbles.center, ..BubbleParams::at_pole(1e-3, cfg.bubbles.delta) };
    let half = geom.components[0].length / 2.0;
    if cfg.bubbles.delta > half {
        return Err(CliError::Config(format!("bubbles.delta = {} exceeds half the profile length {half}", cfg.bubbles.delta)));
    }
    // Validate the cutoff before any output is written.
    aubin_bubble(&d, &template.with_epsilon(cfg.epsilon_grid.iter().copied().fold(f64::NAN, f64::max)))?;
    let out = Artifacts::create(cfg)?;

    let minimizer = if geom.is_round_sphere() {
        Some((Field::constant(&d.mesh, 1.0), geom.consts.mu1_sphere))
    } else {
        let ye = yamabe_estimate(&d, &cfg.optimizer)?;
        (ye.mu1 >= 0.0).then_some((ye.minimizer, ye.mu1))
    };
    let sweep = epsilon_sweep(
        &d,
        &template,
        &cfg.epsilon_grid,
        cfg.bubbles.p,
        minimizer.as_ref().map(|(v, m)| (v, *m)),
        cfg.execution,
    )?;
    out.csv("sweep.csv", &sweep)?;

    let n = d.dim();
    let tol = cfg.bubbles.slope_tol;
    let mut slopes = Vec::new();
    let c_expected = (n - 2.0) / 4.0;
    let c_slope = c_eps_slope(&d, &template, &cfg.fit_grid, cfg.execution)?;
    slopes.push(SlopeRow {
        quantity: "C_eps".into(),
        p: None,
        regime: None,
        expected: c_expected,
        slope: c_slope,
        residual: None,
        uncorrected_residual: None,
        pass: (c_slope - c_expected).abs() <= tol,
    });
    let ps = cfg.bubbles.fit_exponents.clone().unwrap_or_else(|| vec![1.0, n / (n - 2.0), d.critical_exponent() - 1.0]);
    for p in ps {
        let critical = expected_norm_slope(n, p).0 == ScalingRegime::Critical;
        let fit = norm_scaling_fit(&d, &template, p, &cfg.fit_grid, critical, cfg.execution)?;
        slopes.push(SlopeRow {
            quantity: "norm_p".into(),
            p: Some(p),
            regime: Some(fit.regime),
            expected: fit.expected_slope,
            slope: fit.slope,
            residual: Some(fit.residual),
            uncorrected_residual: fit.uncorrected_residual,
            pass: fit.passes(tol),
        });
    }
    out.csv("slopes.csv", &slopes)?;

    // Y(v_ε) approaches μ₁(𝕊ⁿ) from above as ε shrinks; skip the two largest ε.
    let ys: Vec<f64> = sweep.iter().map(|r| r.y).collect();
    let tail = &ys[..ys.len().saturating_sub(2)];
    println!("Y(v_eps) monotone in eps (after burn-in): {}", monotone_trend(tail, false, 1e-9));
    for s in &slopes {
        let label = s.p.map_or(s.quantity.clone(), |p| format!("{} p={p:.4}", s.quantity));
        println!("{label:<22} slope {:>9.5} expected {:>9.5} {}", s.slope, s.expected, if s.pass { "PASS" } else { "FAIL" });
    }
    let failed: Vec<String> = slopes.iter().filter(|s| !s.pass).map(|s| format!("{} (p={:?})", s.quantity, s.p)).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(format!("slope fits outside ±{tol}: {}", failed.join(", "))))
    }
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct SuiteRow<'a> {
    suite: &'a str,
    samples: usize,
    violations: usize,
    worst_margin: f64,
    tolerance: f64,
    seed: u64,
    passed: bool,
}

pub fn verify(cfg: &RunConfig) -> Result<(), CliError> {
    let names: Vec<&str> = cfg.suites.iter().map(String::as_str).collect();
    if let Some(bad) = names.iter().find(|s| !SUITES.contains(s)) {
        return Err(CliError::Config(format!("unknown suite `{bad}` (known: {})", SUITES.join(", "))));
    }
    let (_, d) = setup(cfg, None)?;
    let needs_sphere = names.iter().any(|s| matches!(*s, "sobolev" | "sharp_mu2"));
    if needs_sphere && !d.geom.is_round_sphere() {
        return Err(CliError::Config("the sobolev and sharp_mu2 suites need a round-sphere geometry".into()));
    }
    let out = Artifacts::create(cfg)?;
    let reports: Vec<SuiteReport> = run_suites(&names, &d, &cfg.battery, cfg.execution)?;
    out.json("suites.json", &reports)?;
    let rows: Vec<SuiteRow> = reports
        .iter()
        .map(|r| SuiteRow {
            suite: &r.suite,
            samples: r.samples,
            violations: r.violations,
            worst_margin: r.worst_margin,
            tolerance: r.tolerance,
            seed: r.seed,
            passed: r.passed(),
        })
        .collect();
    out.csv("suites.csv", &rows)?;
    if names.contains(&"munk") {
        out.csv("munk.csv", &munk_table(&cfg.battery.munk_dims, cfg.execution)?)?;
    }

    for r in &rows {
        println!(
            "{:<28} {:>7} samples {:>5} violations  worst margin {:>+.3e}  {}",
            r.suite,
            r.samples,
            r.violations,
            r.worst_margin,
            if r.passed { "PASS" } else { "FAIL" }
        );
    }
    let failing: Vec<&SuiteRow> = rows.iter().filter(|r| !r.passed).collect();
    if failing.is_empty() {
        return Ok(());
    }
    let worst = failing.iter().map(|r| r.worst_margin).fold(f64::INFINITY, f64::min);
    let list: Vec<&str> = failing.iter().map(|r| r.suite).collect();
    Err(CliError::Verification(format!("{} failing (worst margin {worst:+.3e})", list.join(", "))))
}
