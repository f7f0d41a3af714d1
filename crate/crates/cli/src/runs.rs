//! The batch runs behind each subcommand. Every run returns its records and a
//! verdict; emission is handled separately.

use rayon::prelude::*;
use serde::Serialize;
use steklov_core::analytic::{concentric_sigma, eccentric_bounds, ShellSpec};
use steklov_core::geometry::{build_mesh_with_layout, MeshLayout};
use steklov_core::instance::solve_instance;
use steklov_core::shape::{finite_differences, second_shape_derivative, DerivativeReport};
use steklov_core::{eig, fem};

use crate::config::Config;
use crate::error::CliError;

/// Relative slack on the concentric upper bound.
pub const BOUND_SLACK: f64 = 2e-3;
/// Consecutive sweep values must differ by more than this many solver
/// tolerances (relative) to count as a strict decrease.
pub const NOISE_FACTOR: f64 = 10.0;
pub const FIRST_AGREEMENT: f64 = 0.02;
pub const SECOND_AGREEMENT: f64 = 0.05;
pub const ORDER_RANGE: (f64, f64) = (1.8, 2.2);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub pass: bool,
    /// One line per violated condition; empty on PASS.
    pub failures: Vec<String>,
}

impl Verdict {
    fn from_failures(failures: Vec<String>) -> Self {
        Verdict { pass: failures.is_empty(), failures }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub t: f64,
    pub sigma: Option<f64>,
    pub sigma_prime: Option<f64>,
    pub sigma_second: Option<f64>,
    pub fd_first: Option<f64>,
    pub fd_second: Option<f64>,
    pub lower_bound: Option<f64>,
    pub upper_bound: Option<f64>,
    pub h: f64,
    pub sigma2_gap: Option<f64>,
    /// `∮ |∇u|²` over the hole, the scale for the stationarity test.
    pub flux_energy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SweepRecord {
    fn failed(t: f64, h: f64, error: String) -> Self {
        SweepRecord {
            t,
            sigma: None,
            sigma_prime: None,
            sigma_second: None,
            fd_first: None,
            fd_second: None,
            lower_bound: None,
            upper_bound: None,
            h,
            sigma2_gap: None,
            flux_energy: None,
            error: Some(error),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub t_max: f64,
    pub records: Vec<SweepRecord>,
    pub verdict: Verdict,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {workers} workers: {e}")))
}

/// Solves every offset of the sweep concurrently and judges monotonicity.
pub fn run_sweep(config: &Config) -> Result<Sweep, CliError> {
    let base = config.problem(config.direction, 0.0)?;
    let offsets = base.sweep_offsets(config.samples, config.safety);
    let bounds = match config.disk_radius() {
        Some(radius) => Some(eccentric_bounds(radius, config.hole_radius)?),
        None => None,
    };
    let records: Vec<SweepRecord> = pool(config.workers)?.install(|| {
        offsets
            .par_iter()
            .map(|&t| sweep_record(config, t, bounds).unwrap_or_else(|e| SweepRecord::failed(t, config.h, e.to_string())))
            .collect()
    });
    let verdict = sweep_verdict(&records, config.tol);
    Ok(Sweep { t_max: base.t_max(), records, verdict })
}

fn sweep_record(config: &Config, t: f64, bounds: Option<(f64, f64)>) -> Result<SweepRecord, CliError> {
    let problem = config.problem(config.direction, t)?;
    let solution = solve_instance(&problem, config.h, config.tol)?;
    let report = second_shape_derivative(&solution.flux, config.direction)?;
    let second = solution.second(config.tol)?;
    let fd = if config.finite_differences {
        let (d1, d2) = config.steps(problem.t_max());
        Some(finite_differences(&problem, config.h, d1, d2, config.tol)?)
    } else {
        None
    };
    Ok(SweepRecord {
        t,
        sigma: Some(solution.sigma()),
        sigma_prime: Some(report.sigma_prime),
        sigma_second: Some(report.sigma_second),
        fd_first: fd.as_ref().map(|f| f.fd_first),
        fd_second: fd.as_ref().map(|f| f.fd_second),
        lower_bound: bounds.map(|b| b.1),
        upper_bound: bounds.map(|b| b.0),
        h: config.h,
        sigma2_gap: Some(second.sigma / solution.sigma()),
        flux_energy: Some(solution.flux.integrate(|s| s.grad_norm.powi(2))),
        error: None,
    })
}

/// PASS iff every solve succeeded, σ decreases strictly beyond the noise
/// floor, the maximum sits at `t = 0`, the bounds hold when present, and
/// `σ′ < 0` for `t > 0` with `|σ′(0)| ≤ h ∮|∇u|²`.
pub fn sweep_verdict(records: &[SweepRecord], tol: f64) -> Verdict {
    let mut failures = Vec::new();
    for r in records {
        if let Some(e) = &r.error {
            failures.push(format!("solve failed at t={}: {e}", r.t));
        }
    }
    if !failures.is_empty() {
        return Verdict::from_failures(failures);
    }
    let sigma: Vec<f64> = records.iter().map(|r| r.sigma.unwrap()).collect();
    for (i, w) in sigma.windows(2).enumerate() {
        if !(w[0] - w[1] > NOISE_FACTOR * tol * w[0]) {
            failures.push(format!(
                "sigma does not decrease strictly between t={} and t={} ({} -> {})",
                records[i].t,
                records[i + 1].t,
                w[0],
                w[1]
            ));
        }
    }
    if let Some(first) = records.first() {
        let argmax = sigma.iter().enumerate().fold(0, |best, (i, &s)| if s > sigma[best] { i } else { best });
        if first.t != 0.0 || argmax != 0 {
            failures.push(format!("maximum of sigma is at t={}, not t=0", records[argmax].t));
        }
    }
    for r in records {
        let s = r.sigma.unwrap();
        if let (Some(lower), Some(upper)) = (r.lower_bound, r.upper_bound) {
            if !(lower <= s && s <= upper * (1.0 + BOUND_SLACK)) {
                failures.push(format!("bounds violated at t={}: {lower} <= {s} <= {upper}", r.t));
            }
        }
        let prime = r.sigma_prime.unwrap();
        if r.t == 0.0 {
            let limit = r.h * r.flux_energy.unwrap();
            if !(prime.abs() <= limit) {
                failures.push(format!("sigma' = {prime} at t=0 exceeds the mesh tolerance {limit}"));
            }
        } else if !(prime < 0.0) {
            failures.push(format!("sigma' = {prime} is not negative at t={}", r.t));
        }
    }
    Verdict::from_failures(failures)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub h: f64,
    pub angular: usize,
    pub radial: usize,
    pub nodes: usize,
    pub max_edge: f64,
    pub sigma: f64,
    /// Relative error against the concentric closed form.
    pub error: f64,
    /// `log₂(e_{k−1} / e_k)`.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Convergence {
    pub exact: f64,
    pub rows: Vec<ConvergenceRow>,
    pub verdict: Verdict,
}

/// Concentric disk shell on layouts doubled level by level, so `h` halves
/// exactly.
pub fn run_convergence(config: &Config) -> Result<Convergence, CliError> {
    let radius = config
        .disk_radius()
        .ok_or_else(|| CliError::Config("a convergence study needs a disk outer domain".into()))?;
    if config.levels < 2 {
        return Err(CliError::Config("a convergence study needs at least 2 levels".into()));
    }
    let problem = config.problem(config.direction, 0.0)?;
    let exact = concentric_sigma(ShellSpec::new(radius, config.hole_radius, 2)?);
    // The margin keeps refined layouts within their nominal h despite chord
    // lengths halving slightly slower than the angular step.
    let base = MeshLayout::for_problem(&problem, 0.99 * config.h0)?;
    let layouts: Vec<(usize, MeshLayout)> = (0..config.levels)
        .scan(base, |layout, level| {
            let current = *layout;
            *layout = layout.refined();
            Some((level, current))
        })
        .collect();
    let results = pool(config.workers)?.install(|| {
        layouts
            .par_iter()
            .map(|&(level, layout)| -> Result<ConvergenceRow, CliError> {
                let h = config.h0 / f64::from(1u32 << level);
                let mesh = build_mesh_with_layout(&problem, layout, h)?;
                let system = fem::assemble(&mesh)?;
                let sigma = eig::solve_smallest(&system, config.tol)?.sigma;
                Ok(ConvergenceRow {
                    level,
                    h,
                    angular: layout.angular,
                    radial: layout.radial,
                    nodes: mesh.node_count(),
                    max_edge: mesh.max_edge_length(),
                    sigma,
                    error: (sigma - exact).abs() / exact,
                    order: None,
                })
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    let mut rows = results;
    for k in 1..rows.len() {
        rows[k].order = Some((rows[k - 1].error / rows[k].error).log2());
    }
    let mut failures = Vec::new();
    for w in rows.windows(2) {
        if !(w[1].error < w[0].error) {
            failures.push(format!("error does not decrease from h={} to h={}", w[0].h, w[1].h));
        }
    }
    let last = rows.last().and_then(|r| r.order).unwrap();
    if !(ORDER_RANGE.0..=ORDER_RANGE.1).contains(&last) {
        failures.push(format!("final observed order {last} outside [{}, {}]", ORDER_RANGE.0, ORDER_RANGE.1));
    }
    Ok(Convergence { exact, rows, verdict: Verdict::from_failures(failures) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeCheck {
    #[serde(flatten)]
    pub report: Option<DerivativeReport>,
    pub first_ok: bool,
    pub second_ok: bool,
    pub signs_ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeChecks {
    pub checks: Vec<DerivativeCheck>,
    pub verdict: Verdict,
}

/// Formula against finite differences on every configured instance.
pub fn run_deriv_check(config: &Config) -> Result<DerivativeChecks, CliError> {
    let checks: Vec<DerivativeCheck> = pool(config.workers)?.install(|| {
        config
            .instances
            .par_iter()
            .map(|instance| {
                let w = instance.direction.unwrap_or(config.direction);
                let h = instance.h.unwrap_or(config.h);
                derivative_check(config, w, instance.offset, h).unwrap_or_else(|e| DerivativeCheck {
                    report: None,
                    first_ok: false,
                    second_ok: false,
                    signs_ok: false,
                    error: Some(e.to_string()),
                })
            })
            .collect()
    });
    let mut failures = Vec::new();
    for (c, instance) in checks.iter().zip(&config.instances) {
        let t = instance.offset;
        if let Some(e) = &c.error {
            failures.push(format!("t={t}: {e}"));
            continue;
        }
        if !c.first_ok {
            failures.push(format!("t={t}: first-derivative check failed"));
        }
        if !c.second_ok {
            failures.push(format!("t={t}: second-derivative formula differs from finite differences by more than {SECOND_AGREEMENT}"));
        }
        if !c.signs_ok {
            failures.push(format!("t={t}: sign conditions violated"));
        }
    }
    Ok(DerivativeChecks { checks, verdict: Verdict::from_failures(failures) })
}

fn derivative_check(config: &Config, w: [f64; 2], t: f64, h: f64) -> Result<DerivativeCheck, CliError> {
    let problem = config.problem(w, t)?;
    let solution = solve_instance(&problem, h, config.tol)?;
    let (d1, d2) = config.steps(problem.t_max());
    let fd = finite_differences(&problem, h, d1, d2, config.tol)?;
    let report = second_shape_derivative(&solution.flux, w)?.with_finite_differences(&fd);
    let first_ok = if t == 0.0 {
        report.sigma_prime.abs() <= h * solution.flux.integrate(|s| s.grad_norm.powi(2))
    } else {
        report.first_agreement().is_some_and(|a| a <= FIRST_AGREEMENT)
    };
    let second_ok = report.second_agreement().is_some_and(|a| a <= SECOND_AGREEMENT);
    let signs_ok = report.signs_hold();
    Ok(DerivativeCheck { report: Some(report), first_ok, second_ok, signs_ok, error: None })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bounds {
    pub outer_radius: f64,
    pub inner_radius: f64,
    pub dimension: u32,
    pub concentric_sigma: f64,
    /// The closed form for `n ≥ 3` comes from the radial harmonic profile.
    pub concentric_derived: bool,
    pub upper: f64,
    pub lower: f64,
    pub verdict: Verdict,
}

pub fn run_bounds(config: &Config) -> Result<Bounds, CliError> {
    let radius = config.disk_radius().ok_or_else(|| CliError::Config("bounds need a disk outer domain".into()))?;
    let spec = ShellSpec::new(radius, config.hole_radius, config.dimension)?;
    let (upper, lower) = eccentric_bounds(radius, config.hole_radius)?;
    let failures = if upper > lower { Vec::new() } else { vec![format!("upper {upper} <= lower {lower}")] };
    Ok(Bounds {
        outer_radius: radius,
        inner_radius: config.hole_radius,
        dimension: config.dimension,
        concentric_sigma: concentric_sigma(spec),
        concentric_derived: config.dimension >= 3,
        upper,
        lower,
        verdict: Verdict::from_failures(failures),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveSummary {
    pub t: f64,
    pub t_max: f64,
    pub nodes: usize,
    pub triangles: usize,
    pub min_quality: f64,
    pub residual: f64,
    pub iterations: usize,
    pub normalization: f64,
    pub min_relative_value: f64,
    pub reflection_defect: Option<f64>,
    pub sigma2: f64,
    pub sigma2_gap: f64,
    pub derivatives: DerivativeReport,
    pub verdict: Verdict,
}

/// One instance with its structural diagnostics.
pub fn run_solve(config: &Config) -> Result<SolveSummary, CliError> {
    let problem = config.problem(config.direction, config.offset)?;
    let solution = solve_instance(&problem, config.h, config.tol)?;
    let second = solution.second(config.tol)?;
    let derivatives = second_shape_derivative(&solution.flux, config.direction)?;
    let normalization = solution.system.boundary_mass.bilinear(&solution.pair.u, &solution.pair.u);
    let gap = second.sigma / solution.sigma();
    let mut failures = Vec::new();
    if !((normalization - 1.0).abs() <= 1e-12) {
        failures.push(format!("normalization {normalization} differs from 1"));
    }
    if !(solution.min_relative_value() >= -1e-8) {
        failures.push(format!("eigenfunction not positive: min/max = {}", solution.min_relative_value()));
    }
    if !(gap >= 1.001) {
        failures.push(format!("spectral gap {gap} below 1.001"));
    }
    if solution.reflection_defect().is_some_and(|d| !(d <= 1e-6)) {
        failures.push("eigenfunction not centrally symmetric".into());
    }
    Ok(SolveSummary {
        t: config.offset,
        t_max: problem.t_max(),
        nodes: solution.mesh.node_count(),
        triangles: solution.mesh.triangles.len(),
        min_quality: solution.mesh.min_quality(),
        residual: solution.pair.residual,
        iterations: solution.pair.iterations,
        normalization,
        min_relative_value: solution.min_relative_value(),
        reflection_defect: solution.reflection_defect(),
        sigma2: second.sigma,
        sigma2_gap: gap,
        derivatives,
        verdict: Verdict::from_failures(failures),
    })
}
