//! CSV and JSON emission. JSON wraps results with the resolved configuration;
//! CSV carries records only.

use std::io::Write;

use serde::Serialize;

use crate::config::Config;
use crate::error::CliError;
use crate::runs::{Bounds, Convergence, DerivativeChecks, SolveSummary, Sweep, Verdict};

pub const SWEEP_HEADER: &str = "t,sigma,sigma_prime,sigma_second,fd_first,fd_second,lower_bound,upper_bound,h,sigma2_gap";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    seedless: bool,
    config: &'a Config,
    result: &'a T,
}

pub fn write_json<T: Serialize>(
    out: impl Write,
    command: &str,
    config: &Config,
    result: &T,
) -> Result<(), CliError> {
    let envelope = Envelope { command, seedless: true, config, result };
    let mut out = out;
    serde_json::to_writer_pretty(&mut out, &envelope)?;
    writeln!(out)?;
    Ok(())
}

fn write_rows<T: Serialize>(out: impl Write, rows: impl IntoIterator<Item = T>) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row).map_err(|e| CliError::Config(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SweepRow {
    t: f64,
    sigma: Option<f64>,
    sigma_prime: Option<f64>,
    sigma_second: Option<f64>,
    fd_first: Option<f64>,
    fd_second: Option<f64>,
    lower_bound: Option<f64>,
    upper_bound: Option<f64>,
    h: f64,
    sigma2_gap: Option<f64>,
}

/// Failed records keep their `t` and `h` with empty value fields.
pub fn write_sweep_csv(out: impl Write, sweep: &Sweep) -> Result<(), CliError> {
    write_rows(
        out,
        sweep.records.iter().map(|r| SweepRow {
            t: r.t,
            sigma: r.sigma,
            sigma_prime: r.sigma_prime,
            sigma_second: r.sigma_second,
            fd_first: r.fd_first,
            fd_second: r.fd_second,
            lower_bound: r.lower_bound,
            upper_bound: r.upper_bound,
            h: r.h,
            sigma2_gap: r.sigma2_gap,
        }),
    )
}

pub fn write_convergence_csv(out: impl Write, run: &Convergence) -> Result<(), CliError> {
    write_rows(out, &run.rows)
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct DerivativeRow {
    t: Option<f64>,
    sigma: Option<f64>,
    sigma_prime: Option<f64>,
    term_I: Option<f64>,
    term_II: Option<f64>,
    term_III_extra: Option<f64>,
    sigma_second: Option<f64>,
    fd_first: Option<f64>,
    fd_second: Option<f64>,
    h: Option<f64>,
    delta: Option<f64>,
    delta_second: Option<f64>,
    first_ok: bool,
    second_ok: bool,
    signs_ok: bool,
    error: Option<String>,
}

pub fn write_derivatives_csv(out: impl Write, run: &DerivativeChecks) -> Result<(), CliError> {
    write_rows(
        out,
        run.checks.iter().map(|c| {
            let r = c.report.as_ref();
            DerivativeRow {
                t: r.map(|r| r.t),
                sigma: r.map(|r| r.sigma),
                sigma_prime: r.map(|r| r.sigma_prime),
                term_I: r.map(|r| r.term_i),
                term_II: r.map(|r| r.term_ii),
                term_III_extra: r.map(|r| r.term_iii_extra),
                sigma_second: r.map(|r| r.sigma_second),
                fd_first: r.and_then(|r| r.fd_first),
                fd_second: r.and_then(|r| r.fd_second),
                h: r.map(|r| r.h),
                delta: r.and_then(|r| r.delta),
                delta_second: r.and_then(|r| r.delta_second),
                first_ok: c.first_ok,
                second_ok: c.second_ok,
                signs_ok: c.signs_ok,
                error: c.error.clone(),
            }
        }),
    )
}

#[derive(Serialize)]
struct SolveRow {
    t: f64,
    t_max: f64,
    sigma: f64,
    residual: f64,
    iterations: usize,
    nodes: usize,
    min_quality: f64,
    sigma2: f64,
    sigma2_gap: f64,
    sigma_prime: f64,
    sigma_second: f64,
}

pub fn write_solve_csv(out: impl Write, s: &SolveSummary) -> Result<(), CliError> {
    write_rows(
        out,
        [SolveRow {
            t: s.t,
            t_max: s.t_max,
            sigma: s.derivatives.sigma,
            residual: s.residual,
            iterations: s.iterations,
            nodes: s.nodes,
            min_quality: s.min_quality,
            sigma2: s.sigma2,
            sigma2_gap: s.sigma2_gap,
            sigma_prime: s.derivatives.sigma_prime,
            sigma_second: s.derivatives.sigma_second,
        }],
    )
}

#[derive(Serialize)]
struct BoundsRow {
    outer_radius: f64,
    inner_radius: f64,
    dimension: u32,
    concentric_sigma: f64,
    concentric_derived: bool,
    upper: f64,
    lower: f64,
}

pub fn write_bounds_csv(out: impl Write, b: &Bounds) -> Result<(), CliError> {
    write_rows(
        out,
        [BoundsRow {
            outer_radius: b.outer_radius,
            inner_radius: b.inner_radius,
            dimension: b.dimension,
            concentric_sigma: b.concentric_sigma,
            concentric_derived: b.concentric_derived,
            upper: b.upper,
            lower: b.lower,
        }],
    )
}

/// `verdict: PASS` or `verdict: FAIL` followed by one line per failure.
pub fn write_verdict(mut out: impl Write, verdict: &Verdict) -> std::io::Result<()> {
    writeln!(out, "verdict: {}", if verdict.pass { "PASS" } else { "FAIL" })?;
    for f in &verdict.failures {
        writeln!(out, "  {f}")?;
    }
    Ok(())
}
