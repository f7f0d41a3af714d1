//! Smallest eigenpairs of the pencil `K u = σ M_out u` on the Dirichlet-reduced
//! space, by inverse iteration with a single sparse factorization.

use std::io;

use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::fem::SteklovSystem;
use crate::sparse::{dot, norm, CsrMatrix};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const MAX_TOLERANCE: f64 = 1e-4;
pub const ITERATION_CAP: usize = 10_000;
const BLOCK: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub sigma: f64,
    /// Nodal values over all mesh nodes, zero on Dirichlet nodes,
    /// normalized so that `uᵀ M_out u = 1` and `max(u) > 0`.
    pub u: Vec<f64>,
    /// `‖K u − σ M_out u‖ / ‖σ M_out u‖` over free nodes.
    pub residual: f64,
    pub iterations: usize,
    /// Eigenvalue estimate after each iteration.
    pub history: Vec<f64>,
}

impl EigenPair {
    /// Text export: `sigma <value>`, `residual <value>`, then one nodal value
    /// per line in mesh node order.
    pub fn write_to(&self, mut out: impl io::Write) -> io::Result<()> {
        writeln!(out, "sigma {:.16e}", self.sigma)?;
        writeln!(out, "residual {:.16e}", self.residual)?;
        for v in &self.u {
            writeln!(out, "{v:.16e}")?;
        }
        Ok(())
    }
}

fn check_tolerance(tol: f64) -> Result<()> {
    if tol > 0.0 && tol <= MAX_TOLERANCE {
        Ok(())
    } else {
        Err(Error::BadParameter(format!("tolerance must lie in (0, {MAX_TOLERANCE}], got {tol}")))
    }
}

fn relative_residual(k: &CsrMatrix, m: &CsrMatrix, sigma: f64, x: &[f64]) -> f64 {
    let kx = k.matvec(x);
    let mx = m.matvec(x);
    let r: Vec<f64> = kx.iter().zip(&mx).map(|(a, b)| a - sigma * b).collect();
    norm(&r) / (sigma * norm(&mx))
}

/// Rescales to unit `M_out` norm and flips the sign so the entry of largest
/// magnitude is positive.
fn normalize(m: &CsrMatrix, x: &mut [f64]) {
    let scale = m.bilinear(x, x).sqrt();
    let peak = x.iter().copied().fold(0.0_f64, |a, v| if v.abs() > a.abs() { v } else { a });
    let s = peak.signum() / scale;
    x.iter_mut().for_each(|v| *v *= s);
}

/// Smallest eigenpair by power iteration on `K⁻¹ M_out`.
///
/// Iterates stay in the range of `K⁻¹ M_out`, which excludes the
/// infinite-eigenvalue directions of the rank-deficient mass.
pub fn solve_smallest(system: &SteklovSystem, tol: f64) -> Result<EigenPair> {
    check_tolerance(tol)?;
    let factor = system.factor()?;
    let k = system.reduced_stiffness();
    let m = system.reduced_mass();
    let mut x = vec![1.0; system.free_count()];
    let mut history = Vec::new();
    let mut previous = f64::INFINITY;
    for iteration in 1..=ITERATION_CAP {
        let b = m.matvec(&x);
        let mut y = factor.solve(&b);
        let my = m.matvec(&y);
        let yby = dot(&y, &my);
        if !(yby > 0.0) {
            return Err(Error::ZeroBoundaryTrace);
        }
        // Rayleigh quotient of y, using K y = M x.
        let sigma = dot(&y, &b) / yby;
        history.push(sigma);
        let scale = yby.sqrt();
        y.iter_mut().for_each(|v| *v /= scale);
        let residual = relative_residual(k, m, sigma, &y);
        let settled = (previous - sigma).abs() < tol * sigma;
        previous = sigma;
        x = y;
        if settled && residual < tol {
            normalize(m, &mut x);
            return Ok(EigenPair { sigma, u: system.expand(&x), residual, iterations: iteration, history });
        }
    }
    Err(Error::NotConverged {
        iterations: ITERATION_CAP,
        residual: relative_residual(k, m, previous, &x),
    })
}

/// Second eigenpair: the smallest one `M_out`-orthogonal to `first`.
pub fn solve_second(system: &SteklovSystem, first: &EigenPair, tol: f64) -> Result<EigenPair> {
    solve_deflated(system, &[first], tol)
}

/// Smallest eigenpair in the `M_out`-orthogonal complement of `locked`.
///
/// Uses a small block subspace iteration with Rayleigh-Ritz, which converges
/// at the rate set by the first eigenvalue outside the block, so repeated
/// eigenvalues (as in concentric shells) do not stall it.
pub fn solve_deflated(system: &SteklovSystem, locked: &[&EigenPair], tol: f64) -> Result<EigenPair> {
    check_tolerance(tol)?;
    let factor = system.factor()?;
    let k = system.reduced_stiffness();
    let m = system.reduced_mass();
    let n = system.free_count();
    let locked: Vec<Vec<f64>> = locked
        .iter()
        .map(|p| {
            let mut v = system.restrict(&p.u);
            let s = m.bilinear(&v, &v).sqrt();
            v.iter_mut().for_each(|x| *x /= s);
            v
        })
        .collect();
    let deflate = |z: &mut Vec<f64>| {
        for l in &locked {
            let c = dot(l, &m.matvec(z));
            z.iter_mut().zip(l).for_each(|(a, b)| *a -= c * b);
        }
    };
    // Deterministic, generic start block (Weyl sequences).
    let mut block: Vec<Vec<f64>> = (0..BLOCK)
        .map(|j| {
            let alpha = (2.0_f64 + j as f64).sqrt().fract();
            (0..n).map(|i| ((i + 1) as f64 * alpha).fract() - 0.5).collect()
        })
        .collect();
    let mut history = Vec::new();
    let mut previous = f64::INFINITY;
    for iteration in 1..=ITERATION_CAP {
        block.iter_mut().for_each(|z| deflate(z));
        let rhs: Vec<Vec<f64>> = block.iter().map(|z| m.matvec(z)).collect();
        let mut y = factor.solve_many(&rhs);
        y.iter_mut().for_each(|z| deflate(z));
        let ritz = rayleigh_ritz(k, m, &y)?;
        let (sigma, _) = ritz[0];
        block = ritz.into_iter().map(|(_, v)| v).collect();
        history.push(sigma);
        let residual = relative_residual(k, m, sigma, &block[0]);
        let settled = (previous - sigma).abs() < tol * sigma;
        previous = sigma;
        if settled && residual < tol {
            let mut x = block.swap_remove(0);
            normalize(m, &mut x);
            return Ok(EigenPair { sigma, u: system.expand(&x), residual, iterations: iteration, history });
        }
    }
    Err(Error::NotConverged {
        iterations: ITERATION_CAP,
        residual: relative_residual(k, m, previous, &block[0]),
    })
}

/// Ritz pairs of the pencil on span(`y`), ascending in σ, vectors with unit
/// `M` norm.
fn rayleigh_ritz(k: &CsrMatrix, m: &CsrMatrix, y: &[Vec<f64>]) -> Result<Vec<(f64, Vec<f64>)>> {
    let p = y.len();
    let ky: Vec<Vec<f64>> = y.iter().map(|v| k.matvec(v)).collect();
    let my: Vec<Vec<f64>> = y.iter().map(|v| m.matvec(v)).collect();
    let gram_k = Mat::<f64>::from_fn(p, p, |i, j| 0.5 * (dot(&y[i], &ky[j]) + dot(&y[j], &ky[i])));
    let gram_m = Mat::<f64>::from_fn(p, p, |i, j| 0.5 * (dot(&y[i], &my[j]) + dot(&y[j], &my[i])));
    // K-orthonormal basis W = Y V S^{-1/2}; K is definite on the free space.
    let ek = gram_k.self_adjoint_eigen(Side::Lower).map_err(|_| Error::SingularSystem)?;
    let (sk, vk) = (ek.S(), ek.U());
    let top = (0..p).map(|i| sk[i]).fold(0.0_f64, f64::max);
    let keep: Vec<usize> = (0..p).filter(|&i| sk[i] > 1e-14 * top).collect();
    let q = keep.len();
    let t = Mat::<f64>::from_fn(p, q, |i, c| vk[(i, keep[c])] / sk[keep[c]].sqrt());
    let reduced_m = t.transpose() * &gram_m * &t;
    let em = reduced_m.self_adjoint_eigen(Side::Lower).map_err(|_| Error::SingularSystem)?;
    let (sm, vm) = (em.S(), em.U());
    let coeffs = &t * vm;
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..q)
        .filter(|&c| sm[c] > 0.0)
        .map(|c| {
            let mut v = vec![0.0; y[0].len()];
            for (i, yi) in y.iter().enumerate() {
                let a = coeffs[(i, c)];
                v.iter_mut().zip(yi).for_each(|(x, b)| *x += a * b);
            }
            let s = m.bilinear(&v, &v).sqrt();
            v.iter_mut().for_each(|x| *x /= s);
            (1.0 / sm[c], v)
        })
        .collect();
    if pairs.is_empty() {
        return Err(Error::ZeroBoundaryTrace);
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs)
}

/// `(uᵀ K u) / (uᵀ M_out u)` for a full nodal vector.
pub fn rayleigh(system: &SteklovSystem, u: &[f64]) -> Result<f64> {
    let denominator = system.boundary_mass.bilinear(u, u);
    if !(denominator > 0.0) {
        return Err(Error::ZeroBoundaryTrace);
    }
    Ok(system.stiffness.bilinear(u, u) / denominator)
}
