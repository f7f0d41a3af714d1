//! Derivatives of the first eigenvalue with respect to the hole offset: the
//! boundary-integral formulas, the eigenfunction-derivative problem and
//! finite-difference oracles.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eig::{self, EigenPair};
use crate::error::{Error, Result};
use crate::fem::{self, FluxTrace, SteklovSystem};
use crate::geometry::{build_disk_mesh, build_mesh_with_layout, AnnulusProblem, Mesh, MeshLayout};
use crate::instance::{solve_with_layout, Solution};
use crate::sparse::{dot, norm};

/// Space dimension of every discrete formula.
pub const DIMENSION: u32 = 2;
pub const MIN_TRACE_SAMPLES: usize = 16;
/// Largest relative solvability defect accepted by the derivative problem.
pub const COMPATIBILITY_LIMIT: f64 = 1e-6;
/// Finite-difference steps as fractions of `t_max`.
pub const FIRST_STEP_FRACTION: f64 = 1e-3;
pub const SECOND_STEP_FRACTION: f64 = 5e-3;

const CG_TOLERANCE: f64 = 1e-12;
const CG_CAP: usize = 1000;

/// Samples of a function on a circle at uniformly spaced angles.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleTrace {
    angles: Vec<f64>,
    values: Vec<f64>,
    radius: f64,
}

/// Trigonometric coefficients of `g = a₀/2 + Σ aₙ cos nθ + bₙ sin nθ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Fourier {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl Fourier {
    pub fn eval(&self, theta: f64) -> f64 {
        let mut v = 0.5 * self.cos[0];
        for n in 1..self.cos.len() {
            let (s, c) = (n as f64 * theta).sin_cos();
            v += self.cos[n] * c + self.sin[n] * s;
        }
        v
    }
}

impl CircleTrace {
    /// `angles` must be strictly increasing in `[0, 2π)` with equal cyclic gaps.
    pub fn new(angles: Vec<f64>, values: Vec<f64>, radius: f64) -> Result<Self> {
        let n = angles.len();
        if n < MIN_TRACE_SAMPLES {
            return Err(Error::TooFewSamples { count: n });
        }
        if values.len() != n || !(radius > 0.0) {
            return Err(Error::BadParameter("trace needs one value per angle and a positive radius".into()));
        }
        let step = TAU / n as f64;
        for i in 0..n {
            let next = if i + 1 < n { angles[i + 1] } else { angles[0] + TAU };
            if !(0.0..TAU).contains(&angles[i]) || ((next - angles[i]) - step).abs() > 1e-8 * step {
                return Err(Error::NonUniformSamples);
            }
        }
        Ok(CircleTrace { angles, values, radius })
    }

    /// Samples `g` at `θ_k = 2πk/n`.
    pub fn sample(n: usize, radius: f64, g: impl Fn(f64) -> f64) -> Result<Self> {
        let angles: Vec<f64> = (0..n).map(|k| TAU * k as f64 / n as f64).collect();
        let values = angles.iter().map(|&t| g(t)).collect();
        CircleTrace::new(angles, values, radius)
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Trapezoid coefficients for orders `0 ..= n/2 − 1`.
    pub fn fourier(&self) -> Fourier {
        let n = self.len();
        let orders = n / 2;
        let scale = 2.0 / n as f64;
        let mut cos = vec![0.0; orders];
        let mut sin = vec![0.0; orders];
        for (&theta, &g) in self.angles.iter().zip(&self.values) {
            for k in 0..orders {
                let (s, c) = (k as f64 * theta).sin_cos();
                cos[k] += scale * g * c;
                sin[k] += scale * g * s;
            }
        }
        Fourier { cos, sin }
    }
}

/// Dirichlet energy `π Σ n (aₙ² + bₙ²)` of the harmonic extension of `g`
/// into the disk. Independent of the radius in two dimensions.
pub fn harmonic_extension_energy(g: &CircleTrace) -> f64 {
    let f = g.fourier();
    PI * (1..f.cos.len()).map(|n| n as f64 * (f.cos[n].powi(2) + f.sin[n].powi(2))).sum::<f64>()
}

/// Same energy by a P1 Dirichlet solve on a polar disk mesh. Test oracle.
pub fn fem_extension_energy(radius: f64, angular: usize, rings: usize, g: impl Fn(f64) -> f64) -> Result<f64> {
    let mesh = build_disk_mesh(radius, angular, rings);
    let k = fem::assemble_stiffness(&mesh);
    let boundary = mesh.outer_nodes();
    let mut fixed = vec![false; mesh.node_count()];
    let mut data = vec![0.0; mesh.node_count()];
    for &b in &boundary {
        let p = mesh.nodes[b];
        fixed[b] = true;
        data[b] = g(p[1].atan2(p[0]));
    }
    let free: Vec<usize> = (0..mesh.node_count()).filter(|&i| !fixed[i]).collect();
    let load = k.matvec(&data);
    let rhs: Vec<f64> = free.iter().map(|&i| -load[i]).collect();
    let interior = k.restrict(&free).factor()?.solve(&rhs);
    for (&i, v) in free.iter().zip(interior) {
        data[i] = v;
    }
    Ok(k.bilinear(&data, &data))
}

/// `g = |∇u| ⟨w, ν⟩` on the hole boundary.
pub fn normal_velocity_trace(flux: &FluxTrace, w: [f64; 2]) -> Result<CircleTrace> {
    CircleTrace::new(
        flux.samples.iter().map(|s| s.angle).collect(),
        flux.samples.iter().map(|s| s.grad_norm * dot(&w, &s.normal)).collect(),
        flux.radius,
    )
}

/// `σ′ = −∮ |∇u|² ⟨w, ν⟩ dH` over the hole boundary.
pub fn first_shape_derivative(flux: &FluxTrace, w: [f64; 2]) -> Result<f64> {
    if flux.samples.is_empty() {
        return Err(Error::EmptyTrace);
    }
    Ok(-flux.integrate(|s| s.grad_norm.powi(2) * dot(&w, &s.normal)))
}

/// Per-instance derivative summary. Serialized keys match the field names
/// except the three terms, which appear as `term_I`, `term_II` and
/// `term_III_extra`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub t: f64,
    pub sigma: f64,
    pub sigma_prime: f64,
    #[serde(rename = "term_I")]
    pub term_i: f64,
    #[serde(rename = "term_II")]
    pub term_ii: f64,
    #[serde(rename = "term_III_extra")]
    pub term_iii_extra: f64,
    pub sigma_second: f64,
    pub fd_first: Option<f64>,
    pub fd_second: Option<f64>,
    pub h: f64,
    /// Step of the first difference.
    pub delta: Option<f64>,
    /// Step of the second difference.
    pub delta_second: Option<f64>,
}

impl DerivativeReport {
    pub fn with_finite_differences(mut self, fd: &FiniteDifferences) -> Self {
        self.fd_first = Some(fd.fd_first);
        self.fd_second = Some(fd.fd_second);
        self.delta = Some(fd.delta_first);
        self.delta_second = Some(fd.delta_second);
        self
    }

    pub fn first_agreement(&self) -> Option<f64> {
        self.fd_first.map(|fd| (self.sigma_prime - fd).abs() / fd.abs())
    }

    pub fn second_agreement(&self) -> Option<f64> {
        self.fd_second.map(|fd| (self.sigma_second - fd).abs() / fd.abs())
    }

    /// `term_I ≤ 0`, `term_II < 0`, `term_III_extra ≤ 0` and a negative total.
    pub fn signs_hold(&self) -> bool {
        self.term_i <= 0.0 && self.term_ii < 0.0 && self.term_iii_extra <= 0.0 && self.sigma_second < 0.0
    }
}

/// Second derivative as the sum of the harmonic-extension term, the curvature
/// term and the `(3n − 4)/r` term, with `n = 2`.
pub fn second_shape_derivative(flux: &FluxTrace, w: [f64; 2]) -> Result<DerivativeReport> {
    let sigma_prime = first_shape_derivative(flux, w)?;
    let r = flux.radius;
    let g = normal_velocity_trace(flux, w)?;
    let term_i = -2.0 * harmonic_extension_energy(&g);
    let term_ii = -flux.integrate(|s| s.grad_norm.powi(2)) / r;
    let coefficient = (3 * DIMENSION - 4) as f64 / r;
    let term_iii_extra = -coefficient * flux.integrate(|s| (s.grad_norm * dot(&w, &s.normal)).powi(2));
    Ok(DerivativeReport {
        t: dot(&flux.center, &w),
        sigma: flux.sigma,
        sigma_prime,
        term_i,
        term_ii,
        term_iii_extra,
        sigma_second: term_i + term_ii + term_iii_extra,
        fd_first: None,
        fd_second: None,
        h: flux.resolution,
        delta: None,
        delta_second: None,
    })
}

/// Eigenfunction derivative `u′` and its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeField {
    /// Nodal values over all mesh nodes.
    pub values: Vec<f64>,
    /// `|uᵀ b|` relative to the size of the load, before projection.
    pub compatibility: f64,
    /// `∮_{∂Ω₀} u′ u dH`.
    pub orthogonality: f64,
    /// `−2 ∮_{∂B_r} (∂u′/∂ν) u′ dH` from reactions.
    pub boundary_energy: f64,
    pub iterations: usize,
}

/// Solves `(K − σ M_out) u′ = σ′ M_out u` on free nodes with `u′ = |∇u|⟨ν, w⟩`
/// on the hole. The operator is singular along `u`; the load is projected
/// onto its range and the iterates are kept `M_out`-orthogonal to `u`.
pub fn solve_derivative_bvp(
    mesh: &Mesh,
    system: &SteklovSystem,
    pair: &EigenPair,
    sigma_prime: f64,
    w: [f64; 2],
) -> Result<DerivativeField> {
    let flux = fem::recover_inner_flux(mesh, system, pair)?;
    let factor = system.factor()?;
    let k = system.reduced_stiffness();
    let m = system.reduced_mass();
    let sigma = pair.sigma;

    let mut datum = vec![0.0; system.node_count()];
    let mut load_scale = sigma_prime.abs();
    for s in &flux.samples {
        let g = s.grad_norm * dot(&s.normal, &w);
        datum[s.node] = g;
        load_scale += (g * s.reaction).abs();
    }
    let lift = system.restrict(&system.stiffness.matvec(&datum));
    let u = system.restrict(&pair.u);
    let mu = m.matvec(&u);
    let mut b: Vec<f64> = mu.iter().zip(&lift).map(|(a, l)| sigma_prime * a - l).collect();
    let defect = dot(&u, &b);
    let compatibility = defect.abs() / load_scale.max(f64::MIN_POSITIVE);
    if !(compatibility <= COMPATIBILITY_LIMIT) {
        return Err(Error::IncompatibleData { residual: compatibility });
    }
    // Pᵀ b with P = I − u uᵀ M.
    b.iter_mut().zip(&mu).for_each(|(x, y)| *x -= defect * y);

    // Pᵀ (K − σM), consistent even though u is only an approximate null vector.
    let apply = |x: &[f64]| -> Vec<f64> {
        let kx = k.matvec(x);
        let mx = m.matvec(x);
        let mut y: Vec<f64> = kx.iter().zip(&mx).map(|(a, c)| a - sigma * c).collect();
        let c = dot(&u, &y);
        y.iter_mut().zip(&mu).for_each(|(a, b)| *a -= c * b);
        y
    };
    // Preconditioner P K⁻¹ Pᵀ.
    let precondition = |r: &[f64]| -> Vec<f64> {
        let c = dot(&u, r);
        let projected: Vec<f64> = r.iter().zip(&mu).map(|(x, y)| x - c * y).collect();
        let mut z = factor.solve(&projected);
        let d = dot(&mu, &z);
        z.iter_mut().zip(&u).for_each(|(x, y)| *x -= d * y);
        z
    };
    let target = CG_TOLERANCE * norm(&b);
    let mut x = vec![0.0; b.len()];
    let mut r = b;
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut iterations = 0;
    while norm(&r) > target {
        if iterations == CG_CAP {
            return Err(Error::NotConverged { iterations, residual: norm(&r) / (target / CG_TOLERANCE) });
        }
        iterations += 1;
        let ap = apply(&p);
        let alpha = rz / dot(&p, &ap);
        x.iter_mut().zip(&p).for_each(|(a, b)| *a += alpha * b);
        r.iter_mut().zip(&ap).for_each(|(a, b)| *a -= alpha * b);
        z = precondition(&r);
        let next = dot(&r, &z);
        let beta = next / rz;
        rz = next;
        p.iter_mut().zip(&z).for_each(|(a, b)| *a = b + beta * *a);
    }
    let c = dot(&mu, &x);
    x.iter_mut().zip(&u).for_each(|(a, b)| *a -= c * b);

    let mut values = system.expand(&x);
    for &d in &system.dirichlet_nodes {
        values[d] = datum[d];
    }
    let orthogonality = system.boundary_mass.bilinear(&values, &pair.u);
    let reactions = system.reactions(&values);
    let boundary_energy =
        -2.0 * system.dirichlet_nodes.iter().zip(&reactions).map(|(&d, &q)| datum[d] * q).sum::<f64>();
    Ok(DerivativeField { values, compatibility, orthogonality, boundary_energy, iterations })
}

/// Central differences of σ around one offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteDifferences {
    pub t: f64,
    pub h: f64,
    pub delta_first: f64,
    pub delta_second: f64,
    pub layout: MeshLayout,
    pub sigma: f64,
    pub fd_first: f64,
    pub fd_second: f64,
}

/// Default steps `(10⁻³, 5·10⁻³) · t_max`.
pub fn default_steps(t_max: f64) -> (f64, f64) {
    (FIRST_STEP_FRACTION * t_max, SECOND_STEP_FRACTION * t_max)
}

/// First and second central differences with a common step.
pub fn finite_difference_derivatives(problem: &AnnulusProblem, h: f64, delta: f64, tol: f64) -> Result<FiniteDifferences> {
    finite_differences(problem, h, delta, delta, tol)
}

/// Stencil layout shared by every offset `t + s`, `s ∈ offsets`.
pub fn stencil_layout(problem: &AnnulusProblem, offsets: &[f64], h: f64) -> Result<MeshLayout> {
    let mut layout = MeshLayout::for_problem(problem, h)?;
    for &s in offsets {
        let shifted = problem.at_signed_offset(problem.hole.offset + s)?;
        layout = layout.max(MeshLayout::for_problem(&shifted, h)?);
    }
    Ok(layout)
}

fn check_stencil(problem: &AnnulusProblem, delta: f64) -> Result<()> {
    let t = problem.hole.offset;
    if !(delta > 0.0) {
        return Err(Error::BadParameter(format!("step must be positive, got {delta}")));
    }
    let t_max = problem.t_max();
    if t + delta >= t_max || (t - delta).abs() >= t_max {
        return Err(Error::StepTooLarge { low: t - delta, high: t + delta, t_max });
    }
    Ok(())
}

/// Solves the offsets `t`, `t ± δ₁`, `t ± δ₂` concurrently on one shared
/// layout so that discretization error largely cancels in the differences.
/// Negative offsets move the hole along `−w`, which for a centrally
/// symmetric outer domain gives the mirror image of the positive offset.
pub fn finite_differences(
    problem: &AnnulusProblem,
    h: f64,
    delta_first: f64,
    delta_second: f64,
    tol: f64,
) -> Result<FiniteDifferences> {
    check_stencil(problem, delta_first)?;
    check_stencil(problem, delta_second)?;
    let t = problem.hole.offset;
    let shifts = [-delta_second, -delta_first, 0.0, delta_first, delta_second];
    let layout = stencil_layout(problem, &shifts, h)?;
    let sigmas = shifts
        .par_iter()
        .map(|&s| solve_sigma(&problem.at_signed_offset(t + s)?, layout, h, tol))
        .collect::<Result<Vec<f64>>>()?;
    Ok(FiniteDifferences {
        t,
        h,
        delta_first,
        delta_second,
        layout,
        sigma: sigmas[2],
        fd_first: (sigmas[3] - sigmas[1]) / (2.0 * delta_first),
        fd_second: (sigmas[4] - 2.0 * sigmas[2] + sigmas[0]) / (delta_second * delta_second),
    })
}

fn solve_sigma(problem: &AnnulusProblem, layout: MeshLayout, h: f64, tol: f64) -> Result<f64> {
    let mesh = build_mesh_with_layout(problem, layout, h)?;
    let system = fem::assemble(&mesh)?;
    Ok(eig::solve_smallest(&system, tol)?.sigma)
}

/// Central difference `(u^{t+δ} − u^{t−δ}) / 2δ` of the eigenfunctions at
/// fixed points, each interpolated on its own mesh.
pub fn eigenfunction_difference(
    problem: &AnnulusProblem,
    layout: MeshLayout,
    h: f64,
    delta: f64,
    tol: f64,
    points: &[[f64; 2]],
) -> Result<Vec<f64>> {
    check_stencil(problem, delta)?;
    let t = problem.hole.offset;
    let (minus, plus) = rayon::join(
        || solve_with_layout(&problem.at_signed_offset(t - delta)?, layout, h, tol),
        || solve_with_layout(&problem.at_signed_offset(t + delta)?, layout, h, tol),
    );
    let (minus, plus): (Solution, Solution) = (minus?, plus?);
    points
        .iter()
        .map(|&p| {
            let a = minus.mesh.interpolate(&minus.pair.u, p);
            let b = plus.mesh.interpolate(&plus.pair.u, p);
            match (a, b) {
                (Some(a), Some(b)) => Ok((b - a) / (2.0 * delta)),
                _ => Err(Error::BadParameter(format!("point {p:?} lies outside a stencil domain"))),
            }
        })
        .collect()
}
