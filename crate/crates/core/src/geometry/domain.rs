use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of angles used to validate positivity of a radial profile.
pub const PROFILE_SAMPLES: usize = 4096;

/// Default fraction of `t_max` used as the largest offset in sweeps.
pub const DEFAULT_SAFETY: f64 = 0.98;

const DISTANCE_SAMPLES: usize = 4096;

/// One term `cos_coeff * cos(order θ) + sin_coeff * sin(order θ)` of a radial profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub order: u32,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

/// User-facing description of an outer domain, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    Disk { radius: f64 },
    Ellipse { a: f64, b: f64 },
    RadialProfile { mean: f64, harmonics: Vec<Harmonic> },
}

/// A validated, centrally symmetric outer boundary given as a positive radial
/// graph `ρ(θ)` about the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterDomain {
    spec: DomainSpec,
    min_radius: f64,
    max_radius: f64,
}

pub fn make_outer_domain(spec: &DomainSpec) -> Result<OuterDomain> {
    match *spec {
        DomainSpec::Disk { radius } => {
            if !(radius > 0.0) || !radius.is_finite() {
                return Err(Error::BadParameter(format!("disk radius must be positive, got {radius}")));
            }
        }
        DomainSpec::Ellipse { a, b } => {
            if !(b > 0.0) || !a.is_finite() || a < b {
                return Err(Error::BadParameter(format!(
                    "ellipse needs semi-axes a >= b > 0, got a={a}, b={b}"
                )));
            }
        }
        DomainSpec::RadialProfile { mean, ref harmonics } => {
            if !mean.is_finite() {
                return Err(Error::BadParameter("profile mean must be finite".into()));
            }
            for h in harmonics {
                if h.order % 2 == 1 && (h.cos != 0.0 || h.sin != 0.0) {
                    return Err(Error::AsymmetricProfile { order: h.order });
                }
                if !h.cos.is_finite() || !h.sin.is_finite() {
                    return Err(Error::BadParameter("profile coefficients must be finite".into()));
                }
            }
        }
    }
    let mut min_radius = f64::INFINITY;
    let mut max_radius = 0.0_f64;
    for i in 0..PROFILE_SAMPLES {
        let theta = TAU * i as f64 / PROFILE_SAMPLES as f64;
        let rho = radius_of(spec, theta);
        if !(rho > 0.0) {
            return Err(Error::NonPositiveRadius { angle: theta });
        }
        min_radius = min_radius.min(rho);
        max_radius = max_radius.max(rho);
    }
    Ok(OuterDomain { spec: spec.clone(), min_radius, max_radius })
}

fn radius_of(spec: &DomainSpec, theta: f64) -> f64 {
    match *spec {
        DomainSpec::Disk { radius } => radius,
        DomainSpec::Ellipse { a, b } => {
            let (s, c) = theta.sin_cos();
            a * b / (b * b * c * c + a * a * s * s).sqrt()
        }
        DomainSpec::RadialProfile { mean, ref harmonics } => {
            harmonics.iter().fold(mean, |acc, h| {
                let (s, c) = (h.order as f64 * theta).sin_cos();
                acc + h.cos * c + h.sin * s
            })
        }
    }
}

impl OuterDomain {
    pub fn disk(radius: f64) -> Result<Self> {
        make_outer_domain(&DomainSpec::Disk { radius })
    }

    pub fn ellipse(a: f64, b: f64) -> Result<Self> {
        make_outer_domain(&DomainSpec::Ellipse { a, b })
    }

    pub fn radial_profile(mean: f64, harmonics: Vec<Harmonic>) -> Result<Self> {
        make_outer_domain(&DomainSpec::RadialProfile { mean, harmonics })
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    /// Disk radius, when the outer domain is a disk.
    pub fn disk_radius(&self) -> Option<f64> {
        match self.spec {
            DomainSpec::Disk { radius } => Some(radius),
            _ => None,
        }
    }

    /// Boundary radius `ρ(θ)`.
    pub fn radius_at(&self, theta: f64) -> f64 {
        radius_of(&self.spec, theta)
    }

    pub fn boundary_point(&self, theta: f64) -> [f64; 2] {
        let rho = self.radius_at(theta);
        [rho * theta.cos(), rho * theta.sin()]
    }

    /// Distance from the origin to the boundary, i.e. the largest hole radius
    /// that fits at the center (exclusive).
    pub fn inradius(&self) -> f64 {
        match self.spec {
            DomainSpec::Disk { radius } => radius,
            DomainSpec::Ellipse { b, .. } => b,
            _ => self.min_radius,
        }
    }

    pub fn max_radius(&self) -> f64 {
        match self.spec {
            DomainSpec::Disk { radius } => radius,
            DomainSpec::Ellipse { a, .. } => a,
            _ => self.max_radius,
        }
    }

    /// Signed radial residual `|x| - ρ(θ(x))`, negative inside.
    pub fn level(&self, p: [f64; 2]) -> f64 {
        let norm = p[0].hypot(p[1]);
        norm - self.radius_at(p[1].atan2(p[0]))
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.level(p) < 0.0
    }

    /// Distance `s > 0` along the unit ray `center + s * dir` to the boundary.
    /// `center` must lie inside the domain.
    pub fn ray_exit(&self, center: [f64; 2], dir: [f64; 2]) -> f64 {
        match self.spec {
            DomainSpec::Disk { radius } => {
                let cd = center[0] * dir[0] + center[1] * dir[1];
                let cc = center[0] * center[0] + center[1] * center[1];
                -cd + (cd * cd + radius * radius - cc).sqrt()
            }
            DomainSpec::Ellipse { a, b } => {
                let (a2, b2) = (a * a, b * b);
                let qa = dir[0] * dir[0] / a2 + dir[1] * dir[1] / b2;
                let qb = 2.0 * (center[0] * dir[0] / a2 + center[1] * dir[1] / b2);
                let qc = center[0] * center[0] / a2 + center[1] * center[1] / b2 - 1.0;
                let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
                // qc < 0, so the roots have opposite signs; pick the positive one stably.
                if qb >= 0.0 {
                    -2.0 * qc / (qb + disc)
                } else {
                    (-qb + disc) / (2.0 * qa)
                }
            }
            DomainSpec::RadialProfile { .. } => {
                let at = |s: f64| self.level([center[0] + s * dir[0], center[1] + s * dir[1]]);
                let step = self.min_radius / 64.0;
                let mut lo = 0.0;
                let mut hi = step;
                while at(hi) < 0.0 {
                    lo = hi;
                    hi += step;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if at(mid) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            }
        }
    }

    /// Euclidean distance from an interior point to the boundary curve.
    pub fn distance_to_boundary(&self, p: [f64; 2]) -> f64 {
        if let DomainSpec::Disk { radius } = self.spec {
            return radius - p[0].hypot(p[1]);
        }
        let dist = |theta: f64| {
            let q = self.boundary_point(theta);
            (q[0] - p[0]).hypot(q[1] - p[1])
        };
        let step = TAU / DISTANCE_SAMPLES as f64;
        let samples: Vec<f64> = (0..DISTANCE_SAMPLES).map(|i| dist(step * i as f64)).collect();
        let mut best = f64::INFINITY;
        for i in 0..DISTANCE_SAMPLES {
            let prev = samples[(i + DISTANCE_SAMPLES - 1) % DISTANCE_SAMPLES];
            let next = samples[(i + 1) % DISTANCE_SAMPLES];
            if samples[i] <= prev && samples[i] <= next {
                let theta = step * i as f64;
                best = best.min(golden_min(&dist, theta - step, theta + step));
            }
        }
        best
    }
}

fn golden_min(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    f1.min(f2)
}

/// Largest admissible offset along `w`: `sup{t ≥ 0 : dist(t w, ∂Ω₀) > r}`.
pub fn admissible_range(outer: &OuterDomain, r: f64, w: [f64; 2]) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::BadParameter(format!("hole radius must be positive, got {r}")));
    }
    let w = unit(w)?;
    let inradius = outer.inradius();
    if r >= inradius {
        return Err(Error::HoleTooLarge { radius: r, inradius });
    }
    if let Some(radius) = outer.disk_radius() {
        return Ok(radius - r);
    }
    let clearance = |t: f64| outer.distance_to_boundary([t * w[0], t * w[1]]) - r;
    let reach = outer.radius_at(w[1].atan2(w[0]));
    // Walk outward to the first sign change, then bisect.
    let steps = 256;
    let mut lo = 0.0;
    let mut hi = reach;
    for i in 1..=steps {
        let t = reach * i as f64 / steps as f64;
        if clearance(t) <= 0.0 {
            hi = t;
            break;
        }
        lo = t;
    }
    while hi - lo > 1e-14 * reach {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if clearance(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn unit(w: [f64; 2]) -> Result<[f64; 2]> {
    let norm = w[0].hypot(w[1]);
    if !((norm - 1.0).abs() <= 1e-12) {
        return Err(Error::BadParameter(format!("direction must be a unit vector, |w| = {norm}")));
    }
    Ok(w)
}

/// Circular hole of radius `radius` centered at `offset * direction`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoleSpec {
    pub radius: f64,
    pub direction: [f64; 2],
    pub offset: f64,
}

impl HoleSpec {
    pub fn new(radius: f64, direction: [f64; 2], offset: f64) -> Result<Self> {
        let direction = unit(direction)?;
        if !(radius > 0.0) {
            return Err(Error::BadParameter(format!("hole radius must be positive, got {radius}")));
        }
        if !(offset >= 0.0) || !offset.is_finite() {
            return Err(Error::BadParameter(format!("offset must be >= 0, got {offset}")));
        }
        Ok(Self { radius, direction, offset })
    }

    /// Direction at polar angle `angle`.
    pub fn direction_at(angle: f64) -> [f64; 2] {
        [angle.cos(), angle.sin()]
    }

    pub fn center(&self) -> [f64; 2] {
        [self.offset * self.direction[0], self.offset * self.direction[1]]
    }
}

/// The annulus `Ω(t) = Ω₀ \ closure(B_r(t w))`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnulusProblem {
    pub outer: OuterDomain,
    pub hole: HoleSpec,
    t_max: f64,
}

impl AnnulusProblem {
    pub fn new(outer: OuterDomain, hole: HoleSpec) -> Result<Self> {
        let t_max = admissible_range(&outer, hole.radius, hole.direction)?;
        if hole.offset >= t_max {
            return Err(Error::OffsetOutOfRange { offset: hole.offset, t_max });
        }
        Ok(Self { outer, hole, t_max })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// The same outer domain and hole with the center moved to `s * w`.
    /// Negative `s` is allowed: by central symmetry of Ω₀ it is the offset `|s|`
    /// along `-w`, which has the same admissible range.
    pub fn at_signed_offset(&self, s: f64) -> Result<Self> {
        let direction = if s < 0.0 {
            [-self.hole.direction[0], -self.hole.direction[1]]
        } else {
            self.hole.direction
        };
        let offset = s.abs();
        if offset >= self.t_max {
            return Err(Error::OffsetOutOfRange { offset, t_max: self.t_max });
        }
        Ok(Self { outer: self.outer.clone(), hole: HoleSpec { offset, direction, ..self.hole }, t_max: self.t_max })
    }

    /// Offsets `0, …, safety·t_max` in `samples` equal steps.
    pub fn sweep_offsets(&self, samples: usize, safety: f64) -> Vec<f64> {
        match samples {
            0 => Vec::new(),
            1 => vec![0.0],
            n => (0..n).map(|i| safety * self.t_max * i as f64 / (n - 1) as f64).collect(),
        }
    }

    /// Distance from the hole center to the outer boundary along the ray at `theta`.
    pub fn ray_length(&self, theta: f64) -> f64 {
        self.outer.ray_exit(self.hole.center(), [theta.cos(), theta.sin()])
    }
}

/// Angle of `p - center` in `[0, 2π)`.
pub fn polar_angle(p: [f64; 2], center: [f64; 2]) -> f64 {
    let a = (p[1] - center[1]).atan2(p[0] - center[0]);
    if a < 0.0 {
        let wrapped = a + TAU;
        if wrapped >= TAU {
            0.0
        } else {
            wrapped
        }
    } else {
        a
    }
}
