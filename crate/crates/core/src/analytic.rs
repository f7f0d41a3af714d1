//! Closed-form values for concentric shells and two-sided bounds for the
//! eccentric disk shell.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shell `B_R \ B_r` in dimension `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellSpec {
    pub outer: f64,
    pub inner: f64,
    pub dimension: u32,
}

impl ShellSpec {
    pub fn new(outer: f64, inner: f64, dimension: u32) -> Result<Self> {
        if !(inner > 0.0 && outer > inner && outer.is_finite()) || dimension < 2 {
            return Err(Error::BadShell { outer, inner, dimension });
        }
        Ok(ShellSpec { outer, inner, dimension })
    }
}

/// First eigenvalue of the concentric shell: `σ = u′(R)/u(R)` for the radial
/// harmonic vanishing at `r`.
pub fn concentric_sigma(spec: ShellSpec) -> f64 {
    let ShellSpec { outer: big, inner: small, dimension: n } = spec;
    if n == 2 {
        1.0 / (big * (big / small).ln())
    } else {
        let k = n as i32 - 2;
        k as f64 * big.powi(1 - n as i32) / (small.powi(-k) - big.powi(-k))
    }
}

/// Eigenvalue of the planar mode `(ρ^m − r^{2m} ρ^{−m}) cos mθ`, `m ≥ 1`.
pub fn concentric_mode_sigma(outer: f64, inner: f64, m: u32) -> Result<f64> {
    ShellSpec::new(outer, inner, 2)?;
    if m == 0 {
        return Ok(concentric_sigma(ShellSpec { outer, inner, dimension: 2 }));
    }
    let m = m as i32;
    let q = inner.powi(2 * m) * outer.powi(-m);
    Ok(m as f64 * (outer.powi(m) + q) / (outer * (outer.powi(m) - q)))
}

/// `(upper, lower)` with upper the concentric value `1/(R ln(R/r))` and lower
/// the limit bound `r / (2R(R − r))` as the hole approaches the boundary.
pub fn eccentric_bounds(outer: f64, inner: f64) -> Result<(f64, f64)> {
    let spec = ShellSpec::new(outer, inner, 2)?;
    Ok((concentric_sigma(spec), inner / (2.0 * outer * (outer - inner))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planar_and_spatial_values() {
        let s = concentric_sigma(ShellSpec::new(2.0, 1.0, 2).unwrap());
        assert!((s - 0.721_347_520_444_481_7).abs() < 1e-15);
        assert!((concentric_sigma(ShellSpec::new(2.0, 1.0, 3).unwrap()) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn first_mode_of_unit_hole() {
        assert!((concentric_mode_sigma(2.0, 1.0, 1).unwrap() - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn bounds_for_reference_shells() {
        let (upper, lower) = eccentric_bounds(2.0, 1.0).unwrap();
        assert!((lower - 0.25).abs() < 1e-15 && upper > lower);
        let (_, lower) = eccentric_bounds(2.0, 0.5).unwrap();
        assert!((lower - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_shells() {
        assert!(matches!(ShellSpec::new(1.0, 1.0, 2), Err(Error::BadShell { .. })));
        assert!(matches!(ShellSpec::new(2.0, 1.0, 1), Err(Error::BadShell { .. })));
        assert!(eccentric_bounds(0.5, 1.0).is_err());
    }

    #[test]
    fn thin_shell_diverges() {
        let s = concentric_sigma(ShellSpec::new(2.0, 2.0 - 1e-9, 2).unwrap());
        assert!(s > 1e8);
    }
}
