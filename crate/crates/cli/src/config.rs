//! Run configuration: one JSON document, every field defaulted and echoed
//! back in the emitted report.

use std::path::Path;

use serde::{Deserialize, Serialize};
use steklov_core::eig::DEFAULT_TOLERANCE;
use steklov_core::geometry::{make_outer_domain, AnnulusProblem, DomainSpec, HoleSpec, DEFAULT_SAFETY};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub outer: DomainSpec,
    pub hole_radius: f64,
    /// Unit direction `w` of the hole translation.
    pub direction: [f64; 2],
    /// Offset for `solve`.
    pub offset: f64,
    /// Target edge length.
    pub h: f64,
    pub tol: f64,
    /// Number of offsets in a sweep, from 0 to `safety · t_max`.
    pub samples: usize,
    pub safety: f64,
    /// Sweeps also evaluate finite differences when set.
    pub finite_differences: bool,
    /// First-difference step; defaults to `10⁻³ · t_max`.
    pub delta_first: Option<f64>,
    /// Second-difference step; defaults to `5·10⁻³ · t_max`.
    pub delta_second: Option<f64>,
    /// Coarsest edge length of a convergence study.
    pub h0: f64,
    pub levels: usize,
    /// Instances of a derivative check.
    pub instances: Vec<Instance>,
    /// Dimension for the concentric closed form in `bounds`.
    pub dimension: u32,
    pub workers: usize,
}

/// One derivative-check instance; unset fields fall back to the top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub offset: f64,
    #[serde(default)]
    pub direction: Option<[f64; 2]>,
    #[serde(default)]
    pub h: Option<f64>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            outer: DomainSpec::Disk { radius: 2.0 },
            hole_radius: 0.5,
            direction: [1.0, 0.0],
            offset: 0.0,
            h: 0.05,
            tol: DEFAULT_TOLERANCE,
            samples: 20,
            safety: DEFAULT_SAFETY,
            finite_differences: true,
            delta_first: None,
            delta_second: None,
            h0: 0.2,
            levels: 4,
            instances: vec![
                Instance { offset: 0.3, direction: None, h: None },
                Instance { offset: 0.75, direction: None, h: None },
                Instance { offset: 1.1, direction: None, h: None },
            ],
            dimension: 2,
            workers: 4,
        }
    }
}

impl Config {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: Config = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(self.h > 0.0) || !(self.h0 > 0.0) {
            return bad("h and h0 must be positive".into());
        }
        if !(self.safety > 0.0 && self.safety < 1.0) {
            return bad(format!("safety must lie in (0, 1), got {}", self.safety));
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.dimension < 2 {
            return bad("dimension must be at least 2".into());
        }
        if self.delta_first.is_some_and(|d| !(d > 0.0)) || self.delta_second.is_some_and(|d| !(d > 0.0)) {
            return bad("finite-difference steps must be positive".into());
        }
        Ok(())
    }

    /// Problem at `offset` along `direction`.
    pub fn problem(&self, direction: [f64; 2], offset: f64) -> Result<AnnulusProblem, CliError> {
        let outer = make_outer_domain(&self.outer)?;
        Ok(AnnulusProblem::new(outer, HoleSpec::new(self.hole_radius, direction, offset)?)?)
    }

    /// Finite-difference steps for a problem with admissible range `t_max`.
    pub fn steps(&self, t_max: f64) -> (f64, f64) {
        let (first, second) = steklov_core::shape::default_steps(t_max);
        (self.delta_first.unwrap_or(first), self.delta_second.unwrap_or(second))
    }

    /// Disk radius when the outer domain is a disk.
    pub fn disk_radius(&self) -> Option<f64> {
        match self.outer {
            DomainSpec::Disk { radius } => Some(radius),
            _ => None,
        }
    }
}
