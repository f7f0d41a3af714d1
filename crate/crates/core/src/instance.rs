//! One solved configuration: mesh, operators, first eigenpair and hole flux.

use crate::eig::{self, EigenPair};
use crate::error::Result;
use crate::fem::{self, FluxTrace, SteklovSystem};
use crate::geometry::{build_mesh_with_layout, AnnulusProblem, Mesh, MeshLayout};

#[derive(Debug)]
pub struct Solution {
    pub problem: AnnulusProblem,
    pub mesh: Mesh,
    pub system: SteklovSystem,
    pub pair: EigenPair,
    pub flux: FluxTrace,
}

pub fn solve_instance(problem: &AnnulusProblem, h: f64, tol: f64) -> Result<Solution> {
    let layout = MeshLayout::for_problem(problem, h)?;
    solve_with_layout(problem, layout, h, tol)
}

pub fn solve_with_layout(problem: &AnnulusProblem, layout: MeshLayout, h: f64, tol: f64) -> Result<Solution> {
    let mesh = build_mesh_with_layout(problem, layout, h)?;
    let system = fem::assemble(&mesh)?;
    let pair = eig::solve_smallest(&system, tol)?;
    let flux = fem::recover_inner_flux(&mesh, &system, &pair)?;
    Ok(Solution { problem: problem.clone(), mesh, system, pair, flux })
}

impl Solution {
    pub fn sigma(&self) -> f64 {
        self.pair.sigma
    }

    pub fn second(&self, tol: f64) -> Result<EigenPair> {
        eig::solve_second(&self.system, &self.pair, tol)
    }

    /// `min(u) / max(u)` over all nodes.
    pub fn min_relative_value(&self) -> f64 {
        let max = self.pair.u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = self.pair.u.iter().copied().fold(f64::INFINITY, f64::min);
        min / max
    }

    /// `max |u(x) − u(−x)| / max(u)` over grid nodes; `None` unless the mesh is
    /// a mapped grid around a centered hole.
    pub fn reflection_defect(&self) -> Option<f64> {
        let hole = self.mesh.hole?;
        if hole.center != [0.0, 0.0] {
            return None;
        }
        let u = &self.pair.u;
        let max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut worst = 0.0_f64;
        for i in 0..u.len() {
            worst = worst.max((u[i] - u[self.mesh.opposite_node(i)?]).abs());
        }
        Some(worst / max)
    }
}
