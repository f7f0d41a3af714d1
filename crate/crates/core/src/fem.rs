//! P1 assembly of the stiffness and outer-boundary mass operators, Dirichlet
//! elimination on the hole, and reaction-based flux recovery.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::eig::EigenPair;
use crate::error::{Error, Result};
use crate::geometry::{polar_angle, Mesh};
use crate::sparse::{CsrMatrix, SpdFactor};

/// Largest relative eigen-residual accepted for flux recovery.
pub const FLUX_RESIDUAL_LIMIT: f64 = 1e-6;

/// Stiffness `K`, outer mass `M_out` and the Dirichlet split of the nodes.
#[derive(Debug)]
pub struct SteklovSystem {
    pub stiffness: CsrMatrix,
    pub boundary_mass: CsrMatrix,
    /// Sorted nodes on INNER edges.
    pub dirichlet_nodes: Vec<usize>,
    /// Sorted complement of `dirichlet_nodes`.
    pub free_nodes: Vec<usize>,
    reduced_stiffness: CsrMatrix,
    reduced_mass: CsrMatrix,
    factor: OnceLock<std::result::Result<SpdFactor, Error>>,
}

/// Element stiffness `K_ij = (e_i · e_j) / (4A)` with `e_i` the edge opposite
/// vertex `i`.
pub fn element_stiffness(p: [[f64; 2]; 3]) -> [[f64; 3]; 3] {
    let e = [
        [p[2][0] - p[1][0], p[2][1] - p[1][1]],
        [p[0][0] - p[2][0], p[0][1] - p[2][1]],
        [p[1][0] - p[0][0], p[1][1] - p[0][1]],
    ];
    let area = 0.5 * (e[2][0] * (-e[1][1]) - e[2][1] * (-e[1][0]));
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = (e[i][0] * e[j][0] + e[i][1] * e[j][1]) / (4.0 * area);
        }
    }
    k
}

/// Full stiffness over all nodes. Element blocks are computed in parallel
/// and summed in triangle order, so the result is bitwise reproducible.
pub fn assemble_stiffness(mesh: &Mesh) -> CsrMatrix {
    let blocks: Vec<[[f64; 3]; 3]> = mesh
        .triangles
        .par_iter()
        .map(|t| element_stiffness([mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]]))
        .collect();
    let mut triplets = Vec::with_capacity(9 * mesh.triangles.len());
    for (t, k) in mesh.triangles.iter().zip(&blocks) {
        for a in 0..3 {
            for b in 0..3 {
                triplets.push((t[a], t[b], k[a][b]));
            }
        }
    }
    CsrMatrix::from_triplets(mesh.node_count(), triplets)
}

/// Exact mass `∫ φ_i φ_j` over the given boundary edges.
pub fn assemble_edge_mass(mesh: &Mesh, edges: &[[usize; 2]]) -> CsrMatrix {
    let mut triplets = Vec::with_capacity(4 * edges.len());
    for &[p, q] in edges {
        let (a, b) = (mesh.nodes[p], mesh.nodes[q]);
        let len = (a[0] - b[0]).hypot(a[1] - b[1]);
        triplets.push((p, p, len / 3.0));
        triplets.push((q, q, len / 3.0));
        triplets.push((p, q, len / 6.0));
        triplets.push((q, p, len / 6.0));
    }
    CsrMatrix::from_triplets(mesh.node_count(), triplets)
}

pub fn assemble(mesh: &Mesh) -> Result<SteklovSystem> {
    if mesh.inner_edges.is_empty() {
        return Err(Error::EmptyBoundary("INNER"));
    }
    if mesh.outer_edges.is_empty() {
        return Err(Error::EmptyBoundary("OUTER"));
    }
    let stiffness = assemble_stiffness(mesh);
    let boundary_mass = assemble_edge_mass(mesh, &mesh.outer_edges);
    let dirichlet_nodes = mesh.inner_nodes();
    let mut is_dirichlet = vec![false; mesh.node_count()];
    for &d in &dirichlet_nodes {
        is_dirichlet[d] = true;
    }
    let free_nodes: Vec<usize> = (0..mesh.node_count()).filter(|&i| !is_dirichlet[i]).collect();
    let reduced_stiffness = stiffness.restrict(&free_nodes);
    let reduced_mass = boundary_mass.restrict(&free_nodes);
    Ok(SteklovSystem {
        stiffness,
        boundary_mass,
        dirichlet_nodes,
        free_nodes,
        reduced_stiffness,
        reduced_mass,
        factor: OnceLock::new(),
    })
}

impl SteklovSystem {
    pub fn node_count(&self) -> usize {
        self.stiffness.dim()
    }

    pub fn free_count(&self) -> usize {
        self.free_nodes.len()
    }

    /// `K` restricted to free nodes.
    pub fn reduced_stiffness(&self) -> &CsrMatrix {
        &self.reduced_stiffness
    }

    /// `M_out` restricted to free nodes (OUTER nodes are never Dirichlet).
    pub fn reduced_mass(&self) -> &CsrMatrix {
        &self.reduced_mass
    }

    /// Cholesky factor of the reduced stiffness, computed on first use.
    pub fn factor(&self) -> Result<&SpdFactor> {
        self.factor
            .get_or_init(|| self.reduced_stiffness.factor())
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Free-node values extended by zero on the Dirichlet nodes.
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.node_count()];
        for (&i, &v) in self.free_nodes.iter().zip(free) {
            full[i] = v;
        }
        full
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free_nodes.iter().map(|&i| full[i]).collect()
    }

    /// Reactions `(K v)_d` at the Dirichlet nodes, in `dirichlet_nodes` order.
    pub fn reactions(&self, v: &[f64]) -> Vec<f64> {
        self.dirichlet_nodes.iter().map(|&d| self.stiffness.row(d).map(|(j, k)| k * v[j]).sum()).collect()
    }
}

/// One node of the hole boundary with its recovered normal flux.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxSample {
    pub node: usize,
    /// Polar angle about the hole center, in `[0, 2π)`.
    pub angle: f64,
    /// `∂u/∂ν` with `ν` pointing into the hole.
    pub flux: f64,
    /// `|∇u| = |∂u/∂ν|` since `u` vanishes along the circle.
    pub grad_norm: f64,
    /// Lumped boundary weight: half the incident INNER edge lengths.
    pub weight: f64,
    /// `ν = −(x − c)/|x − c|`.
    pub normal: [f64; 2],
    pub reaction: f64,
}

/// Normal flux of an eigenfunction on the hole boundary, sorted by angle.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxTrace {
    pub samples: Vec<FluxSample>,
    pub center: [f64; 2],
    pub radius: f64,
    pub sigma: f64,
    /// Target edge length of the source mesh.
    pub resolution: f64,
}

impl FluxTrace {
    /// True when every nodal flux has the same strict sign.
    pub fn is_sign_constant(&self) -> bool {
        self.samples.iter().all(|s| s.flux < 0.0) || self.samples.iter().all(|s| s.flux > 0.0)
    }

    /// `∮ f dH` by the lumped arc-length rule.
    pub fn integrate(&self, f: impl Fn(&FluxSample) -> f64) -> f64 {
        self.samples.iter().map(|s| s.weight * f(s)).sum()
    }
}

/// Converts reactions at the hole nodes into nodal flux values.
pub fn recover_inner_flux(mesh: &Mesh, system: &SteklovSystem, pair: &EigenPair) -> Result<FluxTrace> {
    if !(pair.residual <= FLUX_RESIDUAL_LIMIT) {
        return Err(Error::NotConverged { iterations: pair.iterations, residual: pair.residual });
    }
    let hole = mesh.hole.ok_or(Error::EmptyBoundary("INNER"))?;
    Ok(FluxTrace {
        samples: reaction_flux(mesh, system, &pair.u)?,
        center: hole.center,
        radius: hole.radius,
        sigma: pair.sigma,
        resolution: mesh.resolution,
    })
}

/// Reaction flux of an arbitrary nodal field at the hole nodes, sorted by
/// angle. Exact for the weak normal derivative when the field is discretely
/// harmonic at the free nodes next to the hole.
pub fn reaction_flux(mesh: &Mesh, system: &SteklovSystem, values: &[f64]) -> Result<Vec<FluxSample>> {
    let hole = mesh.hole.ok_or(Error::EmptyBoundary("INNER"))?;
    let mut weight = vec![0.0; mesh.node_count()];
    for &[p, q] in &mesh.inner_edges {
        let (a, b) = (mesh.nodes[p], mesh.nodes[q]);
        let half = 0.5 * (a[0] - b[0]).hypot(a[1] - b[1]);
        weight[p] += half;
        weight[q] += half;
    }
    let reactions = system.reactions(values);
    let mut samples: Vec<FluxSample> = system
        .dirichlet_nodes
        .iter()
        .zip(&reactions)
        .map(|(&d, &reaction)| {
            let x = mesh.nodes[d];
            let (dx, dy) = (x[0] - hole.center[0], x[1] - hole.center[1]);
            let len = dx.hypot(dy);
            let flux = reaction / weight[d];
            FluxSample {
                node: d,
                angle: polar_angle(x, hole.center),
                flux,
                grad_norm: flux.abs(),
                weight: weight[d],
                normal: [-dx / len, -dy / len],
                reaction,
            }
        })
        .collect();
    samples.sort_by(|a, b| a.angle.total_cmp(&b.angle));
    Ok(samples)
}
