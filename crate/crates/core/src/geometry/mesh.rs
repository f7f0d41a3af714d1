use std::collections::HashMap;
use std::f64::consts::{SQRT_2, TAU};
use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};

use super::domain::{polar_angle, AnnulusProblem, OuterDomain};
use crate::error::{Error, Result};

/// Relative tolerance for boundary nodes lying on their analytic curves.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;

const LAYOUT_SAMPLES: usize = 2048;

/// Angular and radial division counts of the mapped annulus grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshLayout {
    pub angular: usize,
    pub radial: usize,
}

impl MeshLayout {
    /// Smallest layout (even angular count, at least 16) whose triangles all have
    /// edges no longer than `h`.
    pub fn for_problem(problem: &AnnulusProblem, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::BadParameter(format!("mesh size must be positive, got {h}")));
        }
        let r = problem.hole.radius;
        let step = TAU / LAYOUT_SAMPLES as f64;
        let points: Vec<[f64; 2]> = (0..LAYOUT_SAMPLES)
            .map(|i| outer_node(problem, step * i as f64))
            .collect();
        let c = problem.hole.center();
        let mut max_gap = 0.0_f64;
        let mut max_speed = r;
        for i in 0..LAYOUT_SAMPLES {
            let p = points[i];
            let q = points[(i + 1) % LAYOUT_SAMPLES];
            max_gap = max_gap.max((p[0] - c[0]).hypot(p[1] - c[1]) - r);
            max_speed = max_speed.max((q[0] - p[0]).hypot(q[1] - p[1]) / step);
        }
        // Quad sides of h/√2 keep the diagonals near h. Counts are rounded up to
        // a set closed under doubling, so halving h doubles both counts.
        let side = h / SQRT_2;
        let angular = TAU * max_speed / side;
        let radial = max_gap / side;
        for i in 0..64 {
            let grow = (i as f64 / 8.0).exp2();
            let layout = MeshLayout {
                angular: dyadic_ceil(grow * angular, 16),
                radial: dyadic_ceil(grow * radial, 8),
            };
            if longest_edge(&grid_nodes(problem, layout), layout) <= h {
                return Ok(layout);
            }
        }
        Err(Error::DegenerateGeometry(format!("no layout reaches edge length {h}")))
    }

    /// Both counts doubled; edge lengths roughly halve.
    pub fn refined(self) -> Self {
        MeshLayout { angular: 2 * self.angular, radial: 2 * self.radial }
    }

    pub fn max(self, other: Self) -> Self {
        MeshLayout { angular: self.angular.max(other.angular), radial: self.radial.max(other.radial) }
    }
}

/// Smallest `m · 2^k ≥ max(x, floor)` with `8 ≤ m ≤ 15`; `floor` must be at
/// least 8, which keeps the result integral.
fn dyadic_ceil(x: f64, floor: usize) -> usize {
    let x = x.max(floor as f64);
    let mut scale = 1usize;
    while 16.0 * scale as f64 <= x {
        scale *= 2;
    }
    (8..=16).map(|m| m * scale).find(|&v| v as f64 >= x).unwrap()
}

fn outer_node(problem: &AnnulusProblem, theta: f64) -> [f64; 2] {
    let c = problem.hole.center();
    let dir = [theta.cos(), theta.sin()];
    let s = problem.outer.ray_exit(c, dir);
    [c[0] + s * dir[0], c[1] + s * dir[1]]
}

fn grid_angle(layout: MeshLayout, k: usize) -> f64 {
    TAU * k as f64 / layout.angular as f64
}

/// Nodes of the mapped grid, ray-major: index `k * (radial + 1) + j`.
fn grid_nodes(problem: &AnnulusProblem, layout: MeshLayout) -> Vec<[f64; 2]> {
    let c = problem.hole.center();
    let r = problem.hole.radius;
    let mut nodes = Vec::with_capacity(layout.angular * (layout.radial + 1));
    for k in 0..layout.angular {
        let theta = grid_angle(layout, k);
        let dir = [theta.cos(), theta.sin()];
        let d = problem.outer.ray_exit(c, dir);
        for j in 0..=layout.radial {
            let rho = if j == layout.radial {
                d
            } else {
                r + (d - r) * (j as f64 / layout.radial as f64)
            };
            nodes.push([c[0] + rho * dir[0], c[1] + rho * dir[1]]);
        }
    }
    nodes
}

fn grid_triangles(layout: MeshLayout) -> Vec<[usize; 3]> {
    let stride = layout.radial + 1;
    let mut triangles = Vec::with_capacity(2 * layout.angular * layout.radial);
    for k in 0..layout.angular {
        let next = (k + 1) % layout.angular;
        for j in 0..layout.radial {
            let a = k * stride + j;
            let b = next * stride + j;
            let c = next * stride + j + 1;
            let d = k * stride + j + 1;
            triangles.push([a, d, c]);
            triangles.push([a, c, b]);
        }
    }
    triangles
}

fn longest_edge(nodes: &[[f64; 2]], layout: MeshLayout) -> f64 {
    grid_triangles(layout)
        .iter()
        .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
        .map(|(i, j)| distance(nodes[i], nodes[j]))
        .fold(0.0, f64::max)
}

fn distance(p: [f64; 2], q: [f64; 2]) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}

fn signed_area(p: [f64; 2], q: [f64; 2], r: [f64; 2]) -> f64 {
    0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeTag {
    Inner,
    Outer,
}

impl EdgeTag {
    fn label(self) -> &'static str {
        match self {
            EdgeTag::Inner => "INNER",
            EdgeTag::Outer => "OUTER",
        }
    }
}

/// Conforming P1 triangulation with tagged boundary edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub inner_edges: Vec<[usize; 2]>,
    pub outer_edges: Vec<[usize; 2]>,
    /// Target edge length `h` the mesh was generated for.
    pub resolution: f64,
    /// Present for mapped annulus grids.
    pub layout: Option<MeshLayout>,
    /// The hole boundary, for annulus meshes.
    pub hole: Option<Circle>,
}

/// Mesh of `Ω(t)` with layout chosen from `h`.
pub fn build_mesh(problem: &AnnulusProblem, h: f64) -> Result<Mesh> {
    let layout = MeshLayout::for_problem(problem, h)?;
    build_mesh_with_layout(problem, layout, h)
}

/// Mapped transfinite grid between the hole circle and the outer curve along
/// rays from the hole center, each quad split into two triangles.
pub fn build_mesh_with_layout(problem: &AnnulusProblem, layout: MeshLayout, h: f64) -> Result<Mesh> {
    if layout.angular < 4 || layout.angular % 2 == 1 || layout.radial == 0 {
        return Err(Error::BadParameter(format!("invalid layout {layout:?}")));
    }
    let c = problem.hole.center();
    let r = problem.hole.radius;
    let n = layout.angular;
    let stride = layout.radial + 1;
    let nodes = grid_nodes(problem, layout);

    // The polygonal boundaries must stay apart by more than their chordal error,
    // otherwise the discrete annulus no longer resolves the gap.
    let half = 0.5 * TAU / n as f64;
    let inner_sagitta = r * (1.0 - half.cos());
    for k in 0..n {
        let next = (k + 1) % n;
        let p = nodes[k * stride + layout.radial];
        let q = nodes[next * stride + layout.radial];
        let mid = outer_node(problem, grid_angle(layout, k) + half);
        let gap_k = distance(p, c) - r;
        let gap_next = distance(q, c) - r;
        let gap_mid = distance(mid, c) - r;
        let clearance = gap_k.min(gap_next).min(gap_mid);
        let chord = distance(p, q);
        let outer_sagitta = if chord > 0.0 { 2.0 * signed_area(p, q, mid).abs() / chord } else { 0.0 };
        if clearance <= 0.0 || inner_sagitta + outer_sagitta >= clearance {
            return Err(Error::DegenerateGeometry(format!(
                "clearance {clearance:.3e} near angle {:.4} is below the chordal error {:.3e}; refine h",
                grid_angle(layout, k),
                inner_sagitta + outer_sagitta
            )));
        }
    }

    let triangles = grid_triangles(layout);
    for (i, t) in triangles.iter().enumerate() {
        let area = signed_area(nodes[t[0]], nodes[t[1]], nodes[t[2]]);
        if !(area > 0.0) {
            return Err(Error::DegenerateGeometry(format!("triangle {i} has area {area:e}")));
        }
    }
    let inner_edges = (0..n).map(|k| [k * stride, ((k + 1) % n) * stride]).collect();
    let outer_edges = (0..n)
        .map(|k| [k * stride + layout.radial, ((k + 1) % n) * stride + layout.radial])
        .collect();
    Ok(Mesh {
        nodes,
        triangles,
        inner_edges,
        outer_edges,
        resolution: h,
        layout: Some(layout),
        hole: Some(Circle { center: c, radius: r }),
    })
}

/// Polar grid of a full disk centered at the origin: a center node fanned to the
/// first ring, then quads split into triangles. All boundary edges are OUTER.
pub fn build_disk_mesh(radius: f64, angular: usize, rings: usize) -> Mesh {
    assert!(angular >= 3 && rings >= 1);
    let mut nodes = vec![[0.0, 0.0]];
    for k in 0..angular {
        let theta = TAU * k as f64 / angular as f64;
        for j in 1..=rings {
            let rho = radius * j as f64 / rings as f64;
            nodes.push([rho * theta.cos(), rho * theta.sin()]);
        }
    }
    let id = |k: usize, j: usize| 1 + (k % angular) * rings + (j - 1);
    let mut triangles = Vec::new();
    for k in 0..angular {
        triangles.push([0, id(k, 1), id(k + 1, 1)]);
        for j in 1..rings {
            let (a, b, c, d) = (id(k, j), id(k + 1, j), id(k + 1, j + 1), id(k, j + 1));
            triangles.push([a, d, c]);
            triangles.push([a, c, b]);
        }
    }
    let outer_edges = (0..angular).map(|k| [id(k, rings), id(k + 1, rings)]).collect();
    Mesh {
        nodes,
        triangles,
        inner_edges: Vec::new(),
        outer_edges,
        resolution: radius / rings as f64,
        layout: None,
        hole: None,
    }
}

/// Summary of a successful conformity audit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshAudit {
    pub interior_edges: usize,
    pub boundary_edges: usize,
    pub min_area: f64,
}

impl Mesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.nodes[a], self.nodes[b], self.nodes[c])
    }

    /// Checks positive orientation and that every interior edge is shared by two
    /// triangles and every boundary edge by one, with the boundary edges being
    /// exactly the tagged INNER and OUTER edges.
    pub fn audit(&self) -> Result<MeshAudit> {
        let mut counts: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * self.triangles.len());
        let mut min_area = f64::INFINITY;
        for (i, t) in self.triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= self.nodes.len()) || t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::NonConforming(format!("triangle {i} has invalid vertices {t:?}")));
            }
            let area = self.triangle_area(i);
            if !(area > 0.0) {
                return Err(Error::NonConforming(format!("triangle {i} has area {area:e}")));
            }
            min_area = min_area.min(area);
            for (p, q) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                *counts.entry(edge_key(p, q)).or_default() += 1;
            }
        }
        let mut boundary: Vec<(usize, usize)> = Vec::new();
        let mut interior = 0;
        for (&edge, &count) in &counts {
            match count {
                1 => boundary.push(edge),
                2 => interior += 1,
                _ => return Err(Error::NonConforming(format!("edge {edge:?} is shared by {count} triangles"))),
            }
        }
        let mut tagged: Vec<(usize, usize)> = self
            .inner_edges
            .iter()
            .chain(&self.outer_edges)
            .map(|e| edge_key(e[0], e[1]))
            .collect();
        boundary.sort_unstable();
        tagged.sort_unstable();
        if boundary != tagged {
            return Err(Error::NonConforming(format!(
                "{} boundary edges found but {} tagged",
                boundary.len(),
                tagged.len()
            )));
        }
        Ok(MeshAudit { interior_edges: interior, boundary_edges: boundary.len(), min_area })
    }

    /// Largest relative residuals `(inner, outer)` of boundary nodes against the
    /// hole circle and the outer curve.
    pub fn boundary_residuals(&self, outer: &OuterDomain) -> (f64, f64) {
        let mut inner_res = 0.0_f64;
        if let Some(hole) = self.hole {
            for &i in &edge_nodes(&self.inner_edges) {
                let d = distance(self.nodes[i], hole.center);
                inner_res = inner_res.max((d - hole.radius).abs() / hole.radius);
            }
        }
        let mut outer_res = 0.0_f64;
        for &i in &edge_nodes(&self.outer_edges) {
            let p = self.nodes[i];
            let rho = outer.radius_at(p[1].atan2(p[0]));
            outer_res = outer_res.max(outer.level(p).abs() / rho);
        }
        (inner_res, outer_res)
    }

    /// Minimum over triangles of `2 · inradius / circumradius` (1 for equilateral).
    pub fn min_quality(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.quality(t)).fold(f64::INFINITY, f64::min)
    }

    pub fn quality(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        let (la, lb, lc) = (distance(pb, pc), distance(pc, pa), distance(pa, pb));
        let area = signed_area(pa, pb, pc);
        16.0 * area * area / ((la + lb + lc) * la * lb * lc)
    }

    pub fn max_edge_length(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .map(|(i, j)| distance(self.nodes[i], self.nodes[j]))
            .fold(0.0, f64::max)
    }

    /// Nodes on INNER edges, sorted.
    pub fn inner_nodes(&self) -> Vec<usize> {
        edge_nodes(&self.inner_edges)
    }

    pub fn outer_nodes(&self) -> Vec<usize> {
        edge_nodes(&self.outer_edges)
    }

    /// Index of grid node `(ray k, layer j)` for mapped annulus meshes.
    pub fn grid_index(&self, k: usize, j: usize) -> Option<usize> {
        let layout = self.layout?;
        (j <= layout.radial).then(|| (k % layout.angular) * (layout.radial + 1) + j)
    }

    /// For mapped grids, the node at the opposite angle in the same layer. When
    /// the hole is centered this is the point reflection `x ↦ -x`.
    pub fn opposite_node(&self, i: usize) -> Option<usize> {
        let layout = self.layout?;
        let stride = layout.radial + 1;
        let (k, j) = (i / stride, i % stride);
        self.grid_index(k + layout.angular / 2, j)
    }

    /// Copy with every coordinate multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Mesh {
        let mut m = self.clone();
        for p in &mut m.nodes {
            p[0] *= s;
            p[1] *= s;
        }
        m.resolution *= s;
        m.hole = m.hole.map(|c| Circle { center: [c.center[0] * s, c.center[1] * s], radius: c.radius * s });
        m
    }

    /// Linear interpolation of nodal `values` at `p`, or `None` if `p` is not
    /// inside (or within a small tolerance of) any triangle.
    pub fn interpolate(&self, values: &[f64], p: [f64; 2]) -> Option<f64> {
        let candidates: Vec<usize> = match (self.layout, self.hole) {
            (Some(layout), Some(hole)) => {
                let theta = polar_angle(p, hole.center);
                let k = ((theta / TAU * layout.angular as f64).floor() as usize) % layout.angular;
                let per_sector = 2 * layout.radial;
                [k + layout.angular - 1, k, k + 1]
                    .iter()
                    .flat_map(|&s| {
                        let s = s % layout.angular;
                        s * per_sector..(s + 1) * per_sector
                    })
                    .collect()
            }
            _ => (0..self.triangles.len()).collect(),
        };
        let mut best: Option<(f64, f64)> = None;
        for t in candidates {
            let [a, b, c] = self.triangles[t];
            let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
            let area = signed_area(pa, pb, pc);
            let la = signed_area(p, pb, pc) / area;
            let lb = signed_area(pa, p, pc) / area;
            let lc = 1.0 - la - lb;
            let worst = la.min(lb).min(lc);
            if best.map_or(true, |(w, _)| worst > w) {
                best = Some((worst, la * values[a] + lb * values[b] + lc * values[c]));
            }
        }
        best.filter(|(w, _)| *w > -1e-6).map(|(_, v)| v)
    }

    /// Plain-text export: a header line, node lines `x y`, triangle lines
    /// `i j k`, then edge lines `i j TAG`.
    pub fn write_to(&self, mut out: impl io::Write) -> io::Result<()> {
        out.write_all(self.to_text().as_bytes())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(48 * self.nodes.len() + 24 * self.triangles.len());
        let _ = writeln!(
            s,
            "nodes {} triangles {} inner_edges {} outer_edges {}",
            self.nodes.len(),
            self.triangles.len(),
            self.inner_edges.len(),
            self.outer_edges.len()
        );
        for p in &self.nodes {
            let _ = writeln!(s, "{:.16e} {:.16e}", p[0], p[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        for (edges, tag) in [(&self.inner_edges, EdgeTag::Inner), (&self.outer_edges, EdgeTag::Outer)] {
            for e in edges {
                let _ = writeln!(s, "{} {} {}", e[0], e[1], tag.label());
            }
        }
        s
    }

    /// Parses the export format back. Layout and hole metadata are not stored
    /// in the file and come back empty; `resolution` is the longest edge.
    pub fn parse(text: &str) -> Result<Mesh> {
        let bad = |what: &str| Error::BadParameter(format!("mesh text: {what}"));
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty"))?.split_whitespace().collect();
        if header.len() != 8 || header[0] != "nodes" || header[2] != "triangles" {
            return Err(bad("malformed header"));
        }
        let count = |i: usize| header[i].parse::<usize>().map_err(|_| bad("bad count"));
        let (n, t, ni, no) = (count(1)?, count(3)?, count(5)?, count(7)?);
        let mut fields = |k: usize| -> Result<Vec<&str>> {
            let parts: Vec<&str> = lines.next().ok_or_else(|| bad("truncated"))?.split_whitespace().collect();
            if parts.len() != k {
                return Err(bad("wrong field count"));
            }
            Ok(parts)
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
        let idx = |s: &str| s.parse::<usize>().map_err(|_| bad("bad index"));
        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            let f = fields(2)?;
            nodes.push([num(f[0])?, num(f[1])?]);
        }
        let mut triangles = Vec::with_capacity(t);
        for _ in 0..t {
            let f = fields(3)?;
            triangles.push([idx(f[0])?, idx(f[1])?, idx(f[2])?]);
        }
        let mut inner_edges = Vec::with_capacity(ni);
        let mut outer_edges = Vec::with_capacity(no);
        for _ in 0..ni + no {
            let f = fields(3)?;
            let e = [idx(f[0])?, idx(f[1])?];
            match f[2] {
                "INNER" => inner_edges.push(e),
                "OUTER" => outer_edges.push(e),
                _ => return Err(bad("unknown edge tag")),
            }
        }
        let mut mesh = Mesh { nodes, triangles, inner_edges, outer_edges, resolution: 0.0, layout: None, hole: None };
        mesh.resolution = mesh.max_edge_length();
        Ok(mesh)
    }
}

fn edge_key(p: usize, q: usize) -> (usize, usize) {
    if p < q {
        (p, q)
    } else {
        (q, p)
    }
}

fn edge_nodes(edges: &[[usize; 2]]) -> Vec<usize> {
    let mut v: Vec<usize> = edges.iter().flatten().copied().collect();
    v.sort_unstable();
    v.dedup();
    v
}
