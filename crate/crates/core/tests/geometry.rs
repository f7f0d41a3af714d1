use proptest::prelude::*;
use std::f64::consts::TAU;
use steklov_core::geometry::*;
use steklov_core::Error;

/// Distance from `p` to the outer curve by dense angular sampling.
fn sampled_distance(outer: &OuterDomain, p: [f64; 2], samples: usize) -> f64 {
    (0..samples)
        .map(|k| {
            let q = outer.boundary_point(TAU * k as f64 / samples as f64);
            (q[0] - p[0]).hypot(q[1] - p[1])
        })
        .fold(f64::INFINITY, f64::min)
}

/// Independent `t_max`: bisection on the sampled clearance.
fn sampled_range(outer: &OuterDomain, r: f64, w: [f64; 2]) -> f64 {
    let gap = |t: f64| sampled_distance(outer, [t * w[0], t * w[1]], 100_000) - r;
    let (mut lo, mut hi) = (0.0, outer.max_radius());
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn ellipse_range_matches_dense_sampling() {
    let ellipse = OuterDomain::ellipse(2.0, 1.0).unwrap();
    for (r, w) in [(0.25, [1.0, 0.0]), (0.3, [1.0, 0.0]), (0.3, [0.0, 1.0])] {
        let t = admissible_range(&ellipse, r, w).unwrap();
        let oracle = sampled_range(&ellipse, r, w);
        assert!((t - oracle).abs() < 1e-6, "r={r} w={w:?}: {t} vs {oracle}");
    }
    let t = admissible_range(&ellipse, 0.25, [1.0, 0.0]).unwrap();
    assert!((t - 1.75).abs() < 1e-9);
}

#[test]
fn profile_range_matches_dense_sampling() {
    let outer = OuterDomain::radial_profile(
        1.0,
        vec![Harmonic { order: 2, cos: 0.2, sin: 0.0 }, Harmonic { order: 4, cos: 0.0, sin: 0.05 }],
    )
    .unwrap();
    let s = 0.5_f64.sqrt();
    let w = [s, s];
    let t = admissible_range(&outer, 0.2, w).unwrap();
    let oracle = sampled_range(&outer, 0.2, w);
    assert!((t - oracle).abs() < 1e-5, "{t} vs {oracle}");
}

#[test]
fn hole_exceeding_inradius() {
    let ellipse = OuterDomain::ellipse(2.0, 1.0).unwrap();
    assert!(matches!(admissible_range(&ellipse, 1.01, [1.0, 0.0]), Err(Error::HoleTooLarge { .. })));
}

#[test]
fn mesh_export_round_trip_preserves_audit() {
    let p = AnnulusProblem::new(OuterDomain::ellipse(2.0, 1.0).unwrap(), HoleSpec::new(0.3, [0.0, 1.0], 0.4).unwrap())
        .unwrap();
    let mesh = build_mesh(&p, 0.15).unwrap();
    let mut buffer = Vec::new();
    mesh.write_to(&mut buffer).unwrap();
    let back = Mesh::parse(std::str::from_utf8(&buffer).unwrap()).unwrap();
    assert_eq!(back.nodes, mesh.nodes);
    back.audit().unwrap();
}

#[test]
fn concentric_ellipse_mesh_is_centrally_symmetric() {
    let p = AnnulusProblem::new(OuterDomain::ellipse(2.0, 1.0).unwrap(), HoleSpec::new(0.3, [1.0, 0.0], 0.0).unwrap())
        .unwrap();
    let mesh = build_mesh(&p, 0.1).unwrap();
    for i in 0..mesh.node_count() {
        let (a, b) = (mesh.nodes[i], mesh.nodes[mesh.opposite_node(i).unwrap()]);
        assert!((a[0] + b[0]).abs() < 1e-13 && (a[1] + b[1]).abs() < 1e-13);
    }
}

fn outer_domains() -> impl Strategy<Value = OuterDomain> {
    prop_oneof![
        (1.0..3.0f64).prop_map(|r| OuterDomain::disk(r).unwrap()),
        (1.0..3.0f64, 0.5..1.0f64).prop_map(|(a, f)| OuterDomain::ellipse(a, a * f).unwrap()),
        (-0.25..0.25f64, -0.05..0.05f64).prop_map(|(c2, s4)| OuterDomain::radial_profile(
            1.0,
            vec![Harmonic { order: 2, cos: c2, sin: 0.0 }, Harmonic { order: 4, cos: 0.0, sin: s4 }]
        )
        .unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn disk_range_is_exact(big in 0.5..5.0f64, frac in 0.05..0.95f64, angle in 0.0..TAU) {
        let outer = OuterDomain::disk(big).unwrap();
        let r = frac * big;
        let t = admissible_range(&outer, r, HoleSpec::direction_at(angle)).unwrap();
        prop_assert!((t - (big - r)).abs() < 1e-10);
    }

    #[test]
    fn range_decreases_with_radius(outer in outer_domains(), f1 in 0.05..0.5f64, df in 0.01..0.3f64, angle in 0.0..TAU) {
        let w = HoleSpec::direction_at(angle);
        let inradius = outer.inradius();
        let (r1, r2) = (f1 * inradius, (f1 + df) * inradius);
        let t1 = admissible_range(&outer, r1, w).unwrap();
        let t2 = admissible_range(&outer, r2, w).unwrap();
        prop_assert!(t2 < t1, "r {r1} -> {t1}, r {r2} -> {t2}");
    }

    #[test]
    fn generated_meshes_pass_audit(outer in outer_domains(), f in 0.1..0.6f64, s in 0.0..0.9f64, angle in 0.0..TAU) {
        let r = f * outer.inradius();
        let w = HoleSpec::direction_at(angle);
        let t = s * admissible_range(&outer, r, w).unwrap();
        let p = AnnulusProblem::new(outer.clone(), HoleSpec::new(r, w, t).unwrap()).unwrap();
        let mesh = build_mesh(&p, 0.12).unwrap();
        let audit = mesh.audit().unwrap();
        prop_assert!(audit.min_area > 0.0);
        prop_assert!(mesh.max_edge_length() <= 0.12);
        let (inner, outer_res) = mesh.boundary_residuals(&p.outer);
        prop_assert!(inner < BOUNDARY_TOLERANCE && outer_res < BOUNDARY_TOLERANCE);
    }

    #[test]
    fn halving_h_quadruples_triangles(f in 0.1..0.5f64, s in 0.0..0.9f64, h in 0.08..0.3f64) {
        let outer = OuterDomain::disk(2.0).unwrap();
        let r = 2.0 * f;
        let p = AnnulusProblem::new(outer, HoleSpec::new(r, [1.0, 0.0], s * (2.0 - r)).unwrap()).unwrap();
        let coarse = build_mesh(&p, h).unwrap();
        let fine = build_mesh(&p, h / 2.0).unwrap();
        prop_assert!(fine.triangles.len() >= 4 * coarse.triangles.len());
        let (inner, outer_res) = fine.boundary_residuals(&p.outer);
        prop_assert!(inner < BOUNDARY_TOLERANCE && outer_res < BOUNDARY_TOLERANCE);
    }
}
