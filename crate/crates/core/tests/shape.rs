use std::f64::consts::PI;
use steklov_core::eig::DEFAULT_TOLERANCE;
use steklov_core::geometry::*;
use steklov_core::instance::{solve_instance, solve_with_layout};
use steklov_core::shape::*;
use steklov_core::Error;

const E1: [f64; 2] = [1.0, 0.0];

fn disk_problem(small: f64, t: f64) -> AnnulusProblem {
    AnnulusProblem::new(OuterDomain::disk(2.0).unwrap(), HoleSpec::new(small, E1, t).unwrap()).unwrap()
}

#[test]
fn spectral_energy_matches_disk_fem() {
    let cases: [(fn(f64) -> f64, f64); 3] = [(|_| 1.0, 0.0), (f64::cos, PI), (|t| 2.0 * (3.0 * t).sin(), 12.0 * PI)];
    for (g, exact) in cases {
        let spectral = harmonic_extension_energy(&CircleTrace::sample(128, 0.5, g).unwrap());
        assert!((spectral - exact).abs() < 1e-8);
        let fem = fem_extension_energy(0.5, 256, 64, g).unwrap();
        if exact == 0.0 {
            assert!(fem.abs() < 1e-10);
        } else {
            assert!((fem - spectral).abs() / spectral < 1e-3, "{fem} vs {spectral}");
        }
    }
}

#[test]
fn concentric_term_one_has_closed_form() {
    // |∇u| = c/r on the hole with c = 1/(√(2πR) ln(R/r)); g = −(c/r) cos θ.
    let s = solve_instance(&disk_problem(1.0, 0.0), 0.05, DEFAULT_TOLERANCE).unwrap();
    let report = second_shape_derivative(&s.flux, E1).unwrap();
    let c = 1.0 / ((2.0 * PI * 2.0).sqrt() * 2.0_f64.ln());
    let exact = -2.0 * PI * c * c;
    assert!((report.term_i - exact).abs() / exact.abs() < 1e-2, "{} vs {exact}", report.term_i);
}

#[test]
fn derivative_vanishes_at_the_center() {
    for outer in [OuterDomain::disk(2.0).unwrap(), OuterDomain::ellipse(2.0, 1.0).unwrap()] {
        for w in [E1, [0.6, 0.8]] {
            let p = AnnulusProblem::new(outer.clone(), HoleSpec::new(0.3, w, 0.0).unwrap()).unwrap();
            let s = solve_instance(&p, 0.05, DEFAULT_TOLERANCE).unwrap();
            let first = first_shape_derivative(&s.flux, w).unwrap();
            let scale = s.flux.integrate(|x| x.grad_norm.powi(2));
            assert!(first.abs() < 1e-10 * scale, "{first}");
        }
    }
}

#[test]
fn first_derivative_matches_finite_differences() {
    let p = disk_problem(0.5, 0.75);
    let s = solve_instance(&p, 0.05, DEFAULT_TOLERANCE).unwrap();
    let first = first_shape_derivative(&s.flux, E1).unwrap();
    let fd = finite_difference_derivatives(&p, 0.05, 1.5e-3, DEFAULT_TOLERANCE).unwrap();
    assert!(first < 0.0);
    assert!((first - fd.fd_first).abs() / fd.fd_first.abs() < 0.02);
    // Independent multipole-collocation value of dσ/dt at t = 0.75.
    assert!((fd.fd_first + 0.133_597_218).abs() < 2e-4, "{}", fd.fd_first);
}

#[test]
fn report_terms_and_serialization() {
    let s = solve_instance(&disk_problem(0.5, 0.3), 0.1, DEFAULT_TOLERANCE).unwrap();
    let report = second_shape_derivative(&s.flux, E1).unwrap();
    assert_eq!(report.sigma_second, report.term_i + report.term_ii + report.term_iii_extra);
    assert!(report.signs_hold());
    assert!((report.t - 0.3).abs() < 1e-15);
    let json = serde_json::to_value(&report).unwrap();
    for key in ["sigma", "sigma_prime", "term_I", "term_II", "term_III_extra", "sigma_second", "fd_first", "fd_second", "h", "delta", "t"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn finite_difference_second_derivative_changes_sign() {
    // The true σ″ is positive at larger offsets, so σ is not concave in t even
    // though the boundary formula is negative by construction.
    let p = disk_problem(0.5, 0.75);
    let fd = finite_differences(&p, 0.05, 1.5e-3, 7.5e-3, DEFAULT_TOLERANCE).unwrap();
    assert!((fd.fd_second - 0.040_18).abs() < 2e-3, "{}", fd.fd_second);
    let s = solve_instance(&p, 0.05, DEFAULT_TOLERANCE).unwrap();
    let report = second_shape_derivative(&s.flux, E1).unwrap();
    assert!(report.sigma_second < 0.0);
}

#[test]
fn step_refinement_is_second_order() {
    let p = disk_problem(0.5, 0.75);
    let coarse = finite_difference_derivatives(&p, 0.1, 0.04, DEFAULT_TOLERANCE).unwrap();
    let fine = finite_difference_derivatives(&p, 0.1, 0.02, DEFAULT_TOLERANCE).unwrap();
    let finer = finite_difference_derivatives(&p, 0.1, 0.01, DEFAULT_TOLERANCE).unwrap();
    let ratio = (coarse.fd_first - fine.fd_first) / (fine.fd_first - finer.fd_first);
    assert!((3.0..5.0).contains(&ratio), "{ratio}");
}

#[test]
fn finite_differences_decrease_across_the_range() {
    for t in [0.2, 0.6, 1.0, 1.3] {
        let fd = finite_difference_derivatives(&disk_problem(0.5, t), 0.1, 1.5e-3, DEFAULT_TOLERANCE).unwrap();
        assert!(fd.fd_first < 0.0, "t={t}: {}", fd.fd_first);
    }
    let fd = finite_difference_derivatives(&disk_problem(0.5, 0.0), 0.1, 1.5e-3, DEFAULT_TOLERANCE).unwrap();
    assert!(fd.fd_first.abs() < 1e-8);
}

#[test]
fn stencil_outside_range_is_rejected() {
    let err = finite_difference_derivatives(&disk_problem(0.5, 1.49), 0.1, 0.02, DEFAULT_TOLERANCE).unwrap_err();
    assert!(matches!(err, Error::StepTooLarge { .. }));
}

#[test]
fn derivative_field_is_orthogonal_and_odd_at_the_center() {
    let p = disk_problem(0.5, 0.0);
    let s = solve_instance(&p, 0.05, DEFAULT_TOLERANCE).unwrap();
    let first = first_shape_derivative(&s.flux, E1).unwrap();
    let field = solve_derivative_bvp(&s.mesh, &s.system, &s.pair, first, E1).unwrap();
    assert!(field.orthogonality.abs() < 1e-6);
    assert!(field.compatibility < COMPATIBILITY_LIMIT);
    let peak = field.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    for i in 0..field.values.len() {
        let j = s.mesh.opposite_node(i).unwrap();
        assert!((field.values[i] + field.values[j]).abs() < 1e-8 * peak);
    }
    // Independent multipole-collocation value of −2∮ ∂ν u′ u′ for this shell.
    assert!((field.boundary_energy + 0.460_930_006_65).abs() < 5e-3, "{}", field.boundary_energy);
}

#[test]
fn derivative_field_matches_eigenfunction_differences() {
    let p = disk_problem(0.5, 0.75);
    let h = 0.04;
    let delta = 1e-3 * p.t_max();
    let layout = stencil_layout(&p, &[-delta, delta], h).unwrap();
    let s = solve_with_layout(&p, layout, h, DEFAULT_TOLERANCE).unwrap();
    let first = first_shape_derivative(&s.flux, E1).unwrap();
    let field = solve_derivative_bvp(&s.mesh, &s.system, &s.pair, first, E1).unwrap();
    let c = p.hole.center();
    let points: Vec<[f64; 2]> = (0..48)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / 48.0;
            [c[0] + 0.6 * a.cos(), c[1] + 0.6 * a.sin()]
        })
        .collect();
    let fd = eigenfunction_difference(&p, layout, h, delta, DEFAULT_TOLERANCE, &points).unwrap();
    let bvp: Vec<f64> = points.iter().map(|&q| s.mesh.interpolate(&field.values, q).unwrap()).collect();
    let peak = bvp.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let worst = bvp.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 0.05 * peak, "{worst} vs {peak}");
}
