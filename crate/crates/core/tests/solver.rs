use std::f64::consts::PI;
use steklov_core::analytic::{concentric_mode_sigma, concentric_sigma, eccentric_bounds, ShellSpec};
use steklov_core::eig::{rayleigh, solve_deflated, solve_second, solve_smallest, DEFAULT_TOLERANCE};
use steklov_core::fem::{assemble, reaction_flux, recover_inner_flux};
use steklov_core::geometry::*;
use steklov_core::instance::solve_instance;

fn disk_problem(big: f64, small: f64, w: [f64; 2], t: f64) -> AnnulusProblem {
    AnnulusProblem::new(OuterDomain::disk(big).unwrap(), HoleSpec::new(small, w, t).unwrap()).unwrap()
}

#[test]
fn concentric_flux_is_constant_and_balanced() {
    let p = disk_problem(2.0, 1.0, [1.0, 0.0], 0.0);
    let s = solve_instance(&p, 0.05, DEFAULT_TOLERANCE).unwrap();
    let fluxes: Vec<f64> = s.flux.samples.iter().map(|x| x.flux).collect();
    let hi = fluxes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = fluxes.iter().copied().fold(f64::INFINITY, f64::min);
    assert!((hi - lo) / hi.abs() < 0.05);
    // u = c ln(|x|/r) with 2πR (c ln(R/r))² = 1, so |∂u/∂ν| = c/r on the hole.
    let c = 1.0 / ((2.0 * PI * 2.0).sqrt() * 2.0_f64.ln());
    assert!((hi.abs() - c).abs() / c < 0.01, "{} vs {c}", hi.abs());
    assert!(s.flux.is_sign_constant());
    for x in &s.flux.samples {
        assert_eq!(x.grad_norm, x.flux.abs());
    }
    let reactions: f64 = s.flux.samples.iter().map(|x| x.reaction).sum();
    let boundary: f64 = s.system.boundary_mass.matvec(&s.pair.u).iter().sum();
    assert!((reactions + s.sigma() * boundary).abs() < 1e-8 * s.sigma());
}

#[test]
fn eccentric_flux_keeps_its_sign() {
    let p = disk_problem(2.0, 0.5, [1.0, 0.0], 0.5);
    let s = solve_instance(&p, 0.05, DEFAULT_TOLERANCE).unwrap();
    assert!(s.flux.is_sign_constant());
    assert!(s.flux.samples.iter().all(|x| x.flux < 0.0));
}

#[test]
fn manufactured_logarithm_flux_converges() {
    // v = ln(|x − c|/r) has ∂v/∂ν = −1/r on the hole.
    let p = disk_problem(2.0, 0.5, [0.0, 1.0], 0.6);
    let c = p.hole.center();
    let mut errors = Vec::new();
    for h in [0.1, 0.05, 0.025] {
        let mesh = build_mesh(&p, h).unwrap();
        let system = assemble(&mesh).unwrap();
        let v: Vec<f64> = mesh.nodes.iter().map(|x| ((x[0] - c[0]).hypot(x[1] - c[1]) / 0.5).ln()).collect();
        let samples = reaction_flux(&mesh, &system, &v).unwrap();
        let err = samples.iter().map(|x| (x.flux + 2.0).abs()).fold(0.0, f64::max);
        errors.push(err / 2.0);
    }
    assert!(errors[2] < 0.05, "{errors:?}");
    for w in errors.windows(2) {
        assert!(w[1] < 0.6 * w[0], "{errors:?}");
    }
}

#[test]
fn rayleigh_quotients_of_trial_functions() {
    let p = disk_problem(2.0, 1.0, [1.0, 0.0], 0.0);
    let exact = concentric_sigma(ShellSpec::new(2.0, 1.0, 2).unwrap());
    let mut errors = Vec::new();
    for h in [0.1, 0.05] {
        let mesh = build_mesh(&p, h).unwrap();
        let system = assemble(&mesh).unwrap();
        let log: Vec<f64> = mesh.nodes.iter().map(|x| x[0].hypot(x[1]).ln()).collect();
        errors.push((rayleigh(&system, &log).unwrap() - exact).abs() / exact);
        let linear: Vec<f64> = mesh.nodes.iter().map(|x| x[0].hypot(x[1]) - 1.0).collect();
        let sigma = solve_smallest(&system, DEFAULT_TOLERANCE).unwrap().sigma;
        assert!(rayleigh(&system, &linear).unwrap() >= sigma);
    }
    assert!(errors[1] < 1e-3 && errors[1] < 0.3 * errors[0], "{errors:?}");
}

#[test]
fn eigenvalue_scales_inversely_with_coordinates() {
    let p = disk_problem(2.0, 0.5, [1.0, 0.0], 0.4);
    let mesh = build_mesh(&p, 0.1).unwrap();
    let base = solve_smallest(&assemble(&mesh).unwrap(), DEFAULT_TOLERANCE).unwrap().sigma;
    for s in [0.5, 3.0] {
        let scaled = solve_smallest(&assemble(&mesh.scaled(s)).unwrap(), DEFAULT_TOLERANCE).unwrap().sigma;
        assert!((scaled * s - base).abs() < 1e-9 * base);
    }
}

#[test]
fn eccentric_value_lies_between_bounds() {
    let s = solve_instance(&disk_problem(2.0, 0.5, [1.0, 0.0], 1.0), 0.05, DEFAULT_TOLERANCE).unwrap();
    let (upper, lower) = eccentric_bounds(2.0, 0.5).unwrap();
    assert!(lower < s.sigma() && s.sigma() < upper);
    assert!((lower - 1.0 / 12.0).abs() < 1e-15);
}

#[test]
fn concentric_first_mode_is_second_eigenvalue() {
    for (small, h) in [(1.0, 0.05), (0.5, 0.05)] {
        let s = solve_instance(&disk_problem(2.0, small, [1.0, 0.0], 0.0), h, DEFAULT_TOLERANCE).unwrap();
        let second = s.second(DEFAULT_TOLERANCE).unwrap();
        let exact = concentric_mode_sigma(2.0, small, 1).unwrap();
        assert!((second.sigma - exact).abs() / exact < 2e-3, "{} vs {exact}", second.sigma);
        assert!(second.sigma / s.sigma() >= 1.001);
        let third = solve_deflated(&s.system, &[&s.pair, &second], DEFAULT_TOLERANCE).unwrap();
        // The m = 1 mode is double.
        assert!((third.sigma - exact).abs() / exact < 2e-3);
        assert!(third.sigma >= second.sigma * (1.0 - 1e-9));
    }
}

#[test]
fn structural_invariants_on_a_small_grid() {
    let ellipse = OuterDomain::ellipse(2.0, 1.0).unwrap();
    for (outer, r, w, frac) in [
        (OuterDomain::disk(2.0).unwrap(), 0.5, [1.0, 0.0], 0.0),
        (OuterDomain::disk(2.0).unwrap(), 0.5, [0.6, 0.8], 0.7),
        (ellipse.clone(), 0.3, [1.0, 0.0], 0.0),
        (ellipse.clone(), 0.3, [0.0, 1.0], 0.5),
        (ellipse, 0.3, [1.0, 0.0], 0.9),
    ] {
        let t = frac * admissible_range(&outer, r, w).unwrap();
        let p = AnnulusProblem::new(outer, HoleSpec::new(r, w, t).unwrap()).unwrap();
        let s = solve_instance(&p, 0.05, DEFAULT_TOLERANCE).unwrap();
        let norm = s.system.boundary_mass.bilinear(&s.pair.u, &s.pair.u);
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(s.min_relative_value() >= -1e-8);
        assert!(s.system.dirichlet_nodes.iter().all(|&d| s.pair.u[d] == 0.0));
        let second = solve_second(&s.system, &s.pair, DEFAULT_TOLERANCE).unwrap();
        assert!(second.sigma / s.sigma() >= 1.001);
        if t == 0.0 {
            assert!(s.reflection_defect().unwrap() <= 1e-6);
        }
        let flux = recover_inner_flux(&s.mesh, &s.system, &s.pair).unwrap();
        assert!(flux.is_sign_constant());
    }
}

#[test]
fn concentric_convergence_is_second_order() {
    let p = disk_problem(2.0, 1.0, [1.0, 0.0], 0.0);
    let exact = concentric_sigma(ShellSpec::new(2.0, 1.0, 2).unwrap());
    let mut layout = MeshLayout::for_problem(&p, 0.2).unwrap();
    let mut errors = Vec::new();
    for level in 0..3 {
        let mesh = build_mesh_with_layout(&p, layout, 0.2 / f64::from(1 << level)).unwrap();
        let sigma = solve_smallest(&assemble(&mesh).unwrap(), DEFAULT_TOLERANCE).unwrap().sigma;
        errors.push((sigma - exact).abs());
        layout = layout.refined();
    }
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((1.9..2.1).contains(&order), "{errors:?}");
    }
}
