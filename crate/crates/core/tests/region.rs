use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ratecert::poly::*;
use ratecert::programs::{solve_at, AnalysisKind, AnalysisSpec, FieldSpec};
use ratecert::region::*;

fn p(src: &str, n: usize) -> Polynomial {
    parse_polynomial(src, n).unwrap()
}

fn set(gs: &[&str]) -> SemialgebraicSet {
    SemialgebraicSet::new(2, gs.iter().map(|g| p(g, 2)).collect()).unwrap()
}

/// Minimum of `v` on `{g = 0}` for a star-shaped `g`, by a fine angle scan.
fn scan_min(v: &Polynomial, g: &Polynomial) -> f64 {
    (0..20_000)
        .map(|j| {
            let th = std::f64::consts::TAU * j as f64 / 20_000.0;
            let u = [th.cos(), th.sin()];
            let (mut a, mut b) = (0.0, 100.0);
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                if g.eval(&[m * u[0], m * u[1]]) >= 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            v.eval(&[a * u[0], a * u[1]])
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn concentric_levels() {
    for r in [0.5, 1.0, 3.0] {
        let c = max_sublevel(&p("x1^2 + x2^2", 2), &SemialgebraicSet::ball(2, r)).unwrap();
        assert!((c - LEVEL_SHRINK * r * r).abs() <= 1e-6 * r * r, "R = {r}: c* = {c}");
    }
}

#[test]
fn ellipse_in_the_unit_disk() {
    let v = p("x1^2 + 4*x2^2", 2);
    let c = max_sublevel(&v, &SemialgebraicSet::ball(2, 1.0)).unwrap();
    let oracle = scan_min(&v, &p("1 - x1^2 - x2^2", 2));
    assert!((oracle - 1.0).abs() < 1e-6);
    assert!((c - LEVEL_SHRINK * oracle).abs() <= 1e-6, "c* = {c}");
}

#[test]
fn two_constraints_take_the_smaller_boundary_minimum() {
    let v = p("x1^2 + x2^2", 2);
    let gs = ["4 - x1^2 - x2^2", "1 - x1^2/4 - x2^2"];
    // The parser has no division, so write the second constraint explicitly.
    let g2 = p("1 - 0.25*x1^2 - x2^2", 2);
    let dom = SemialgebraicSet::new(2, vec![p(gs[0], 2), g2.clone()]).unwrap();
    let c = max_sublevel(&v, &dom).unwrap();
    let oracle = scan_min(&v, &p(gs[0], 2)).min(scan_min(&v, &g2));
    assert!((oracle - 1.0).abs() < 1e-6);
    assert!((c - LEVEL_SHRINK * oracle).abs() <= 1e-6, "c* = {c}");
}

#[test]
fn global_domain_has_no_level() {
    let err = max_sublevel(&p("x1^2 + x2^2", 2), &SemialgebraicSet::global(2)).unwrap_err();
    assert!(matches!(err, RegionError::Unbounded { .. }));
}

#[test]
fn invariance_examples() {
    let v = p("x1^2", 1);
    assert!(check_invariance(&v, 1.0, &[p("-x1", 1)], 100).passed);
    let bad = check_invariance(&v, 1.0, &[p("x1", 1)], 100);
    assert!(!bad.passed);
    assert!((bad.worst_point[0].abs() - 1.0).abs() < 1e-9);
}

#[test]
fn boundary_examples() {
    let circle = boundary_2d(&p("x1^2 + x2^2", 2), 1.0, 360).unwrap();
    assert_eq!(circle.len(), 360);
    for q in &circle {
        assert!((q[0].hypot(q[1]) - 1.0).abs() < 1e-6);
    }
    let ellipse = boundary_2d(&p("x1^2 + 4*x2^2", 2), 1.0, 720).unwrap();
    let x_max = ellipse.iter().map(|q| q[0].abs()).fold(0.0, f64::max);
    let y_max = ellipse.iter().map(|q| q[1].abs()).fold(0.0, f64::max);
    assert!((x_max - 1.0).abs() < 1e-6 && (y_max - 0.5).abs() < 1e-6);
    for q in &ellipse {
        assert!((q[0] * q[0] + 4.0 * q[1] * q[1] - 1.0).abs() < 1e-6);
    }
    assert_eq!(boundary_2d(&p("x1^2 + x2^2", 2), 1.0, 4).unwrap().len(), 4);
    assert!(matches!(
        boundary_2d(&p("x1^2", 1), 1.0, 8),
        Err(RegionError::NotPlanar(1))
    ));
}

#[test]
fn rays_that_miss_the_level_fall_back_to_a_contour() {
    // Along the diagonals V peaks at 1 below the level 1.5, so those rays
    // never cross and the boundary comes from the grid contour.
    let v = p("x1^2 + x2^2 - x1^2*x2^2", 2);
    let pts = boundary_2d(&v, 1.5, 200).unwrap();
    assert!(pts.len() > 10);
    for q in &pts {
        assert!((v.eval(q) - 1.5).abs() < 0.1, "{q:?}");
    }
}

#[test]
fn nesting_of_scaled_discs() {
    let v = p("x1^2 + x2^2", 2);
    assert!(check_nesting((&v, 0.5), (&v, 1.0), 500, 1).nested());
    let rep = check_nesting((&v, 1.0), (&v, 0.5), 500, 1);
    assert!(!rep.nested());
    assert!(rep.worst_ratio > 1.9);
}

#[test]
fn certified_region_is_sound_and_invariant() {
    let field = PolyVectorField::new(vec![p("-x2", 2), p("-(1-x1^2)*x2 + x1", 2)]).unwrap();
    let spec = AnalysisSpec::new(
        FieldSpec::Polynomial(field),
        SemialgebraicSet::ball(2, 1.2),
        AnalysisKind::Exponential { d: 2 },
    );
    let (_, cert) = solve_at(&spec, 0.1, false).unwrap();
    let cert = cert.unwrap();
    let reg = analyze_region(&cert.v, &cert.domain, Some(&cert.program_field), 256).unwrap();
    assert!(reg.invariance_checked(), "{:?}", reg.invariance);
    for q in &reg.boundary {
        assert!(cert.v.eval(q) <= reg.c_star * (1.0 + 1e-6));
        assert!(cert.domain.margin(q) > 0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut inside = 0;
    while inside < 500 {
        let x = [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)];
        if cert.v.eval(&x) <= reg.c_star {
            inside += 1;
            assert!(cert.domain.margin(&x) > 0.0, "{x:?}");
        }
    }
}
