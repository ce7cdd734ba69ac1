use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ratecert::poly::*;
use ratecert::programs::{solve_at, AnalysisKind, AnalysisSpec, FieldSpec};
use ratecert::sos::*;
use ratecert_sdp::SolverOptions;

fn p(src: &str, n: usize) -> Polynomial {
    parse_polynomial(src, n).unwrap()
}

fn mono(e: &[u32]) -> Monomial {
    Monomial::new(e.to_vec())
}

fn opts() -> SolverOptions {
    SolverOptions::default()
}

/// `base + c * poly in Sigma[domain]`, minimizing `c` when asked.
fn one_param(base: &str, poly: &str, domain: SemialgebraicSet, degree: u32, minimize: bool) -> SosProgram {
    let n = domain.nvars();
    let mut prog = SosProgram::new(n);
    let c = prog.new_var("c");
    let expr = AffinePoly::from_poly(p(base, n)).add(&AffinePoly::term(c, p(poly, n)));
    prog.add_constraint("c", expr, domain, degree).unwrap();
    if minimize {
        prog.minimize(c, 1.0).unwrap();
    }
    prog
}

/// `poly in Sigma[domain]` with no decision variables.
fn fixed(poly: &str, domain: SemialgebraicSet, degree: u32) -> SosProgram {
    let n = domain.nvars();
    let mut prog = SosProgram::new(n);
    prog.add_constraint("fixed", AffinePoly::from_poly(p(poly, n)), domain, degree)
        .unwrap();
    prog
}

#[test]
fn gram_parameterization_examples() {
    let g = gram_parameterize(2, 1, false);
    assert_eq!(g.basis, vec![mono(&[0]), mono(&[1])]);
    assert_eq!(g.map[&mono(&[2])], vec![(1, 1)]);
    assert_eq!(g.map[&mono(&[1])], vec![(0, 1)]);
    assert_eq!(g.map[&mono(&[0])], vec![(0, 0)]);

    let h = gram_parameterize(4, 2, true);
    assert_eq!(h.basis, vec![mono(&[2, 0]), mono(&[1, 1]), mono(&[0, 2])]);

    let basis = vec![mono(&[1, 0]), mono(&[0, 1])];
    let q = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
    assert_eq!(gram_coefficients(&basis, &q), p("x1^2 - 2*x1*x2 + x2^2", 2));
    assert!(ratecert_sdp::min_eigenvalue(&q) > -1e-12);
}

#[test]
fn multiplier_degrees_round_down_to_even() {
    let c = |g: &str, degree: u32| SosConstraint {
        label: "c".into(),
        expr: AffinePoly::from_poly(p("1", 2)),
        domain: SemialgebraicSet::new(2, vec![p(g, 2)]).unwrap(),
        degree,
    };
    assert_eq!(putinar_allocate(&c("1 - x1^2 - x2^2", 8)), vec![Some(6)]);
    assert_eq!(putinar_allocate(&c("1 - x1^3", 8)), vec![Some(4)]);
    let global = SosConstraint {
        label: "g".into(),
        expr: AffinePoly::from_poly(p("1", 2)),
        domain: SemialgebraicSet::global(2),
        degree: 8,
    };
    assert!(putinar_allocate(&global).is_empty());
}

#[test]
fn shifted_square_has_zero_optimal_offset() {
    let prog = one_param("x1^2", "1", SemialgebraicSet::global(1), 2, true);
    let out = solve_program(&prog, &opts()).unwrap();
    assert_eq!(out.verdict, SosVerdict::Feasible);
    let c = out.objective.unwrap();
    assert!(c.abs() < 1e-6, "c* = {c}");
    let cert = out.certificate.unwrap();
    let s0 = cert.constraints[0].s0().unwrap();
    assert!((s0.coeff(&mono(&[2])) - 1.0).abs() < 1e-6);
    assert!(cert.decision_values[0].abs() < 1e-6);
}

#[test]
fn degree_overflow_is_rejected() {
    let prog = fixed("x1^4 + 1", SemialgebraicSet::global(1), 2);
    assert!(matches!(compile(&prog), Err(SosError::DegreeOverflow { .. })));
}

#[test]
fn interval_constraint_scan_matches_the_analytic_threshold() {
    // c - x^2 >= 0 on [-1, 1] exactly when c >= 1, and the degree-2 Putinar
    // form (c - 1) + 1 * (1 - x^2) witnesses it.
    let dom = SemialgebraicSet::new(1, vec![p("1 - x1^2", 1)]).unwrap();
    for i in 0..=40 {
        let c = 0.05 * i as f64;
        if (c - 1.0).abs() < 1e-9 {
            continue;
        }
        let src = format!("{c} - x1^2");
        let out = solve_program(&fixed(&src, dom.clone(), 2), &opts()).unwrap();
        let feasible = out.verdict == SosVerdict::Feasible;
        assert_eq!(feasible, c > 1.0, "c = {c}: {:?}", out.verdict);
    }
}

#[test]
fn quartic_minus_square_is_never_certified_on_the_interval() {
    // -x^2 + c x^4 is negative near 0 for every c, so no c in [0, 2] works.
    let dom = SemialgebraicSet::new(1, vec![p("1 - x1^2", 1)]).unwrap();
    for i in 0..=8 {
        let c = 0.25 * i as f64;
        let src = format!("-x1^2 + {c}*x1^4");
        assert!(p(&src, 1).eval(&[0.1]) < 0.0);
        let out = solve_program(&fixed(&src, dom.clone(), 4), &opts()).unwrap();
        assert_ne!(out.verdict, SosVerdict::Feasible, "c = {c}");
    }
}

#[test]
fn motzkin_polynomial_is_not_sos() {
    let motzkin = "x1^4*x2^2 + x1^2*x2^4 - 3*x1^2*x2^2 + 1";
    // Nonnegative on a grid, yet not a sum of squares.
    for i in -20..=20 {
        for j in -20..=20 {
            let x = [0.1 * i as f64, 0.1 * j as f64];
            assert!(p(motzkin, 2).eval(&x) >= -1e-12);
        }
    }
    let out = solve_program(&fixed(motzkin, SemialgebraicSet::global(2), 6), &opts()).unwrap();
    assert_eq!(out.verdict, SosVerdict::Infeasible, "tau = {:?}", out.tau);
    assert!(out.tau.unwrap() >= 1e-5);
    // Multiplying by (x1^2 + x2^2 + 1) makes it SOS.
    let lifted = &p(motzkin, 2) * &p("x1^2 + x2^2 + 1", 2);
    let out = solve_program(
        &fixed(&lifted.to_string(), SemialgebraicSet::global(2), 8),
        &opts(),
    )
    .unwrap();
    assert_eq!(out.verdict, SosVerdict::Feasible);
}

#[test]
fn indefinite_gram_is_rejected_by_extract() {
    let prog = fixed("x1^2 + 1", SemialgebraicSet::global(1), 2);
    let compiled = compile(&prog).unwrap();
    assert_eq!(compiled.blocks[0].basis.len(), 2);
    let x = vec![DMatrix::from_row_slice(2, 2, &[-1e-3, 0.0, 0.0, 1.0])];
    assert!(matches!(
        extract(&prog, &compiled, &x, &[]),
        Err(SosError::Indefinite { .. }) | Err(SosError::ResidualTooLarge { .. })
    ));
    let good = vec![DMatrix::identity(2, 2)];
    let cert = extract(&prog, &compiled, &good, &[]).unwrap();
    assert_eq!(cert.constraints[0].identity_residual, 0.0);
    let off = vec![DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.01])];
    assert!(matches!(
        extract(&prog, &compiled, &off, &[]),
        Err(SosError::ResidualTooLarge { .. })
    ));
}

#[test]
fn relaxation_stays_feasible_at_higher_degree() {
    let dom = SemialgebraicSet::ball(2, 1.0);
    for src in ["1.2 - x1^2", "1 + x1*x2", "2 - x1^2 - x2^4"] {
        for degree in [4, 6] {
            let out = solve_program(&fixed(src, dom.clone(), degree), &opts()).unwrap();
            assert_eq!(out.verdict, SosVerdict::Feasible, "{src} at degree {degree}");
        }
    }
}

#[test]
fn lorenz_certificate_contracts() {
    let field = PolyVectorField::new(vec![
        p("8*(x2-x1)", 3),
        p("x1*(0.5-x3)-x2", 3),
        p("x1*x2-4*x3", 3),
    ])
    .unwrap();
    let spec = AnalysisSpec::new(
        FieldSpec::Polynomial(field),
        SemialgebraicSet::global(3),
        AnalysisKind::Exponential { d: 1 },
    );
    let (out, cert) = solve_at(&spec, 0.45, true).unwrap();
    let cert = cert.expect("feasible below the certified rate");
    let sos = &cert.sos;
    for c in &sos.constraints {
        assert!(c.identity_residual <= 1e-6 * c.scale, "{}", c.label);
        assert!(c.min_gram_eig >= -1e-8);
    }
    // Re-substituting the decision values reproduces each expression.
    let prog = ratecert::programs::build_exponential(&spec, 0.45).unwrap().program;
    for (pc, cc) in prog.constraints.iter().zip(&sos.constraints) {
        let again = pc.expr.eval(&sos.decision_values);
        let diff = (&again - &cc.expression).max_abs_coeff();
        assert!(diff <= 1e-9 * cc.expression.max_abs_coeff().max(1.0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let s = sos.sample_identity(&mut rng, 500, 2.0);
    assert!(s.max_residual <= 1e-5, "{s:?}");
    assert!(s.min_sos >= -1e-6, "{s:?}");
    assert!(out.kkt.is_some());
    let json: serde_json::Value = serde_json::from_str(&sos.to_json()).unwrap();
    assert_eq!(json["constraints"].as_array().unwrap().len(), 3);
}
