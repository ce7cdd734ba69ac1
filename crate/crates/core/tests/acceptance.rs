//! Acceptance report. Prints one PASS/FAIL line per criterion and never
//! panics on FAIL; run with `--nocapture` to see the lines.

use std::time::Instant;

use ratecert::beta::{AlphaMeasure, BetaFamily};
use ratecert::poly::*;
use ratecert::programs::*;
use ratecert::region::{analyze_region, check_nesting};
use ratecert::sim::*;
use ratecert::sos::{solve_program, AffinePoly, SosProgram, SosVerdict};
use ratecert_sdp::SolverOptions;

#[derive(Default)]
struct Report {
    pass: usize,
    fail: usize,
}

impl Report {
    fn line(&mut self, id: &str, ok: bool, what: String) {
        if ok {
            self.pass += 1;
        } else {
            self.fail += 1;
        }
        println!("[{}] {id}: {what}", if ok { "PASS" } else { "FAIL" });
    }

    /// `|got - want| <= tol * |want|`.
    fn rel(&mut self, id: &str, label: &str, got: Option<f64>, want: f64, tol: f64) {
        match got {
            Some(g) => {
                let ok = (g - want).abs() <= tol * want.abs();
                self.line(id, ok, format!("{label} = {g:.6} (target {want} +- {}%)", tol * 100.0));
            }
            None => self.line(id, false, format!("{label}: no value (target {want})")),
        }
    }

    fn abs(&mut self, id: &str, label: &str, got: Option<f64>, want: f64, tol: f64) {
        match got {
            Some(g) => {
                let ok = (g - want).abs() <= tol;
                self.line(id, ok, format!("{label} = {g:.6} (target {want} +- {tol})"));
            }
            None => self.line(id, false, format!("{label}: no value (target {want})")),
        }
    }

    fn err(&mut self, id: &str, label: &str, e: impl std::fmt::Display) {
        self.line(id, false, format!("{label}: {e}"));
    }
}

fn info(id: &str, what: String) {
    println!("[INFO] {id}: {what}");
}

fn poly_field(src: &[&str]) -> PolyVectorField {
    let n = src.len();
    PolyVectorField::new(src.iter().map(|s| parse_polynomial(s, n).unwrap()).collect()).unwrap()
}

const LORENZ: [&str; 3] = ["8*(x2-x1)", "x1*(0.5-x3)-x2", "x1*x2-4*x3"];
const RATIONAL_3D: [&str; 3] = ["-x1^3 - x2^3", "x1^3 - x2^3 - 3*x3", "2*x2 - x3^3"];
const VDP: [&str; 2] = ["-x2", "-(1-x1^2)*x2 + x1"];

fn global(src: &[&str], kind: AnalysisKind) -> AnalysisSpec {
    AnalysisSpec::new(
        FieldSpec::Polynomial(poly_field(src)),
        SemialgebraicSet::global(src.len()),
        kind,
    )
}

fn ft_vdp_exprs() -> Vec<SignedPowerExpr> {
    vec![
        parse_expr("-sign(x2)*abs(x2)^(1/3)", 2).unwrap(),
        parse_expr(
            "2*(abs(x1)^(2/3)-1)*sign(x2)*abs(x2)^(1/3)+sign(x1)*abs(x1)^(1/3)",
            2,
        )
        .unwrap(),
    ]
}

fn lorenz_sos(r: &mut Report) {
    let s1 = global(&LORENZ, AnalysisKind::Exponential { d: 1 });
    match bisect_rate(&s1) {
        Ok(b) => {
            r.rel("1", "Lorenz d=1 k*", Some(b.k_star), 0.4688, 0.005);
            let m = minimize_gain(&s1, b.k_star).map(|(m, _)| m).ok();
            r.rel("1", "Lorenz d=1 M", m, 3.952, 0.02);
            let s2 = global(&LORENZ, AnalysisKind::Exponential { d: 2 });
            match minimize_gain(&s2, b.k_star) {
                Ok((m, _)) => r.rel("1", "Lorenz d=2 M", Some(m), 1.732, 0.02),
                Err(e) => r.err("1", "Lorenz d=2 M", e),
            }
        }
        Err(e) => r.err("1", "Lorenz d=1 bisection", e),
    }
}

fn lorenz_slope(r: &mut Report) {
    let f = FastPolyField::new(&poly_field(&LORENZ));
    match integrate(&f, &[0.0, 1.0, 0.0], 10.0, &IntegrateOptions::default()) {
        Ok(tr) => {
            let nrm = |x: Vec<f64>| x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let slope = (nrm(tr.state_at(8.0)).ln() - nrm(tr.state_at(10.0)).ln()) / 2.0;
            r.abs("2", "Lorenz log-slope on [8, 10]", Some(slope), 0.4689, 1e-3);
        }
        Err(e) => r.err("2", "Lorenz integration", e),
    }
}

fn rational_table(r: &mut Report) {
    let k_ii_want = [0.563, 0.616, 0.622];
    let k_i_want = [0.418, 0.306, 0.261];
    let mut k_i = Vec::new();
    let mut k_ii = Vec::new();
    for d in 1..=3u32 {
        let (rr, p) = (2 * d, 2);
        let ii = global(&RATIONAL_3D, AnalysisKind::RationalII { d, r: rr, p });
        let got = match bisect_rate(&ii) {
            Ok(b) => {
                let m = minimize_gain(&ii, b.k_star).map(|(m, _)| m).ok();
                info("3", format!("rational d={d} free-gain M at k_ii = {m:?}"));
                Some(b.k_star)
            }
            Err(e) => {
                r.err("3", &format!("rational d={d} k_ii"), e);
                None
            }
        };
        if got.is_some() {
            r.rel("3", &format!("rational d={d} k_ii"), got, k_ii_want[d as usize - 1], 0.01);
        }
        k_ii.push(got);

        let i = global(&RATIONAL_3D, AnalysisKind::RationalI { d, r: rr, p }).with_gain(GainMode::Fixed(1.5));
        let got = match bisect_rate(&i) {
            Ok(b) => {
                r.rel("3", &format!("rational d={d} fixed-gain M"), Some(b.certificate.gain), 1.5, 0.02);
                Some(b.k_star)
            }
            Err(e) => {
                r.err("3", &format!("rational d={d} k_i"), e);
                None
            }
        };
        if got.is_some() {
            r.rel("3", &format!("rational d={d} k_i"), got, k_i_want[d as usize - 1], 0.01);
        }
        k_i.push(got);
    }
    let ratio = match (k_i[0], k_ii[2]) {
        (Some(a), Some(b)) => Some(a / b),
        _ => None,
    };
    r.rel("3", "conservatism k_i(d=1)/k_ii(d=3)", ratio, 1.0 / 1.5, 0.10);
}

fn rational_sim(r: &mut Report) {
    let f = FastPolyField::new(&poly_field(&RATIONAL_3D));
    let fam = BetaFamily::Rational { p: 2.0 };
    let ics = sphere_ics(3, 500, 1e4, 0);
    let (_, est) = rate_from_ics(
        &f,
        &ics,
        1000.0,
        &IntegrateOptions::relative(),
        &fam,
        &fam.alpha(),
        1.5,
        (0.0, 1.0),
        "sphere R=1e4",
        1,
    );
    match est {
        Ok(e) => r.rel("4", "rational k_sim (500 ICs, M=1.5)", Some(e.k_sim), 1.048, 0.03),
        Err(e) => r.err("4", "rational k_sim", e),
    }
}

fn scalar_finite_time(r: &mut Report) {
    for den in [2i64, 3, 4, 5] {
        let id = format!("eta=1/{den}");
        let src = format!("-{den}*sign(x1)*abs(x1)^({}/{den})", den - 1);
        let f = parse_expr(&src, 1).unwrap();
        let s = AnalysisSpec::new(
            FieldSpec::SignedPower(vec![f.clone()]),
            SemialgebraicSet::global(1),
            AnalysisKind::FiniteTime {
                d: den as u32,
                eta: Rational::new(1, den),
                r_subst: den as u32,
                h_exponents: vec![1],
            },
        )
        .with_bisection(BisectionOptions { k_hi: Some(4.0), ..BisectionOptions::default() });
        match bisect_rate(&s).and_then(|b| minimize_gain(&s, b.k_star).map(|(m, c)| (b.k_star, m, c))) {
            Ok((k, m, cert)) => {
                r.abs("5", &format!("{id} k"), Some(k), 1.0, 1e-3);
                r.abs("5", &format!("{id} M"), Some(m), 1.0, 1e-3);
                let top = Monomial::new(vec![2 * den as u32]);
                let lead = cert.v.coeff(&top);
                let rest = (&cert.v - &Polynomial::monomial(top, lead)).max_abs_coeff();
                r.line(
                    "5",
                    lead > 0.0 && rest <= 1e-6 * lead,
                    format!("{id} V~ proportional to z^{}: lead {lead:.4e}, rest {rest:.2e}", 2 * den),
                );
            }
            Err(e) => r.err("5", &id, e),
        }

        let field = SignedPowerField::new(vec![f]);
        let alpha = AlphaMeasure::QuasiNormPow { p: 2.0 / den as f64, eta: 1.0 / den as f64 };
        let mut worst = 0.0f64;
        let mut failed = None;
        for x0 in [1.0, -0.3, 2.5, 1e-3] {
            let t = integrate(&field, &[x0], 10.0, &IntegrateOptions::finite_time(f64::abs(x0)))
                .and_then(|tr| settling_time(&tr, &alpha, None));
            match t {
                Ok(t) => worst = worst.max((t - f64::abs(x0).powf(1.0 / den as f64)).abs()),
                Err(e) => failed = Some(e),
            }
        }
        match failed {
            Some(e) => r.err("5", &format!("{id} settling time"), e),
            None => r.abs("5", &format!("{id} max |T(x) - |x|^eta|"), Some(worst), 0.0, 1e-3),
        }
    }
}

/// Minimum of alpha(x0)/T(x0) over the given initial conditions.
fn settling_rate(f: &SignedPowerField, alpha: &AlphaMeasure, ics: &[Vec<f64>]) -> Result<f64, SimError> {
    let mut k = f64::INFINITY;
    for x0 in ics {
        let s = x0.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        let tr = integrate(f, x0, 100.0, &IntegrateOptions::finite_time(s))?;
        k = k.min(alpha.eval(x0) / settling_time(&tr, alpha, None)?);
    }
    Ok(k)
}

fn finite_time_vdp(r: &mut Report) {
    let f = SignedPowerField::new(ft_vdp_exprs());
    let quasi = AlphaMeasure::QuasiNormPow { p: 2.0 / 3.0, eta: 2.0 / 3.0 };
    let k_sim = settling_rate(&f, &quasi, &ball_ics(2, 200, 1.0, 0));
    match &k_sim {
        Ok(k) => r.rel("6", "FT vdP k_sim (200 ICs in the unit disk, 2/3-quasi-norm)", Some(*k), 0.3107, 0.03),
        Err(e) => r.err("6", "FT vdP k_sim", e),
    }
    let circle = settling_rate(&f, &AlphaMeasure::TwoNormPow(2.0 / 3.0), &sphere_ics(2, 360, 1.0, 0));
    info("6", format!("FT vdP unit-circle rate with ||x||_2^(2/3): {:?}", circle.ok()));

    for d in [6u32, 8] {
        let s = AnalysisSpec::new(
            FieldSpec::SignedPower(ft_vdp_exprs()),
            SemialgebraicSet::ball(2, 1.0),
            AnalysisKind::FiniteTime {
                d,
                eta: Rational::new(2, 3),
                r_subst: 3,
                h_exponents: vec![2, 2],
            },
        )
        .with_bisection(BisectionOptions { trouble_as_infeasible: true, ..BisectionOptions::default() });
        let start = Instant::now();
        match bisect_rate(&s) {
            Ok(b) => {
                let cert = minimize_gain(&s, b.k_star).map(|(_, c)| c).unwrap_or(b.certificate);
                info(
                    "6",
                    format!("FT vdP d={d}: k = {:.5}, M = {:.4} ({:.0}s)", b.k_star, cert.gain, start.elapsed().as_secs_f64()),
                );
                match &k_sim {
                    Ok(ks) => r.line(
                        "6",
                        b.k_star > 0.0 && b.k_star <= *ks,
                        format!("FT vdP d={d}: 0 < k = {:.5} <= k_sim = {ks:.5}", b.k_star),
                    ),
                    Err(_) => r.line("6", false, format!("FT vdP d={d}: k = {:.5}, no k_sim", b.k_star)),
                }
                let sc = cert.sample_check(1000, 7);
                r.line(
                    "6",
                    sc.passed,
                    format!("FT vdP d={d}: 1000-point soundness, worst margin {:.3e}", sc.worst_margin),
                );
            }
            Err(e) => r.err("6", &format!("FT vdP d={d}"), e),
        }
    }
}

fn vdp_ball(d: u32, radius: f64) -> AnalysisSpec {
    AnalysisSpec::new(
        FieldSpec::Polynomial(poly_field(&VDP)),
        SemialgebraicSet::ball(2, radius),
        AnalysisKind::Exponential { d },
    )
}

fn vdp_sweep(r: &mut Report) {
    let radii = [0.05, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.7];
    let mut ks = Vec::new();
    for &rad in &radii {
        match bisect_rate(&vdp_ball(4, rad)) {
            Ok(b) => ks.push(b.k_star),
            Err(e) => {
                r.err("7", &format!("vdP sweep R={rad}"), e);
                return;
            }
        }
    }
    info("7", format!("vdP d=4 k_R over R = {radii:?}: {ks:?}"));
    r.rel("7", "vdP k_R at R=0.05", Some(ks[0]), 0.5, 0.05);
    let rises = ks.windows(2).filter(|w| w[1] > w[0] * 1.02).count();
    r.line(
        "7",
        rises == 0 && ks[ks.len() - 1] < ks[0],
        format!("vdP k_R decreasing toward R=1.7 within 2%: last {:.4}, {rises} rises", ks[ks.len() - 1]),
    );

    let rates = [0.0, 0.025, 0.1, 0.2, 0.35, 0.48];
    let mut regions = Vec::new();
    for &k in &rates {
        let base = vdp_ball(4, 1.0);
        let solved = max_ball_radius(&base, k, 2.0, 1e-3).and_then(|(rad, _)| minimize_gain(&vdp_ball(4, rad), k));
        match solved {
            Ok((_, cert)) => match analyze_region(&cert.v, &cert.domain, Some(&cert.program_field), 90) {
                Ok(reg) => regions.push((k, cert.v.clone(), reg.c_star)),
                Err(e) => return r.err("7", &format!("vdP region k={k}"), e),
            },
            Err(e) => return r.err("7", &format!("vdP region k={k}"), e),
        }
    }
    let mut bad = Vec::new();
    for w in regions.windows(2) {
        let (k_out, v_out, c_out) = &w[0];
        let (k_in, v_in, c_in) = &w[1];
        if !check_nesting((v_in, *c_in), (v_out, *c_out), 500, 0).nested() {
            bad.push((*k_in, *k_out));
        }
    }
    r.line("7", bad.is_empty(), format!("vdP regions nested for k in {rates:?}; violations {bad:?}"));
}

fn property_summary(r: &mut Report) {
    let fams = [
        BetaFamily::Exponential,
        BetaFamily::Rational { p: 2.0 },
        BetaFamily::FiniteTime { p_norm: 2.0 / 3.0, eta: 2.0 / 3.0 },
    ];
    let mut worst = 0.0f64;
    for fam in &fams {
        for i in 1..=20 {
            let y = 0.25 * i as f64;
            worst = worst.max((fam.beta(y, 0.0) - y).abs());
            for (t, s) in [(0.1, 0.3), (0.5, 0.7), (1.0, 2.0)] {
                worst = worst.max((fam.beta(fam.beta(y, t), s) - fam.beta(y, t + s)).abs());
                worst = worst.max((fam.beta_neg(fam.beta(y, t), t) - y).abs() * f64::from(fam.beta(y, t) > 0.0));
            }
        }
    }
    r.abs("8", "beta normalization/semigroup/negative-extension residual", Some(worst), 0.0, 1e-9);

    let motzkin = "x1^4*x2^2 + x1^2*x2^4 - 3*x1^2*x2^2 + 1";
    let mut prog = SosProgram::new(2);
    let verdict = prog
        .add_constraint(
            "motzkin",
            AffinePoly::from_poly(parse_polynomial(motzkin, 2).unwrap()),
            SemialgebraicSet::global(2),
            6,
        )
        .map_err(|e| e.to_string())
        .and_then(|_| solve_program(&prog, &SolverOptions::default()).map_err(|e| e.to_string()));
    match verdict {
        Ok(o) => r.line("8", o.verdict == SosVerdict::Infeasible, format!("Motzkin non-SOS: {:?}", o.verdict)),
        Err(e) => r.err("8", "Motzkin", e),
    }

    let f = poly_field(&["-x1"]);
    let fam = BetaFamily::Exponential;
    let v = converse_lf_sample(&f, &fam, &fam.alpha(), 0.0, 1.0, &[0.5], 20.0, &ConverseGrid::default());
    r.abs("8", "converse V(0.5) for f=-x", Some(v), 0.5, 1e-4 * 0.5);

    let s = global(&LORENZ, AnalysisKind::Exponential { d: 1 });
    match minimize_gain(&s, 0.45) {
        Ok((_, cert)) => {
            let sc = cert.sample_check(1000, 3);
            let sim = cert.simulation_check(&s.field, 50, 5, 1);
            let ok = sc.passed && sim.as_ref().is_ok_and(|c| c.passed);
            r.line("8", ok, format!("Lorenz certificate: sampling {}, 50-trajectory bound {:?}", sc.passed, sim.map(|c| c.passed)));
        }
        Err(e) => r.err("8", "Lorenz certificate", e),
    }
    info("8", "the full property suite runs as the other integration tests of this crate".into());
}

#[test]
fn acceptance() {
    let mut r = Report::default();
    let steps: [(&str, fn(&mut Report)); 8] = [
        ("Lorenz SOS rate and gain", lorenz_sos),
        ("Lorenz log-slope", lorenz_slope),
        ("rational rates", rational_table),
        ("rational simulation", rational_sim),
        ("scalar finite-time family", scalar_finite_time),
        ("finite-time van der Pol", finite_time_vdp),
        ("van der Pol sweep and nesting", vdp_sweep),
        ("property checks", property_summary),
    ];
    let total = Instant::now();
    for (name, step) in steps {
        let t = Instant::now();
        println!("-- {name}");
        step(&mut r);
        println!("   ({:.1}s)", t.elapsed().as_secs_f64());
    }
    println!(
        "acceptance: {} PASS, {} FAIL in {:.0}s",
        r.pass,
        r.fail,
        total.elapsed().as_secs_f64()
    );
}
