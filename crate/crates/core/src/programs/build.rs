use super::{AnalysisKind, AnalysisSpec, GainMode, ProgramError};
use crate::poly::{
    ratio_f64, substitute_signed_power, Monomial, PolyError, Polynomial, Rational,
    SemialgebraicSet, SignedPowerExpr,
};
use crate::sos::{AffinePoly, DecisionVar, PolyTemplate, SosProgram};

/// The sandwich constant: a decision variable or a fixed value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GammaRef {
    Var(DecisionVar),
    Fixed(f64),
}

impl GammaRef {
    pub fn value(&self, decision_values: &[f64]) -> f64 {
        match *self {
            GammaRef::Var(v) => decision_values[v.0],
            GammaRef::Fixed(g) => g,
        }
    }

    /// `gamma * p` as an affine expression.
    fn times(&self, p: Polynomial) -> AffinePoly {
        match *self {
            GammaRef::Var(v) => AffinePoly::term(v, p),
            GammaRef::Fixed(g) => AffinePoly::from_poly(p.scale(g)),
        }
    }
}

/// Polynomial data of the finite-time program in `z` coordinates.
#[derive(Clone, Debug)]
pub struct FtPieces {
    /// `h(z) f~(z)`.
    pub hf: Vec<Polynomial>,
    /// `h(z) (z^T z)^q` with `q = (2 - eta) r / 2`.
    pub h_norm: Polynomial,
    /// The domain mapped through `x = sign(z)|z|^r`.
    pub domain: SemialgebraicSet,
    pub q: Rational,
}

impl FtPieces {
    pub fn new(spec: &AnalysisSpec) -> Result<FtPieces, ProgramError> {
        let AnalysisKind::FiniteTime {
            eta,
            r_subst,
            h_exponents,
            ..
        } = &spec.kind
        else {
            return Err(ProgramError::InvalidSpec("not a finite-time analysis".into()));
        };
        let n = spec.nvars();
        let r = Rational::from_integer(*r_subst as i64);
        let mut h = SignedPowerExpr::constant(n, 1.0);
        for (i, &l) in h_exponents.iter().enumerate() {
            h = h.mul(&SignedPowerExpr::factor(n, i, 0, Rational::from_integer(l as i64)));
        }
        let ft = substitute_signed_power(&spec.field.signed_power(), r)?;
        let hf = ft
            .iter()
            .map(|e| e.to_polynomial(&h))
            .collect::<Result<Vec<_>, _>>()?;
        let two = Rational::from_integer(2);
        let q = (two - *eta) * r / two;
        let norm = if q.is_integer() {
            SignedPowerExpr::from_polynomial(&Polynomial::norm_sq_pow(n, *q.numer() as u32))
        } else if n == 1 {
            SignedPowerExpr::factor(1, 0, 0, q * two)
        } else {
            return Err(PolyError::UnsupportedExponent(format!(
                "(z^T z)^({q}) is not polynomial for {n} variables"
            ))
            .into());
        };
        let h_norm = norm.to_polynomial(&h)?;
        let one = SignedPowerExpr::constant(n, 1.0);
        let mut gs = Vec::new();
        for g in spec.domain.constraints() {
            let gt = SignedPowerExpr::from_polynomial(g)
                .compose_signed_power(r)
                .to_polynomial(&one)
                .map_err(|e| ProgramError::DomainNotTransformable(e.to_string()))?;
            gs.push(gt);
        }
        Ok(FtPieces {
            hf,
            h_norm,
            domain: SemialgebraicSet::new(n, gs)?,
            q,
        })
    }
}

/// A compiled-ready program plus the handles needed to read a certificate.
#[derive(Clone, Debug)]
pub struct BuiltProgram {
    pub program: SosProgram,
    /// `V`, or `W = gamma V~` for the finite-time program.
    pub v: PolyTemplate,
    pub gamma: GammaRef,
    /// Domain in the program's variables.
    pub domain: SemialgebraicSet,
    /// Field entering the decrease condition (`f`, or `h f~`).
    pub field: Vec<Polynomial>,
    pub derivative_degree: u32,
    pub derivation: String,
}

/// Degrees `lo..=2d` locally, `2d` globally. Near the origin the sandwich
/// forces every coefficient below its degree `lo` to vanish, so those
/// monomials are left out.
fn template_basis(n: usize, lo: u32, d: u32, domain: &SemialgebraicSet) -> Vec<Monomial> {
    if domain.is_global() {
        Monomial::homogeneous(n, 2 * d)
    } else {
        Monomial::all_up_to(n, lo.clamp(2, 2 * d), 2 * d)
    }
}

fn gamma_ref(prog: &mut SosProgram, spec: &AnalysisSpec, minimize: bool) -> GammaRef {
    match spec.gain {
        GainMode::Fixed(m) => GammaRef::Fixed(spec.kind.gamma_from_gain(m)),
        GainMode::Minimize => {
            let g = prog.new_var("gamma");
            if minimize {
                prog.minimize(g, 1.0).expect("gamma was just created");
            }
            GammaRef::Var(g)
        }
    }
}

/// Adds `V - s` and `gamma s - V` over `domain`.
fn add_sandwich(
    prog: &mut SosProgram,
    v: &AffinePoly,
    gamma: GammaRef,
    s: &Polynomial,
    domain: &SemialgebraicSet,
    degree: u32,
) -> Result<(), ProgramError> {
    prog.add_constraint(
        "lower",
        v.sub(&AffinePoly::from_poly(s.clone())),
        domain.clone(),
        degree,
    )?;
    prog.add_constraint("upper", gamma.times(s.clone()).sub(v), domain.clone(), degree)?;
    Ok(())
}

/// Builds the program of `spec` at rate `k`. With `minimize` set and a free
/// gain, the objective is `min gamma`; otherwise it is a feasibility problem.
pub fn build_program(
    spec: &AnalysisSpec,
    k: f64,
    minimize: bool,
) -> Result<BuiltProgram, ProgramError> {
    spec.validate()?;
    let n = spec.nvars();
    let d = spec.kind.d();
    let mut prog = SosProgram::new(n);
    match &spec.kind {
        AnalysisKind::Exponential { .. }
        | AnalysisKind::RationalII { .. }
        | AnalysisKind::RationalI { .. } => {
            let f = spec.field.as_polynomial()?;
            let df = f.degree();
            let domain = spec.domain.clone();
            let lo = match spec.kind {
                AnalysisKind::RationalII { r, .. } | AnalysisKind::RationalI { r, .. } => r,
                _ => 2 * d,
            };
            let tmpl = prog.new_template("V", template_basis(n, lo, d, &domain));
            let v = tmpl.affine();
            let gamma = gamma_ref(&mut prog, spec, minimize);
            let lie = v.lie_derivative(f.components())?;
            let (sand, deriv, dprime, derivation) = match spec.kind {
                AnalysisKind::Exponential { .. } => {
                    let s = Polynomial::norm_sq_pow(n, d);
                    let dp = (2 * d).max(2 * d - 1 + df);
                    let e = v.scale(-2.0 * d as f64 * k).sub(&lie);
                    (s, e, dp, format!("exponential program: d = {d}, k = {k}"))
                }
                AnalysisKind::RationalII { r, p, .. } => {
                    let s = Polynomial::norm_pow(n, r)?;
                    let dp = (2 * d + p).max(2 * d - 1 + df);
                    let e = v
                        .mul_poly(&Polynomial::norm_pow(n, p)?)
                        .scale(-k * r as f64 / p as f64)
                        .sub(&lie);
                    (s, e, dp, format!("rational program (ii): d = {d}, r = {r}, p = {p}, k = {k}"))
                }
                AnalysisKind::RationalI { r, p, .. } => {
                    let s = Polynomial::norm_pow(n, r)?;
                    let dp = (2 * d + p).max(2 * d - 1 + df);
                    let g = gamma.value(&[]);
                    let c = Polynomial::norm_pow(n, r + p)?.scale(-(r as f64 / p as f64) * g * k);
                    let e = AffinePoly::from_poly(c).sub(&lie);
                    (s, e, dp, format!("rational program (i): d = {d}, r = {r}, p = {p}, k = {k}"))
                }
                AnalysisKind::FiniteTime { .. } => unreachable!(),
            };
            let sdeg = (2 * d).max(sand.degree());
            add_sandwich(&mut prog, &v, gamma, &sand, &domain, sdeg)?;
            let dprime = dprime.max(deriv.degree());
            prog.add_constraint("decrease", deriv, domain.clone(), dprime)?;
            Ok(BuiltProgram {
                program: prog,
                v: tmpl,
                gamma,
                domain,
                field: f.components().to_vec(),
                derivative_degree: dprime,
                derivation,
            })
        }
        AnalysisKind::FiniteTime { eta, r_subst, .. } => {
            let pieces = FtPieces::new(spec)?;
            let r = *r_subst;
            let domain = pieces.domain.clone();
            let tmpl = prog.new_template("W", template_basis(n, 2 * r, d, &domain));
            let w = tmpl.affine();
            let gamma = gamma_ref(&mut prog, spec, minimize);
            let s = Polynomial::norm_sq_pow(n, r);
            let sdeg = (2 * d).max(s.degree());
            add_sandwich(&mut prog, &w, gamma, &s, &domain, sdeg)?;
            let df = pieces.hf.iter().map(Polynomial::degree).max().unwrap_or(0);
            let dh = pieces.h_norm.degree();
            let lie = w.lie_derivative(&pieces.hf)?;
            let deriv = gamma
                .times(pieces.h_norm.scale(-2.0 * k / ratio_f64(*eta)))
                .sub(&lie);
            let dprime = dh.max(2 * d - 1 + df).max(deriv.degree());
            prog.add_constraint("decrease", deriv, domain.clone(), dprime)?;
            Ok(BuiltProgram {
                program: prog,
                v: tmpl,
                gamma,
                domain,
                field: pieces.hf,
                derivative_degree: dprime,
                derivation: format!(
                    "finite-time program in z = sign(x)|x|^(1/{r}): d = {d}, eta = {eta}, q = {}, k = {k}",
                    pieces.q
                ),
            })
        }
    }
}

fn expect_kind(spec: &AnalysisSpec, name: &str) -> Result<(), ProgramError> {
    if spec.kind.name() == name {
        Ok(())
    } else {
        Err(ProgramError::InvalidSpec(format!(
            "expected a {name} analysis, found {}",
            spec.kind.name()
        )))
    }
}

pub fn build_exponential(spec: &AnalysisSpec, k: f64) -> Result<BuiltProgram, ProgramError> {
    expect_kind(spec, "exponential")?;
    build_program(spec, k, true)
}

pub fn build_rational_ii(spec: &AnalysisSpec, k: f64) -> Result<BuiltProgram, ProgramError> {
    expect_kind(spec, "rational_ii")?;
    build_program(spec, k, true)
}

/// Fixed-gain rational program with `gamma = M^{r/p}`.
pub fn build_rational_i(spec: &AnalysisSpec, k: f64, m: f64) -> Result<BuiltProgram, ProgramError> {
    expect_kind(spec, "rational_i")?;
    let spec = spec.clone().with_gain(GainMode::Fixed(m));
    build_program(&spec, k, false)
}

pub fn build_finite_time(spec: &AnalysisSpec, k: f64) -> Result<BuiltProgram, ProgramError> {
    expect_kind(spec, "finite_time")?;
    build_program(spec, k, true)
}
