//! Lyapunov rate/gain programs for the three comparison families, bisection
//! on the rate, gain minimization and the resulting certificates.

mod bisect;
mod build;
mod certificate;
mod conditions;

pub use bisect::{bisect_rate, max_ball_radius, minimize_gain, solve_at, BisectStep, BisectionOutcome};
pub use build::{
    build_exponential, build_finite_time, build_program, build_rational_i, build_rational_ii,
    BuiltProgram, FtPieces, GammaRef,
};
pub use certificate::{
    Diagnostics, SampleCheck, SimulationCheck, StabilityCertificate, SAMPLE_SLACK,
};
pub use conditions::{map_conditions, RationalConditions};

use ratecert_sdp::SolverOptions;
use serde::{Deserialize, Serialize};

use crate::beta::BetaFamily;
use crate::poly::{
    ratio_f64, PolyError, PolyVectorField, Rational, SemialgebraicSet, SignedPowerExpr,
};
use crate::sim::{FastPolyField, SignedPowerField, VectorField};
use crate::sos::SosError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProgramError {
    #[error("infeasible at the lower rate bound k = {k_lo}")]
    InfeasibleAtKLo { k_lo: f64 },
    #[error("numerical trouble at k = {k} with bracket [{lo}, {hi}]")]
    NumericalTrouble { k: f64, lo: f64, hi: f64 },
    #[error("infeasible at k = {k}")]
    InfeasibleAt { k: f64 },
    #[error("invalid analysis: {0}")]
    InvalidSpec(String),
    #[error("domain is not transformable: {0}")]
    DomainNotTransformable(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Sos(#[from] SosError),
}

/// Right-hand side of the analyzed system.
#[derive(Clone, Debug)]
pub enum FieldSpec {
    Polynomial(PolyVectorField),
    SignedPower(Vec<SignedPowerExpr>),
}

impl FieldSpec {
    pub fn dim(&self) -> usize {
        match self {
            FieldSpec::Polynomial(f) => f.dim(),
            FieldSpec::SignedPower(f) => f.len(),
        }
    }

    pub fn as_polynomial(&self) -> Result<PolyVectorField, ProgramError> {
        match self {
            FieldSpec::Polynomial(f) => Ok(f.clone()),
            FieldSpec::SignedPower(f) => {
                let one = SignedPowerExpr::constant(f.len(), 1.0);
                let comps = f
                    .iter()
                    .map(|e| e.to_polynomial(&one))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(PolyVectorField::new(comps)?)
            }
        }
    }

    pub fn signed_power(&self) -> Vec<SignedPowerExpr> {
        match self {
            FieldSpec::Polynomial(f) => f
                .components()
                .iter()
                .map(SignedPowerExpr::from_polynomial)
                .collect(),
            FieldSpec::SignedPower(f) => f.clone(),
        }
    }

    /// Evaluator for simulation.
    pub fn sim_field(&self) -> Box<dyn VectorField> {
        match self {
            FieldSpec::Polynomial(f) => Box::new(FastPolyField::new(f)),
            FieldSpec::SignedPower(f) => Box::new(SignedPowerField::new(f.clone())),
        }
    }
}

/// Which program is solved and its degree parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalysisKind {
    /// `V` of degree `2d`, sandwiched by `(x^T x)^d`.
    Exponential { d: u32 },
    /// Free gain `gamma`, decrease `-(k r/p) V (x^T x)^{p/2}`.
    RationalII { d: u32, r: u32, p: u32 },
    /// Fixed gain, decrease `-(r/p) M^{r/p} k (x^T x)^{(r+p)/2}`.
    RationalI { d: u32, r: u32, p: u32 },
    /// Program in `z = sign(x)|x|^{1/r}` with multiplier
    /// `h(z) = prod |z_i|^{h_exponents_i}`.
    FiniteTime {
        d: u32,
        eta: Rational,
        r_subst: u32,
        h_exponents: Vec<u32>,
    },
}

impl AnalysisKind {
    pub fn d(&self) -> u32 {
        match self {
            AnalysisKind::Exponential { d }
            | AnalysisKind::RationalII { d, .. }
            | AnalysisKind::RationalI { d, .. }
            | AnalysisKind::FiniteTime { d, .. } => *d,
        }
    }

    pub fn family(&self) -> BetaFamily {
        match self {
            AnalysisKind::Exponential { .. } => BetaFamily::Exponential,
            AnalysisKind::RationalII { p, .. } | AnalysisKind::RationalI { p, .. } => {
                BetaFamily::Rational { p: *p as f64 }
            }
            AnalysisKind::FiniteTime { eta, r_subst, .. } => BetaFamily::FiniteTime {
                p_norm: 2.0 / *r_subst as f64,
                eta: ratio_f64(*eta),
            },
        }
    }

    /// Gain reported for a sandwich constant `gamma`.
    pub fn gain_from_gamma(&self, gamma: f64) -> f64 {
        match self {
            AnalysisKind::Exponential { d } => gamma.powf(1.0 / (2.0 * *d as f64)),
            AnalysisKind::RationalII { r, p, .. } | AnalysisKind::RationalI { r, p, .. } => {
                gamma.powf(*p as f64 / *r as f64)
            }
            AnalysisKind::FiniteTime { eta, .. } => gamma.powf(ratio_f64(*eta) / 2.0),
        }
    }

    pub fn gamma_from_gain(&self, m: f64) -> f64 {
        match self {
            AnalysisKind::Exponential { d } => m.powi(2 * *d as i32),
            AnalysisKind::RationalII { r, p, .. } | AnalysisKind::RationalI { r, p, .. } => {
                m.powf(*r as f64 / *p as f64)
            }
            AnalysisKind::FiniteTime { eta, .. } => m.powf(2.0 / ratio_f64(*eta)),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AnalysisKind::Exponential { .. } => "exponential",
            AnalysisKind::RationalII { .. } => "rational_ii",
            AnalysisKind::RationalI { .. } => "rational_i",
            AnalysisKind::FiniteTime { .. } => "finite_time",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BisectionOptions {
    pub k_lo: f64,
    /// Found by doubling from `k_lo + 1` when `None`.
    pub k_hi: Option<f64>,
    pub rel_tol: f64,
    pub max_doublings: u32,
    /// Count a solve that hits numerical trouble as infeasible instead of
    /// stopping the search.
    #[serde(default)]
    pub trouble_as_infeasible: bool,
}

impl Default for BisectionOptions {
    fn default() -> Self {
        BisectionOptions {
            k_lo: 0.0,
            k_hi: None,
            rel_tol: 1e-3,
            max_doublings: 20,
            trouble_as_infeasible: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum GainMode {
    Minimize,
    Fixed(f64),
}

#[derive(Clone, Debug)]
pub struct AnalysisSpec {
    pub field: FieldSpec,
    /// Region in the original coordinates.
    pub domain: SemialgebraicSet,
    pub kind: AnalysisKind,
    pub bisection: BisectionOptions,
    pub gain: GainMode,
    pub solver: SolverOptions,
}

impl AnalysisSpec {
    pub fn new(field: FieldSpec, domain: SemialgebraicSet, kind: AnalysisKind) -> Self {
        let gain = match kind {
            AnalysisKind::RationalI { .. } => GainMode::Fixed(1.0),
            _ => GainMode::Minimize,
        };
        AnalysisSpec {
            field,
            domain,
            kind,
            bisection: BisectionOptions::default(),
            gain,
            solver: SolverOptions::default(),
        }
    }

    pub fn with_gain(mut self, gain: GainMode) -> Self {
        self.gain = gain;
        self
    }

    pub fn with_bisection(mut self, b: BisectionOptions) -> Self {
        self.bisection = b;
        self
    }

    pub fn nvars(&self) -> usize {
        self.field.dim()
    }

    pub fn validate(&self) -> Result<(), ProgramError> {
        let bad = |m: String| Err(ProgramError::InvalidSpec(m));
        let n = self.nvars();
        if n == 0 {
            return bad("empty vector field".into());
        }
        if self.domain.nvars() != n {
            return bad(format!("domain has {} variables, field has {n}", self.domain.nvars()));
        }
        let b = &self.bisection;
        if !(b.k_lo >= 0.0 && b.k_lo.is_finite()) {
            return bad(format!("k_lo = {} must be finite and nonnegative", b.k_lo));
        }
        if let Some(hi) = b.k_hi {
            if hi <= b.k_lo || !hi.is_finite() {
                return bad(format!("k_hi = {hi} must exceed k_lo = {}", b.k_lo));
            }
        }
        if !(b.rel_tol > 1e-6 && b.rel_tol < 0.1) {
            return bad(format!("rel_tol = {} outside (1e-6, 0.1)", b.rel_tol));
        }
        if let GainMode::Fixed(m) = self.gain {
            if !(m >= 1.0 && m.is_finite()) {
                return bad(format!("fixed gain {m} must be at least 1"));
            }
        }
        if self.kind.d() == 0 {
            return bad("degree parameter d must be at least 1".into());
        }
        match &self.kind {
            AnalysisKind::Exponential { .. } => {}
            AnalysisKind::RationalII { r, p, .. } | AnalysisKind::RationalI { r, p, .. } => {
                if *r == 0 || *p == 0 {
                    return bad("r and p must be positive".into());
                }
                if r % 2 != 0 || p % 2 != 0 {
                    return Err(PolyError::UnsupportedExponent(format!(
                        "r = {r} and p = {p} must be even"
                    ))
                    .into());
                }
                if matches!(self.kind, AnalysisKind::RationalI { .. })
                    && !matches!(self.gain, GainMode::Fixed(_))
                {
                    return bad("the fixed-gain rational program needs a fixed gain".into());
                }
            }
            AnalysisKind::FiniteTime {
                eta,
                r_subst,
                h_exponents,
                ..
            } => {
                let e = ratio_f64(*eta);
                if !(e > 0.0 && e < 1.0) {
                    return bad(format!("eta = {eta} must lie in (0, 1)"));
                }
                if *r_subst == 0 {
                    return bad("substitution power must be positive".into());
                }
                if h_exponents.len() != n {
                    return bad(format!(
                        "{} multiplier exponents for {n} variables",
                        h_exponents.len()
                    ));
                }
            }
        }
        Ok(())
    }
}
