use serde::Serialize;

use super::build::build_program;
use super::certificate::StabilityCertificate;
use super::{AnalysisSpec, GainMode, ProgramError};
use crate::poly::SemialgebraicSet;
use crate::sos::{solve_program, SosOutcome, SosVerdict};

/// One solve of the rate search.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BisectStep {
    pub k: f64,
    pub feasible: bool,
    pub verdict: String,
    pub tau: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct BisectionOutcome {
    pub k_star: f64,
    /// From the last feasible solve.
    pub certificate: StabilityCertificate,
    pub history: Vec<BisectStep>,
    /// Final bracket: feasible at `.0`, infeasible at `.1` (equal when the
    /// upper end was never refuted).
    pub bracket: (f64, f64),
}

impl BisectionOutcome {
    /// True when no recorded feasible rate lies above a recorded infeasible one.
    pub fn is_monotone(&self) -> bool {
        let max_feasible = self
            .history
            .iter()
            .filter(|s| s.feasible)
            .map(|s| s.k)
            .fold(f64::NEG_INFINITY, f64::max);
        let min_infeasible = self
            .history
            .iter()
            .filter(|s| !s.feasible)
            .map(|s| s.k)
            .fold(f64::INFINITY, f64::min);
        max_feasible < min_infeasible
    }
}

/// Solves the program of `spec` at rate `k`; with `minimize` the gain is
/// minimized (when free), otherwise feasibility is decided.
pub fn solve_at(
    spec: &AnalysisSpec,
    k: f64,
    minimize: bool,
) -> Result<(SosOutcome, Option<StabilityCertificate>), ProgramError> {
    let built = build_program(spec, k, minimize)?;
    let outcome = solve_program(&built.program, &spec.solver)?;
    let cert = if outcome.verdict == SosVerdict::Feasible {
        StabilityCertificate::from_outcome(spec, &built, k, &outcome)
    } else {
        None
    };
    Ok((outcome, cert))
}

/// Largest `k` in the bracket for which the program is feasible, to relative
/// tolerance `rel_tol`. Marginal solves count as infeasible, and so do
/// troubled ones when `trouble_as_infeasible` is set.
pub fn bisect_rate(spec: &AnalysisSpec) -> Result<BisectionOutcome, ProgramError> {
    spec.validate()?;
    let opts = spec.bisection;
    let mut history = Vec::new();
    let mut step = |k: f64| -> Result<Option<StabilityCertificate>, ProgramError> {
        let (outcome, cert) = solve_at(spec, k, false)?;
        history.push(BisectStep {
            k,
            feasible: cert.is_some(),
            verdict: format!("{:?}", outcome.verdict),
            tau: outcome.tau,
        });
        if outcome.verdict == SosVerdict::NumericalTrouble && !opts.trouble_as_infeasible {
            return Err(ProgramError::NumericalTrouble { k, lo: k, hi: k });
        }
        Ok(cert)
    };
    let mut lo = opts.k_lo;
    let mut cert = match step(lo) {
        Ok(Some(c)) => c,
        Ok(None) => return Err(ProgramError::InfeasibleAtKLo { k_lo: lo }),
        Err(e) => return Err(e),
    };
    let mut hi = match opts.k_hi {
        Some(h) => h,
        None => {
            let mut h = lo + 1.0;
            let mut refuted = false;
            for _ in 0..=opts.max_doublings {
                match step(h) {
                    Ok(Some(c)) => {
                        lo = h;
                        cert = c;
                        h *= 2.0;
                    }
                    Ok(None) => {
                        refuted = true;
                        break;
                    }
                    Err(ProgramError::NumericalTrouble { k, .. }) => {
                        return Err(ProgramError::NumericalTrouble { k, lo, hi: h })
                    }
                    Err(e) => return Err(e),
                }
            }
            if !refuted {
                return Ok(BisectionOutcome {
                    k_star: lo,
                    certificate: cert,
                    history,
                    bracket: (lo, lo),
                });
            }
            h
        }
    };
    if opts.k_hi.is_some() {
        match step(hi) {
            Ok(Some(c)) => {
                return Ok(BisectionOutcome {
                    k_star: hi,
                    certificate: c,
                    history,
                    bracket: (hi, hi),
                });
            }
            Ok(None) => {}
            Err(ProgramError::NumericalTrouble { k, .. }) => {
                return Err(ProgramError::NumericalTrouble { k, lo, hi })
            }
            Err(e) => return Err(e),
        }
    }
    while hi - lo > opts.rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        match step(mid) {
            Ok(Some(c)) => {
                lo = mid;
                cert = c;
            }
            Ok(None) => hi = mid,
            Err(ProgramError::NumericalTrouble { k, .. }) => {
                return Err(ProgramError::NumericalTrouble { k, lo, hi })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(BisectionOutcome {
        k_star: lo,
        certificate: cert,
        history,
        bracket: (lo, hi),
    })
}

/// Smallest gain certified at rate `k`. A fixed gain is only checked. When
/// the minimization runs into numerical trouble the gain of the feasibility
/// certificate is returned instead, which is valid but not minimal.
pub fn minimize_gain(
    spec: &AnalysisSpec,
    k: f64,
) -> Result<(f64, StabilityCertificate), ProgramError> {
    let minimize = spec.gain == GainMode::Minimize;
    let (mut outcome, mut cert) = solve_at(spec, k, minimize)?;
    if minimize && cert.is_none() && outcome.verdict == SosVerdict::NumericalTrouble {
        (outcome, cert) = solve_at(spec, k, false)?;
        if let Some(c) = cert.as_mut() {
            c.derivation.push_str("; gain from the feasibility solve after the minimization stalled");
        }
    }
    match (outcome.verdict, cert) {
        (_, Some(c)) => Ok((c.gain, c)),
        (SosVerdict::NumericalTrouble, None) => {
            Err(ProgramError::NumericalTrouble { k, lo: k, hi: k })
        }
        _ => Err(ProgramError::InfeasibleAt { k }),
    }
}

/// Largest radius `R <= r_hi` such that the program at rate `k` is feasible
/// on the ball `||x|| <= R`, to relative tolerance `rel_tol`. Troubled
/// solves count as infeasible.
pub fn max_ball_radius(
    spec: &AnalysisSpec,
    k: f64,
    r_hi: f64,
    rel_tol: f64,
) -> Result<(f64, StabilityCertificate), ProgramError> {
    let n = spec.nvars();
    let at = |r: f64| -> Result<Option<StabilityCertificate>, ProgramError> {
        let mut s = spec.clone();
        s.domain = SemialgebraicSet::ball(n, r);
        Ok(solve_at(&s, k, false)?.1)
    };
    if let Some(c) = at(r_hi)? {
        return Ok((r_hi, c));
    }
    let mut hi = r_hi;
    let mut lo = r_hi;
    let mut cert = None;
    for _ in 0..40 {
        lo *= 0.5;
        if let Some(c) = at(lo)? {
            cert = Some(c);
            break;
        }
        hi = lo;
    }
    let Some(mut cert) = cert else {
        return Err(ProgramError::InfeasibleAt { k });
    };
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        match at(mid)? {
            Some(c) => {
                lo = mid;
                cert = c;
            }
            None => hi = mid,
        }
    }
    Ok((lo, cert))
}
