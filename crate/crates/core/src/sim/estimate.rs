use serde::Serialize;

use super::{integrate, parallel_map, IntegrateOptions, SimError, Trajectory, VectorField};
use crate::beta::{pointwise_bound, AlphaMeasure, BetaFamily};

/// Default settling threshold relative to `alpha(x0)`.
pub const SETTLING_REL: f64 = 1e-9;

/// First time `alpha(x(t)) <= threshold`, linearly interpolated between
/// samples. `threshold` defaults to `1e-9 alpha(x0)`.
pub fn settling_time(
    traj: &Trajectory,
    alpha: &AlphaMeasure,
    threshold: Option<f64>,
) -> Result<f64, SimError> {
    let a0 = alpha.eval(&traj.states[0]);
    let thr = threshold.unwrap_or(SETTLING_REL * a0);
    if a0 <= thr {
        return Ok(traj.times[0]);
    }
    let mut prev = (traj.times[0], a0);
    for (t, x) in traj.times.iter().zip(&traj.states).skip(1) {
        let a = alpha.eval(x);
        if a <= thr {
            let (tp, ap) = prev;
            return Ok(tp + (t - tp) * (ap - thr) / (ap - a));
        }
        prev = (*t, a);
    }
    Err(SimError::NotSettled {
        horizon: traj.t_end(),
    })
}

/// Outcome of [`estimate_rate`] or [`estimate_rate_settling`].
#[derive(Clone, Debug, Serialize)]
pub struct RateEstimate {
    pub k_sim: f64,
    /// `None` for settling-time estimates, which use no gain.
    pub gain: Option<f64>,
    pub family: BetaFamily,
    pub horizon: f64,
    pub ic_count: usize,
    pub ic_rule: String,
    pub worst_ic: Vec<f64>,
    pub worst_time: f64,
}

/// Relative tolerance of the rate bisection.
pub const RATE_REL_TOL: f64 = 1e-3;

/// Integrates every initial condition over `[0, horizon]`.
pub fn simulate_all<F: VectorField + ?Sized>(
    field: &F,
    ics: &[Vec<f64>],
    horizon: f64,
    opts: &IntegrateOptions,
    jobs: usize,
) -> Result<Vec<Trajectory>, SimError> {
    parallel_map(ics, jobs, |x0| integrate(field, x0, horizon, opts))
        .into_iter()
        .collect()
}

/// Largest `k` in `bracket`, to [`RATE_REL_TOL`], such that `traj` satisfies
/// `alpha(x(t)) <= M beta(alpha(x0), k t)` at its samples. The upper end is
/// doubled until it fails; a trajectory that never fails has rate infinity.
/// Returns the rate and the time of the binding violation just above it.
pub fn trajectory_rate(
    traj: &Trajectory,
    family: &BetaFamily,
    alpha: &AlphaMeasure,
    gain: f64,
    bracket: (f64, f64),
) -> Result<(f64, f64), SimError> {
    let check = |k: f64| pointwise_bound(family, alpha, gain, k, traj);
    let (mut lo, mut hi) = bracket;
    let first = check(lo);
    if !first.holds {
        return Err(SimError::GainViolation {
            ic: traj.states[0].clone(),
            time: first.worst_time,
            margin: first.worst_margin,
        });
    }
    let mut doublings = 0;
    let mut top = check(hi);
    while top.holds {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 40 {
            return Ok((f64::INFINITY, 0.0));
        }
        top = check(hi);
    }
    while hi - lo > RATE_REL_TOL * lo.max(f64::MIN_POSITIVE) {
        let mid = 0.5 * (lo + hi);
        let b = check(mid);
        if b.holds {
            lo = mid;
        } else {
            hi = mid;
            top = b;
        }
    }
    Ok((lo, top.worst_time))
}

/// Largest `k` in `bracket` such that every trajectory satisfies
/// `alpha(x(t)) <= M beta(alpha(x0), k t)` at its samples.
pub fn estimate_rate(
    trajs: &[Trajectory],
    family: &BetaFamily,
    alpha: &AlphaMeasure,
    gain: f64,
    bracket: (f64, f64),
    ic_rule: &str,
) -> Result<RateEstimate, SimError> {
    let rates = trajs
        .iter()
        .map(|tr| trajectory_rate(tr, family, alpha, gain, bracket))
        .collect::<Result<Vec<_>, _>>()?;
    let ics: Vec<&[f64]> = trajs.iter().map(|t| t.states[0].as_slice()).collect();
    let horizon = trajs.iter().map(Trajectory::t_end).fold(0.0, f64::max);
    summarize(&ics, &rates, family, gain, horizon, ic_rule)
}

/// Rate of one initial condition from [`rate_from_ics`].
#[derive(Clone, Debug, Serialize)]
pub struct IcRate {
    pub ic: Vec<f64>,
    pub k: Option<f64>,
    pub worst_time: Option<f64>,
    pub error: Option<String>,
}

/// [`estimate_rate`] without keeping the trajectories: each initial
/// condition is integrated, reduced to its own rate and dropped. Returns the
/// per-IC rates and, when every IC succeeded, their minimum.
#[allow(clippy::too_many_arguments)]
pub fn rate_from_ics<F: VectorField + ?Sized>(
    field: &F,
    ics: &[Vec<f64>],
    horizon: f64,
    opts: &IntegrateOptions,
    family: &BetaFamily,
    alpha: &AlphaMeasure,
    gain: f64,
    bracket: (f64, f64),
    ic_rule: &str,
    jobs: usize,
) -> (Vec<IcRate>, Result<RateEstimate, SimError>) {
    let per: Vec<Result<(f64, f64), SimError>> = parallel_map(ics, jobs, |x0| {
        let tr = integrate(field, x0, horizon, opts)?;
        trajectory_rate(&tr, family, alpha, gain, bracket)
    });
    let report = ics
        .iter()
        .zip(&per)
        .map(|(x0, r)| match r {
            Ok((k, t)) => IcRate { ic: x0.clone(), k: Some(*k), worst_time: Some(*t), error: None },
            Err(e) => IcRate { ic: x0.clone(), k: None, worst_time: None, error: Some(e.to_string()) },
        })
        .collect();
    let est = per
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .and_then(|rates| {
            let refs: Vec<&[f64]> = ics.iter().map(Vec::as_slice).collect();
            summarize(&refs, &rates, family, gain, horizon, ic_rule)
        });
    (report, est)
}

fn summarize(
    ics: &[&[f64]],
    rates: &[(f64, f64)],
    family: &BetaFamily,
    gain: f64,
    horizon: f64,
    ic_rule: &str,
) -> Result<RateEstimate, SimError> {
    let (i, &(k, t)) = rates
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .ok_or(SimError::NoInitialConditions)?;
    if k.is_infinite() {
        return Err(SimError::RateUnbounded { k });
    }
    Ok(RateEstimate {
        k_sim: k,
        gain: Some(gain),
        family: *family,
        horizon,
        ic_count: ics.len(),
        ic_rule: ic_rule.to_string(),
        worst_ic: ics[i].to_vec(),
        worst_time: t,
    })
}

/// Finite-time rate from settling times: `min_x0 alpha(x0) / T(x0)`.
pub fn estimate_rate_settling(
    trajs: &[Trajectory],
    family: &BetaFamily,
    alpha: &AlphaMeasure,
    ic_rule: &str,
) -> Result<RateEstimate, SimError> {
    let mut best: Option<(f64, usize, f64)> = None;
    for (i, tr) in trajs.iter().enumerate() {
        let a0 = alpha.eval(&tr.states[0]);
        if a0 == 0.0 {
            continue;
        }
        let t = settling_time(tr, alpha, None)?;
        let k = a0 / t;
        if best.map_or(true, |(b, _, _)| k < b) {
            best = Some((k, i, t));
        }
    }
    let (k, i, t) = best.ok_or(SimError::NoInitialConditions)?;
    Ok(RateEstimate {
        k_sim: k,
        gain: None,
        family: *family,
        horizon: trajs.iter().map(Trajectory::t_end).fold(0.0, f64::max),
        ic_count: trajs.len(),
        ic_rule: ic_rule.to_string(),
        worst_ic: trajs[i].states[0].clone(),
        worst_time: t,
    })
}
