use std::path::Path;

use ratecert::beta::{AlphaMeasure, BetaFamily};
use ratecert::sim::{
    ball_ics, integrate, parallel_map, settling_time, trajectory_rate, IntegrateOptions, SimError,
};
use serde::Serialize;

use crate::config::{AlphaChoice, IcRule, Loaded};
use crate::output::{join, write_atomic, write_csv};
use crate::{Failure, Outcome, Status};

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct IcRow {
    index: usize,
    x0: String,
    alpha0: f64,
    k: Option<f64>,
    /// Binding time for rate bounds, settling time for finite-time runs.
    time: Option<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SummaryRow {
    k_sim: Option<f64>,
    gain: Option<f64>,
    family: &'static str,
    alpha: String,
    ic_rule: String,
    ic_count: usize,
    ic_radius: f64,
    horizon: f64,
    seed: u64,
    worst_ic: String,
    worst_time: Option<f64>,
    failures: usize,
    status: Status,
}

/// Simulated rate over one IC set.
pub struct SimRun {
    pub family: BetaFamily,
    pub alpha: AlphaMeasure,
    pub ics: Vec<Vec<f64>>,
    /// Per IC: `(k, time)` or the error.
    pub per_ic: Vec<Result<(f64, f64), SimError>>,
    pub k_sim: Option<f64>,
    pub worst: Option<usize>,
    pub status: Status,
}

pub fn family_and_alpha(loaded: &Loaded) -> (BetaFamily, AlphaMeasure) {
    let d = loaded.config.parameters.d;
    let family = loaded
        .spec(d, loaded.domain(None), loaded.config.analysis)
        .map(|s| s.kind.family())
        .unwrap_or(BetaFamily::Exponential);
    let alpha = match loaded.config.simulate.alpha {
        AlphaChoice::Family => family.alpha(),
        AlphaChoice::TwoNorm => AlphaMeasure::TwoNormPow(match family {
            BetaFamily::Exponential => 1.0,
            BetaFamily::Rational { p } => p,
            BetaFamily::FiniteTime { eta, .. } => eta,
        }),
    };
    (family, alpha)
}

pub fn initial_conditions(loaded: &Loaded, radius: f64) -> Vec<Vec<f64>> {
    let s = &loaded.config.simulate;
    let n = loaded.nvars();
    match s.ics {
        IcRule::Sphere => ratecert::sim::sphere_ics(n, s.count, radius, loaded.config.seed),
        IcRule::Ball => ball_ics(n, s.count, radius, loaded.config.seed),
    }
}

fn options(family: &BetaFamily, x0: &[f64]) -> IntegrateOptions {
    match family {
        BetaFamily::FiniteTime { .. } => {
            IntegrateOptions::finite_time(x0.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        }
        _ => IntegrateOptions::relative(),
    }
}

/// Rate bound protocol for exponential and rational families, settling
/// times `alpha(x0) / T(x0)` for finite-time ones.
pub fn simulate(loaded: &Loaded, radius: f64, gain: f64, jobs: usize) -> SimRun {
    let (family, alpha) = family_and_alpha(loaded);
    let ics = initial_conditions(loaded, radius);
    let horizon = loaded.config.simulate.horizon;
    let field = loaded.field.sim_field();
    let per_ic: Vec<Result<(f64, f64), SimError>> = match family {
        BetaFamily::FiniteTime { .. } => parallel_map(&ics, jobs, |x0| {
            let tr = integrate(field.as_ref(), x0, horizon, &options(&family, x0))?;
            let t = settling_time(&tr, &alpha, None)?;
            Ok((alpha.eval(x0) / t, t))
        }),
        _ => parallel_map(&ics, jobs, |x0| {
            let tr = integrate(field.as_ref(), x0, horizon, &IntegrateOptions::relative())?;
            trajectory_rate(&tr, &family, &alpha, gain, (0.0, 1.0))
        }),
    };
    let mut status = Status::Ok;
    let mut worst: Option<usize> = None;
    for (i, r) in per_ic.iter().enumerate() {
        match r {
            Ok((k, _)) => {
                if k.is_finite() && worst.map_or(true, |w| *k < per_ic[w].as_ref().unwrap().0) {
                    worst = Some(i);
                }
            }
            Err(SimError::GainViolation { .. }) => status = status.max(Status::Infeasible),
            Err(_) => status = status.max(Status::NumericalTrouble),
        }
    }
    let k_sim = match (status, worst) {
        (Status::Ok, Some(w)) => Some(per_ic[w].as_ref().unwrap().0),
        _ => None,
    };
    SimRun { family, alpha, ics, per_ic, k_sim, worst, status }
}

pub fn run(loaded: &Loaded, out: &Path, jobs: usize) -> Result<Outcome, Failure> {
    let s = &loaded.config.simulate;
    let gain = loaded.sim_gain();
    let run = simulate(loaded, s.radius, gain, jobs);
    let rows: Vec<IcRow> = run
        .ics
        .iter()
        .zip(&run.per_ic)
        .enumerate()
        .map(|(i, (x0, r))| IcRow {
            index: i,
            x0: join(x0),
            alpha0: run.alpha.eval(x0),
            k: r.as_ref().ok().map(|p| p.0),
            time: r.as_ref().ok().map(|p| p.1),
            error: r.as_ref().err().map(ToString::to_string),
        })
        .collect();
    write_csv(&out.join("ics.csv"), &["index", "x0", "alpha0", "k", "time", "error"], &rows)?;

    // Dump the binding trajectory, or the first failing one.
    let dump = run.worst.filter(|_| run.status == Status::Ok).or_else(|| {
        run.per_ic.iter().position(Result::is_err)
    });
    let failures = run.per_ic.iter().filter(|r| r.is_err()).count();
    let settling = matches!(run.family, BetaFamily::FiniteTime { .. });
    let summary = SummaryRow {
        k_sim: run.k_sim,
        gain: (!settling).then_some(gain),
        family: run.family.name(),
        alpha: format!("{:?}", run.alpha),
        ic_rule: format!("{:?}", s.ics).to_lowercase(),
        ic_count: run.ics.len(),
        ic_radius: s.radius,
        horizon: s.horizon,
        seed: loaded.config.seed,
        worst_ic: dump.map(|i| join(&run.ics[i])).unwrap_or_default(),
        worst_time: dump.and_then(|i| run.per_ic[i].as_ref().ok().map(|p| p.1)),
        failures,
        status: run.status,
    };
    write_csv(&out.join("simulate.csv"), &[], &[summary])?;
    if let Some(i) = dump {
        let x0 = &run.ics[i];
        let field = loaded.field.sim_field();
        let alpha = run.alpha;
        match integrate(field.as_ref(), x0, s.horizon, &options(&run.family, x0)) {
            Ok(tr) => write_atomic(&out.join("worst_trajectory.csv"), tr.to_csv(|x| alpha.eval(x)).as_bytes())?,
            Err(e) => eprintln!("worst trajectory: {e}"),
        }
    }
    match run.k_sim {
        Some(k) => eprintln!("k_sim = {k} from {} initial conditions", run.ics.len()),
        None => eprintln!("no rate: {failures} initial conditions failed"),
    }
    Ok(Outcome::from_statuses([run.status]))
}
