use std::path::Path;

use ratecert::programs::bisect_rate;

use crate::analyze::status_of;
use crate::config::{Analysis, Loaded, SweepPoint};
use crate::output::write_atomic;
use crate::simulate::simulate;
use crate::{Failure, Outcome, Status};

struct Row {
    key: f64,
    k_i: Option<f64>,
    k_ii: Option<f64>,
    k_sim: Option<f64>,
    ratio_i_over_ii: Option<f64>,
    ratio_ii_over_sim: Option<f64>,
}

fn ratio(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
        _ => None,
    }
}

fn rate(loaded: &Loaded, p: &SweepPoint, kind: Analysis) -> (Option<f64>, Status) {
    let spec = match loaded.spec(p.d, p.spec.domain.clone(), kind) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{}: {e}", p.key);
            return (None, Status::Error);
        }
    };
    match bisect_rate(&spec) {
        Ok(b) => (Some(b.k_star), Status::Ok),
        Err(e) => {
            eprintln!("{} {kind:?}: {e}", p.key);
            (None, status_of(&e))
        }
    }
}

/// Fixed-gain and free-gain rational rates against the simulated rate, per
/// degree or per radius.
pub fn run(loaded: &Loaded, out: &Path, jobs: usize) -> Result<Outcome, Failure> {
    let c = &loaded.config;
    if !matches!(c.analysis, Analysis::RationalI | Analysis::RationalIi) {
        return Err(Failure::Config("compare needs a rational analysis".into()));
    }
    let Some(m) = c.parameters.gain else {
        return Err(Failure::Config("compare needs a fixed parameters.gain".into()));
    };
    let by_radius = c.sweep.radius.is_some();
    if by_radius && c.sweep.d.as_ref().is_some_and(|d| d.len() > 1) {
        return Err(Failure::Config("compare sweeps either d or radius, not both".into()));
    }
    let points = loaded.points()?;
    let shared_sim = if by_radius {
        None
    } else {
        Some(simulate(loaded, c.simulate.radius, m, jobs))
    };
    let mut statuses = Vec::new();
    let rows: Vec<Row> = points
        .iter()
        .map(|p| {
            let (k_i, s_i) = rate(loaded, p, Analysis::RationalI);
            let (k_ii, s_ii) = rate(loaded, p, Analysis::RationalIi);
            statuses.extend([s_i, s_ii]);
            let own;
            let sim = match &shared_sim {
                Some(s) => s,
                None => {
                    own = simulate(loaded, p.radius.unwrap_or(c.simulate.radius), m, jobs);
                    &own
                }
            };
            statuses.push(sim.status);
            eprintln!("{}: k_i = {k_i:?} k_ii = {k_ii:?} k_sim = {:?}", p.key, sim.k_sim);
            Row {
                key: if by_radius { p.radius.unwrap_or(f64::NAN) } else { p.d as f64 },
                k_i,
                k_ii,
                k_sim: sim.k_sim,
                ratio_i_over_ii: ratio(k_i, k_ii),
                ratio_ii_over_sim: ratio(k_ii, sim.k_sim),
            }
        })
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        if by_radius { "R" } else { "d" },
        "k_i",
        "k_ii",
        "k_sim",
        "ratio_i_over_ii",
        "ratio_ii_over_sim",
    ])
    .map_err(std::io::Error::other)?;
    for r in &rows {
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        w.write_record([
            r.key.to_string(),
            cell(r.k_i),
            cell(r.k_ii),
            cell(r.k_sim),
            cell(r.ratio_i_over_ii),
            cell(r.ratio_ii_over_sim),
        ])
        .map_err(std::io::Error::other)?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    write_atomic(&out.join("compare.csv"), &bytes)?;
    Ok(Outcome::from_statuses(statuses))
}
