use std::path::Path;

use ratecert::programs::{max_ball_radius, minimize_gain, ProgramError, StabilityCertificate};
use ratecert::region::{analyze_region, check_nesting, domain_radius, RegionError, RegionResult};
use serde::Serialize;

use crate::analyze::status_of;
use crate::config::Loaded;
use crate::output::{write_atomic, write_csv};
use crate::{Failure, Outcome, Status};

#[derive(Serialize)]
struct PolylineRow {
    angle: f64,
    x1: f64,
    x2: f64,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct RegionRow {
    k: f64,
    #[serde(rename = "R")]
    radius: Option<f64>,
    c_star: Option<f64>,
    #[serde(rename = "M")]
    m: Option<f64>,
    invariant: Option<bool>,
    boundary_points: usize,
    status: Status,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct NestingRow {
    k_outer: f64,
    k_inner: f64,
    samples: usize,
    violations: usize,
    worst_ratio: f64,
    nested: bool,
}

struct Solved {
    radius: f64,
    cert: StabilityCertificate,
    region: RegionResult,
}

fn solve(loaded: &Loaded, k: f64) -> Result<Solved, (Status, String)> {
    let program = |e: ProgramError| (status_of(&e), e.to_string());
    let other = |e: RegionError| (Status::Error, e.to_string());
    let c = &loaded.config;
    let mut spec = loaded
        .spec(c.parameters.d, loaded.domain(None), c.analysis)
        .map_err(|e| (Status::Error, e.to_string()))?;
    if let Some(r_hi) = c.region.max_radius {
        let (r, _) = max_ball_radius(&spec, k, r_hi, 1e-3).map_err(program)?;
        spec.domain = loaded.domain(Some(r));
    }
    let (_, cert) = minimize_gain(&spec, k).map_err(program)?;
    let radius = domain_radius(&spec.domain).map_err(other)?;
    let region = analyze_region(&cert.v, &cert.domain, Some(&cert.program_field), c.region.resolution)
        .map_err(other)?;
    Ok(Solved { radius, cert, region })
}

fn key(k: f64) -> String {
    format!("k{k}")
}

pub fn run(loaded: &Loaded, out: &Path, jobs: usize) -> Result<Outcome, Failure> {
    if loaded.nvars() != 2 {
        return Err(Failure::Config(format!(
            "region needs a planar system, got {} states",
            loaded.nvars()
        )));
    }
    let mut ks = loaded.rates()?;
    ks.sort_by(f64::total_cmp);
    ks.dedup();
    let solved = ratecert::sim::parallel_map(&ks, jobs, |&k| solve(loaded, k));
    let mut rows = Vec::new();
    for (&k, s) in ks.iter().zip(&solved) {
        match s {
            Ok(s) => {
                let pts: Vec<PolylineRow> = s
                    .region
                    .boundary
                    .iter()
                    .map(|z| {
                        let x = s.cert.to_state_coords(z);
                        PolylineRow { angle: x[1].atan2(x[0]), x1: x[0], x2: x[1] }
                    })
                    .collect();
                write_csv(&out.join(format!("region_{}.csv", key(k))), &["angle", "x1", "x2"], &pts)?;
                write_atomic(
                    &out.join("certificates").join(format!("{}.json", key(k))),
                    s.cert.to_json().as_bytes(),
                )?;
                let invariant = s.region.invariance.as_ref().map(|r| r.passed);
                eprintln!(
                    "k = {k}: R = {:.4} c* = {:.4e} M = {:.4} invariant = {invariant:?}",
                    s.radius, s.region.c_star, s.cert.gain
                );
                rows.push(RegionRow {
                    k,
                    radius: Some(s.radius),
                    c_star: Some(s.region.c_star),
                    m: Some(s.cert.gain),
                    invariant,
                    boundary_points: pts.len(),
                    status: Status::Ok,
                });
            }
            Err((status, e)) => {
                eprintln!("k = {k}: {e}");
                let status = *status;
                rows.push(RegionRow {
                    k,
                    radius: None,
                    c_star: None,
                    m: None,
                    invariant: None,
                    boundary_points: 0,
                    status,
                });
            }
        }
    }
    write_csv(
        &out.join("regions.csv"),
        &["k", "R", "cStar", "M", "invariant", "boundaryPoints", "status"],
        &rows,
    )?;

    // Larger rates must give smaller regions.
    let ok: Vec<(f64, &Solved)> = ks
        .iter()
        .zip(&solved)
        .filter_map(|(&k, s)| s.as_ref().ok().map(|s| (k, s)))
        .collect();
    let nesting: Vec<NestingRow> = ok
        .windows(2)
        .map(|w| {
            let (k_outer, outer) = w[0];
            let (k_inner, inner) = w[1];
            let rep = check_nesting(
                (&inner.cert.v, inner.region.c_star),
                (&outer.cert.v, outer.region.c_star),
                loaded.config.region.nesting_samples,
                loaded.config.seed,
            );
            NestingRow {
                k_outer,
                k_inner,
                samples: rep.samples,
                violations: rep.violations,
                worst_ratio: rep.worst_ratio,
                nested: rep.nested(),
            }
        })
        .collect();
    for n in &nesting {
        eprintln!("k = {} inside k = {}: {}", n.k_inner, n.k_outer, if n.nested { "nested" } else { "NOT nested" });
    }
    write_csv(
        &out.join("nesting.csv"),
        &["kOuter", "kInner", "samples", "violations", "worstRatio", "nested"],
        &nesting,
    )?;
    Ok(Outcome::from_statuses(rows.iter().map(|r| r.status)))
}
