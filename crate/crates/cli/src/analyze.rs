use std::path::Path;
use std::time::Instant;

use ratecert::programs::{bisect_rate, minimize_gain, GainMode, ProgramError};
use serde::{Deserialize, Serialize};

use crate::config::{Loaded, SweepPoint};
use crate::output::{write_atomic, write_csv};
use crate::{Failure, Outcome, Status};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SummaryRow {
    pub sweep_key: String,
    pub k_star: Option<f64>,
    #[serde(rename = "M")]
    pub m: Option<f64>,
    pub solve_status: Status,
    pub residuals: Option<f64>,
    pub wall_time: f64,
}

pub const SUMMARY_HEADER: [&str; 6] = ["sweepKey", "kStar", "M", "solveStatus", "residuals", "wallTime"];

/// Record kept per sweep point so an interrupted sweep can resume.
#[derive(Serialize, Deserialize)]
struct PointRecord {
    fingerprint: String,
    row: SummaryRow,
}

fn fingerprint(loaded: &Loaded, point: &SweepPoint) -> String {
    let mut c = loaded.config.clone();
    c.output = None;
    c.jobs = None;
    format!("{}|{}", point.key, serde_json::to_string(&c).unwrap_or_default())
}

pub fn status_of(e: &ProgramError) -> Status {
    match e {
        ProgramError::InfeasibleAtKLo { .. } | ProgramError::InfeasibleAt { .. } => Status::Infeasible,
        ProgramError::NumericalTrouble { .. } | ProgramError::Sos(_) => Status::NumericalTrouble,
        _ => Status::Error,
    }
}

fn run_point(point: &SweepPoint, certs: &Path) -> SummaryRow {
    let start = Instant::now();
    let mut row = SummaryRow {
        sweep_key: point.key.clone(),
        k_star: None,
        m: None,
        solve_status: Status::Ok,
        residuals: None,
        wall_time: 0.0,
    };
    let result = bisect_rate(&point.spec).and_then(|b| {
        let cert = match point.spec.gain {
            GainMode::Minimize => match minimize_gain(&point.spec, b.k_star) {
                Ok((_, c)) => c,
                Err(_) => b.certificate,
            },
            GainMode::Fixed(_) => b.certificate,
        };
        Ok((b.k_star, cert))
    });
    match result {
        Ok((k, cert)) => {
            row.k_star = Some(k);
            row.m = Some(cert.gain);
            row.residuals = Some(cert.diagnostics.max_identity_residual);
            let path = certs.join(format!("{}.json", point.file_stem()));
            if let Err(e) = write_atomic(&path, cert.to_json().as_bytes()) {
                eprintln!("{}: cannot write certificate: {e}", point.key);
                row.solve_status = Status::Error;
            }
        }
        Err(e) => {
            eprintln!("{}: {e}", point.key);
            row.solve_status = status_of(&e);
        }
    }
    row.wall_time = start.elapsed().as_secs_f64();
    row
}

pub fn run(loaded: &Loaded, out: &Path, jobs: usize) -> Result<Outcome, Failure> {
    let points = loaded.points()?;
    let certs = out.join("certificates");
    let records = out.join("points");
    let rows = ratecert::sim::parallel_map(&points, jobs, |p| {
        let rec_path = records.join(format!("{}.json", p.file_stem()));
        let fp = fingerprint(loaded, p);
        if let Some(rec) = std::fs::read(&rec_path)
            .ok()
            .and_then(|b| serde_json::from_slice::<PointRecord>(&b).ok())
            .filter(|r| r.fingerprint == fp)
        {
            eprintln!("{}: reused", p.key);
            return rec.row;
        }
        let row = run_point(p, &certs);
        eprintln!(
            "{}: {:?} k* = {:?} M = {:?} ({:.1}s)",
            row.sweep_key, row.solve_status, row.k_star, row.m, row.wall_time
        );
        let rec = PointRecord { fingerprint: fp, row: row.clone() };
        if let Ok(b) = serde_json::to_vec_pretty(&rec) {
            let _ = write_atomic(&rec_path, &b);
        }
        row
    });
    write_csv(&out.join("summary.csv"), &SUMMARY_HEADER, &rows)?;
    Ok(Outcome::from_statuses(rows.iter().map(|r| r.solve_status)))
}
