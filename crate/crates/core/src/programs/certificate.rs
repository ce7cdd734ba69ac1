use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::build::BuiltProgram;
use super::{AnalysisKind, AnalysisSpec, FieldSpec};
use crate::beta::{pointwise_bound, AlphaMeasure, BetaFamily};
use crate::poly::{Polynomial, SemialgebraicSet};
use crate::region::{domain_radius, max_sublevel, RegionError};
use crate::sim::{integrate, parallel_map, IntegrateOptions};
use crate::sos::{SosCertificate, SosOutcome};

/// Relative slack of the sampled inequality check.
pub const SAMPLE_SLACK: f64 = 1e-5;

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub tau: Option<f64>,
    pub objective: Option<f64>,
    pub max_identity_residual: f64,
    pub min_gram_eig: f64,
    pub iterations: usize,
    pub sdp_rows: usize,
    pub sdp_blocks: Vec<usize>,
}

/// Certified `alpha(x(t)) <= M beta(alpha(x0), k t)` with the Lyapunov function
/// and SOS multipliers that prove it.
#[derive(Clone, Debug, Serialize)]
pub struct StabilityCertificate {
    pub analysis: AnalysisKind,
    pub family: BetaFamily,
    pub alpha: AlphaMeasure,
    pub k: f64,
    pub gain: f64,
    pub gamma: f64,
    /// `V(x)`, or `V~(z)` when `substitution` is set.
    pub v: Polynomial,
    /// `r` of `x = sign(z)|z|^r`.
    pub substitution: Option<u32>,
    pub h_exponents: Option<Vec<u32>>,
    /// Domain in the variables of `v`.
    pub domain: SemialgebraicSet,
    /// Field in the decrease condition, in the variables of `v`.
    pub program_field: Vec<Polynomial>,
    pub sos: SosCertificate,
    pub diagnostics: Diagnostics,
    pub derivation: String,
}

/// Result of the sampled check of the three program inequalities.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleCheck {
    pub samples: usize,
    pub passed: bool,
    /// Smallest `value / scale` over all constraints and samples.
    pub worst_margin: f64,
    pub worst_constraint: String,
    pub worst_point: Vec<f64>,
}

/// Result of comparing simulated trajectories against the certified bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationCheck {
    pub trajectories: usize,
    pub passed: bool,
    /// Largest `alpha(x(t)) - M beta(alpha(x0), k t)`.
    pub worst_margin: f64,
    pub worst_ic: Vec<f64>,
    /// Sublevel value bounding the initial conditions, for local certificates.
    pub level: Option<f64>,
    pub failures: usize,
}

impl StabilityCertificate {
    pub(crate) fn from_outcome(
        spec: &AnalysisSpec,
        built: &BuiltProgram,
        k: f64,
        outcome: &SosOutcome,
    ) -> Option<StabilityCertificate> {
        let sos = outcome.certificate.clone()?;
        let values = &sos.decision_values;
        let gamma = built.gamma.value(values);
        let raw = built.v.eval(values);
        let (v, substitution, h_exponents) = match &spec.kind {
            AnalysisKind::FiniteTime {
                r_subst,
                h_exponents,
                ..
            } => (raw.scale(1.0 / gamma), Some(*r_subst), Some(h_exponents.clone())),
            _ => (raw, None, None),
        };
        let max_identity_residual = sos
            .constraints
            .iter()
            .map(|c| c.identity_residual)
            .fold(0.0, f64::max);
        let min_gram_eig = sos
            .constraints
            .iter()
            .map(|c| c.min_gram_eig)
            .fold(f64::INFINITY, f64::min);
        let family = spec.kind.family();
        Some(StabilityCertificate {
            analysis: spec.kind.clone(),
            family,
            alpha: family.alpha(),
            k,
            gain: spec.kind.gain_from_gamma(gamma),
            gamma,
            v,
            substitution,
            h_exponents,
            domain: built.domain.clone(),
            program_field: built.field.clone(),
            sos,
            diagnostics: Diagnostics {
                tau: outcome.tau,
                objective: outcome.objective,
                max_identity_residual,
                min_gram_eig,
                iterations: outcome.iterations,
                sdp_rows: outcome.sdp_rows,
                sdp_blocks: outcome.sdp_blocks.clone(),
            },
            derivation: built.derivation.clone(),
        })
    }

    /// Maps `x` to the variables of `v`.
    pub fn to_program_coords(&self, x: &[f64]) -> Vec<f64> {
        match self.substitution {
            Some(r) => x
                .iter()
                .map(|v| v.signum() * v.abs().powf(1.0 / r as f64))
                .collect(),
            None => x.to_vec(),
        }
    }

    pub fn to_state_coords(&self, z: &[f64]) -> Vec<f64> {
        match self.substitution {
            Some(r) => z.iter().map(|v| v.signum() * v.abs().powi(r as i32)).collect(),
            None => z.to_vec(),
        }
    }

    /// The Lyapunov function at a state `x`.
    pub fn v_at(&self, x: &[f64]) -> f64 {
        self.v.eval(&self.to_program_coords(x))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    fn sample_box(&self) -> f64 {
        if self.domain.is_global() {
            2.0
        } else {
            domain_radius(&self.domain).unwrap_or(2.0)
        }
    }

    /// Evaluates every constraint expression at `samples` random points of the
    /// domain, requiring `value >= -SAMPLE_SLACK * scale` with
    /// `scale = max(1, max|coeff|) max(1, ||x||_inf)^degree`.
    pub fn sample_check(&self, samples: usize, seed: u64) -> SampleCheck {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.v.nvars();
        let b = self.sample_box();
        let mut out = SampleCheck {
            samples: 0,
            passed: true,
            worst_margin: f64::INFINITY,
            worst_constraint: String::new(),
            worst_point: vec![0.0; n],
        };
        let mut tries = 0usize;
        while out.samples < samples && tries < 1000 * samples {
            tries += 1;
            // Radii spread over several decades so the origin is covered too.
            let s = b * 10f64.powf(-3.0 * rng.gen::<f64>().powi(2));
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-s..=s)).collect();
            if !self.domain.contains(&x) {
                continue;
            }
            out.samples += 1;
            let xs = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for c in &self.sos.constraints {
                let e = &c.expression;
                let scale = e.max_abs_coeff().max(1.0) * xs.powi(e.degree() as i32);
                let m = e.eval(&x) / scale;
                if m < out.worst_margin {
                    out.worst_margin = m;
                    out.worst_constraint = c.label.clone();
                    out.worst_point = x.clone();
                }
            }
        }
        out.passed = out.samples == samples && out.worst_margin >= -SAMPLE_SLACK;
        out
    }

    /// Draws `count` initial conditions in the certified region (a sublevel
    /// set of `v` inside the domain, or a ball for global certificates),
    /// simulates them and checks the pointwise bound with the certified
    /// rate and gain.
    pub fn simulation_check(
        &self,
        field: &FieldSpec,
        count: usize,
        seed: u64,
        jobs: usize,
    ) -> Result<SimulationCheck, RegionError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.v.nvars();
        let (level, b) = if self.domain.is_global() {
            (None, 2.0)
        } else {
            (Some(max_sublevel(&self.v, &self.domain)?), domain_radius(&self.domain)?)
        };
        let mut ics = Vec::with_capacity(count);
        let mut tries = 0usize;
        while ics.len() < count && tries < 10_000 * count.max(1) {
            tries += 1;
            let z: Vec<f64> = (0..n).map(|_| rng.gen_range(-b..=b)).collect();
            let inside = match level {
                Some(c) => self.v.eval(&z) <= c && self.domain.contains(&z),
                None => z.iter().map(|v| v * v).sum::<f64>() <= b * b,
            };
            if inside && z.iter().any(|v| *v != 0.0) {
                ics.push(self.to_state_coords(&z));
            }
        }
        let sim = field.sim_field();
        let k = self.k;
        let results = parallel_map(&ics, jobs, |x0| {
            let a0 = self.alpha.eval(x0);
            let scale = x0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let (horizon, opts) = match self.family {
                BetaFamily::Exponential => (if k > 0.0 { 12.0 / k } else { 10.0 }, IntegrateOptions::relative()),
                BetaFamily::Rational { .. } => (
                    if k > 0.0 { (50.0 / (k * a0)).min(1e4) } else { 10.0 },
                    IntegrateOptions::relative(),
                ),
                BetaFamily::FiniteTime { .. } => (
                    if k > 0.0 { 1.5 * a0 / k } else { 10.0 },
                    IntegrateOptions::finite_time(scale),
                ),
            };
            match integrate(sim.as_ref(), x0, horizon, &opts) {
                Ok(traj) => pointwise_bound(&self.family, &self.alpha, self.gain, k, &traj).worst_margin,
                Err(_) => f64::INFINITY,
            }
        });
        let mut out = SimulationCheck {
            trajectories: ics.len(),
            passed: ics.len() == count,
            worst_margin: f64::NEG_INFINITY,
            worst_ic: Vec::new(),
            level,
            failures: 0,
        };
        for (x0, m) in ics.iter().zip(&results) {
            let slack = crate::beta::default_slack(self.alpha.eval(x0));
            if *m > slack {
                out.failures += 1;
                out.passed = false;
            }
            if *m > out.worst_margin {
                out.worst_margin = *m;
                out.worst_ic = x0.clone();
            }
        }
        Ok(out)
    }
}
