//! Primal-dual interior-point solver for block semidefinite programs with
//! free variables.
//!
//! Problems have the form `min <C, X> + c_u^T u` subject to
//! `<A_i, X> + B_i u = b_i`, `X` block positive semidefinite, `u` free.
//! Free variables are eliminated exactly by a pivoted QR of `B` before the
//! interior-point iteration, so rows that involve only free variables are
//! handled without any conditioning penalty.

mod ipm;
mod linalg;
mod problem;

use nalgebra::{DMatrix, DVector};

pub use linalg::{max_eigenvalue, min_eigenvalue};
pub use problem::{Constraint, SdpProblem, SparseSym};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SdpError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    /// Converged to the loose tolerance only.
    NearOptimal,
    /// Primal infeasible with a verified dual ray in [`Solution::witness`].
    Infeasible,
    /// Dual objective diverged; not yet confirmed by a ray.
    SuspectedInfeasible,
    /// Primal objective unbounded below (or dual infeasible).
    Unbounded,
    MaxIterations,
    NumericalTrouble,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Relative duality gap target.
    pub gap_tol: f64,
    /// Relative primal and dual residual target.
    pub feas_tol: f64,
    /// Accuracy accepted as [`Status::NearOptimal`] after a stall.
    pub loose_tol: f64,
    pub max_step_fraction: f64,
    /// Objective magnitude treated as divergence.
    pub divergence: f64,
    /// `tau* <= tau_feasible` classifies a feasibility problem as feasible.
    pub tau_feasible: f64,
    /// `tau* >= tau_infeasible` classifies it as infeasible.
    pub tau_infeasible: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iter: 200,
            gap_tol: 1e-9,
            feas_tol: 1e-9,
            loose_tol: 1e-6,
            max_step_fraction: 0.98,
            divergence: 1e10,
            tau_feasible: 1e-7,
            tau_infeasible: 1e-5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterInfo {
    pub iter: usize,
    pub primal_obj: f64,
    pub dual_obj: f64,
    /// `<X, Z>`, nonnegative on every iterate.
    pub complementarity: f64,
    pub primal_infeas: f64,
    pub dual_infeas: f64,
    pub step_primal: f64,
    pub step_dual: f64,
}

/// Dual improving ray: `sum_i y_i A_i <= 0`, `B^T y = 0`, `b^T y > 0`.
#[derive(Debug, Clone)]
pub struct InfeasibilityWitness {
    pub y: DVector<f64>,
    pub b_dot_y: f64,
    /// Largest eigenvalue of `sum_i y_i A_i` over all blocks.
    pub max_eig: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: Status,
    pub x: Vec<DMatrix<f64>>,
    pub z: Vec<DMatrix<f64>>,
    /// Multipliers of the original rows.
    pub y: DVector<f64>,
    pub u: DVector<f64>,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub iterations: usize,
    pub history: Vec<IterInfo>,
    pub witness: Option<InfeasibilityWitness>,
}

fn empty_solution(p: &SdpProblem, status: Status) -> Solution {
    Solution {
        status,
        x: p.block_dims.iter().map(|&d| DMatrix::zeros(d, d)).collect(),
        z: p.block_dims.iter().map(|&d| DMatrix::zeros(d, d)).collect(),
        y: DVector::zeros(p.constraints.len()),
        u: DVector::zeros(p.num_free),
        primal_obj: f64::NAN,
        dual_obj: f64::NAN,
        iterations: 0,
        history: Vec::new(),
        witness: None,
    }
}

fn solve_raw(p: &SdpProblem, opts: &SolverOptions) -> Result<Solution, SdpError> {
    match ipm::presolve(p)? {
        ipm::Presolved::Ready(red) => {
            let mut sol = ipm::run(&red, opts)?;
            sol.witness = None;
            Ok(sol)
        }
        ipm::Presolved::TrivialInfeasible(i) => {
            let mut sol = empty_solution(p, Status::Infeasible);
            let mut y = DVector::zeros(p.constraints.len());
            y[i] = p.constraints[i].rhs.signum();
            sol.witness = Some(InfeasibilityWitness {
                b_dot_y: p.constraints[i].rhs.abs(),
                y,
                max_eig: 0.0,
            });
            Ok(sol)
        }
        ipm::Presolved::DualInfeasible => Ok(empty_solution(p, Status::Unbounded)),
    }
}

/// Solves an SDP. Problems the iteration cannot finish are re-examined
/// through [`feasibility`]; infeasibility is reported only with a ray.
pub fn solve(p: &SdpProblem, opts: &SolverOptions) -> Result<Solution, SdpError> {
    let sol = solve_raw(p, opts)?;
    match sol.status {
        Status::Optimal | Status::NearOptimal | Status::Infeasible | Status::Unbounded => Ok(sol),
        _ => {
            let feas = feasibility(p, opts)?;
            if let Verdict::Infeasible = feas.verdict {
                let mut out = sol;
                out.status = Status::Infeasible;
                out.witness = feas.witness;
                Ok(out)
            } else {
                let mut out = sol;
                if out.status == Status::SuspectedInfeasible {
                    out.status = Status::NumericalTrouble;
                }
                Ok(out)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Feasible,
    Infeasible,
    /// `tau*` between the two thresholds; callers should treat it as infeasible.
    Marginal,
    NumericalTrouble,
}

#[derive(Debug, Clone)]
pub struct FeasibilityResult {
    pub verdict: Verdict,
    /// Optimal shift `tau*` (`NaN` when the solve failed).
    pub tau: f64,
    /// Solution of the shifted problem restricted to the original blocks:
    /// `x` holds `X + tau I`, which is positive definite, and satisfies the
    /// rows up to `tau * trace(A_i)`.
    pub solution: Solution,
    pub witness: Option<InfeasibilityWitness>,
}

/// Decides feasibility by solving `min tau` over `X + tau I >= 0`, `tau >= 0`.
/// The optimal dual multipliers of an infeasible instance form the ray.
pub fn feasibility(p: &SdpProblem, opts: &SolverOptions) -> Result<FeasibilityResult, SdpError> {
    p.validate()?;
    let nb = p.block_dims.len();
    let mut aug = SdpProblem::new(
        p.block_dims.iter().copied().chain(std::iter::once(1)).collect(),
        p.num_free,
    );
    aug.objective[nb].push(0, 0, 1.0);
    for row in &p.constraints {
        let tr: f64 = row.blocks.iter().map(|(_, a)| a.trace()).sum();
        let mut r = row.clone();
        if tr != 0.0 {
            let mut t = SparseSym::new(1);
            t.push(0, 0, -tr);
            r.blocks.push((nb, t));
        }
        aug.constraints.push(r);
    }
    let sol = solve_raw(&aug, opts)?;
    let restrict = |mut s: Solution| -> Solution {
        s.x.truncate(nb);
        s.z.truncate(nb);
        s
    };
    match sol.status {
        Status::Optimal | Status::NearOptimal => {
            let tau = sol.x[nb][(0, 0)];
            let verdict = if tau <= opts.tau_feasible {
                Verdict::Feasible
            } else if tau >= opts.tau_infeasible {
                Verdict::Infeasible
            } else {
                Verdict::Marginal
            };
            let witness = if verdict == Verdict::Infeasible {
                let y = sol.y.clone();
                Some(make_witness(p, y))
            } else {
                None
            };
            Ok(FeasibilityResult {
                verdict,
                tau,
                solution: restrict(sol),
                witness,
            })
        }
        Status::Infeasible => {
            // Only a trivially inconsistent zero row can get here.
            let w = sol.witness.clone();
            Ok(FeasibilityResult {
                verdict: Verdict::Infeasible,
                tau: f64::INFINITY,
                solution: restrict(sol),
                witness: w,
            })
        }
        _ => Ok(FeasibilityResult {
            verdict: Verdict::NumericalTrouble,
            tau: f64::NAN,
            solution: restrict(sol),
            witness: None,
        }),
    }
}

/// `sum_i y_i A_i` per block.
pub fn adjoint(p: &SdpProblem, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
    let mut out: Vec<DMatrix<f64>> = p.block_dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
    for (row, &yi) in p.constraints.iter().zip(y.iter()) {
        for (j, a) in &row.blocks {
            a.add_to(&mut out[*j], yi);
        }
    }
    out
}

fn make_witness(p: &SdpProblem, y: DVector<f64>) -> InfeasibilityWitness {
    let aty = adjoint(p, &y);
    let max_eig = aty.iter().map(max_eigenvalue).fold(f64::NEG_INFINITY, f64::max);
    let b_dot_y = p.constraints.iter().zip(y.iter()).map(|(r, yi)| r.rhs * yi).sum();
    InfeasibilityWitness { y, b_dot_y, max_eig }
}

/// Optimality residuals measured on the original problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    /// `||b - A(X) - B u|| / (1 + ||b||)`.
    pub primal_residual: f64,
    /// `||C - A^*(y) - Z|| / (1 + ||C||)`.
    pub dual_residual: f64,
    /// `||c_u - B^T y|| / (1 + ||c_u||)`.
    pub free_dual_residual: f64,
    /// `|pobj - dobj| / (1 + |pobj| + |dobj|)`.
    pub relative_gap: f64,
    pub min_eig_x: f64,
    pub min_eig_z: f64,
}

pub fn check_kkt(p: &SdpProblem, s: &Solution) -> KktReport {
    let mut pres = 0.0;
    let mut bn = 0.0;
    let mut bty = 0.0;
    let mut btyu = vec![0.0; p.num_free];
    for (i, row) in p.constraints.iter().enumerate() {
        let mut ax = 0.0;
        for (j, a) in &row.blocks {
            ax += a.dot(&s.x[*j]);
        }
        for &(l, v) in &row.free {
            ax += v * s.u[l];
            btyu[l] += v * s.y[i];
        }
        pres += (row.rhs - ax).powi(2);
        bn += row.rhs * row.rhs;
        bty += row.rhs * s.y[i];
    }
    let aty = adjoint(p, &s.y);
    let mut dres = 0.0;
    let mut cn = 0.0;
    let mut pobj = 0.0;
    for j in 0..p.block_dims.len() {
        let c = p.objective[j].to_dense();
        cn += c.norm_squared();
        pobj += p.objective[j].dot(&s.x[j]);
        dres += (&c - &aty[j] - &s.z[j]).norm_squared();
    }
    let cu = &p.free_objective;
    pobj += cu.iter().zip(s.u.iter()).map(|(a, b)| a * b).sum::<f64>();
    let fres: f64 = cu.iter().zip(&btyu).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let cun: f64 = cu.iter().map(|v| v * v).sum::<f64>().sqrt();
    KktReport {
        primal_residual: pres.sqrt() / (1.0 + bn.sqrt()),
        dual_residual: dres.sqrt() / (1.0 + cn.sqrt()),
        free_dual_residual: fres / (1.0 + cun),
        relative_gap: (pobj - bty).abs() / (1.0 + pobj.abs() + bty.abs()),
        min_eig_x: s.x.iter().map(min_eigenvalue).fold(f64::INFINITY, f64::min),
        min_eig_z: s.z.iter().map(min_eigenvalue).fold(f64::INFINITY, f64::min),
    }
}
