use std::collections::BTreeMap;

use nalgebra::DMatrix;
use ratecert_sdp::{
    check_kkt, feasibility, min_eigenvalue, solve, Constraint, KktReport, SdpProblem,
    SolverOptions, SparseSym, Status, Verdict,
};

use super::certificate::{ConstraintCertificate, GramBlock, SosCertificate};
use super::{SosConstraint, SosError, SosProgram};
use crate::poly::{Monomial, Polynomial};

/// Identity residual tolerance relative to the constraint scale.
pub const IDENTITY_TOL: f64 = 1e-6;
/// Smallest Gram eigenvalue accepted in a certificate.
pub const GRAM_EIG_TOL: f64 = -1e-8;

/// Gram parameterization of a degree-`degree` SOS polynomial: the monomial
/// basis `Z` with `p = Z^T Q Z`, and for every product monomial the index
/// pairs `(a <= b)` of `Q` that contribute to its coefficient.
pub struct GramParam {
    pub basis: Vec<Monomial>,
    pub map: BTreeMap<Monomial, Vec<(usize, usize)>>,
}

pub fn gram_parameterize(degree: u32, nvars: usize, homogeneous: bool) -> GramParam {
    let half = degree / 2;
    let basis = if homogeneous {
        Monomial::homogeneous(nvars, half)
    } else {
        Monomial::all_up_to(nvars, 0, half)
    };
    let mut map: BTreeMap<Monomial, Vec<(usize, usize)>> = BTreeMap::new();
    for a in 0..basis.len() {
        for b in a..basis.len() {
            map.entry(basis[a].mul(&basis[b])).or_default().push((a, b));
        }
    }
    GramParam { basis, map }
}

/// `Z^T Q Z` for a symmetric `Q`.
pub fn gram_coefficients(basis: &[Monomial], q: &DMatrix<f64>) -> Polynomial {
    let n = basis.first().map(Monomial::nvars).unwrap_or(0);
    let mut terms = Vec::with_capacity(basis.len() * basis.len());
    for a in 0..basis.len() {
        for b in a..basis.len() {
            let c = if a == b { q[(a, a)] } else { q[(a, b)] + q[(b, a)] };
            terms.push((basis[a].mul(&basis[b]), c));
        }
    }
    Polynomial::from_terms(n, terms).expect("uniform basis")
}

/// SOS degree of the multiplier of each domain constraint: the largest even
/// integer not above `degree - deg(g_i)`, or `None` when `deg(g_i)` exceeds
/// the constraint degree.
pub fn putinar_allocate(c: &SosConstraint) -> Vec<Option<u32>> {
    c.domain
        .constraints()
        .iter()
        .map(|g| {
            let dg = g.degree();
            (c.degree >= dg).then(|| {
                let room = c.degree - dg;
                room - room % 2
            })
        })
        .collect()
}

/// Which SOS polynomial a PSD block represents.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockInfo {
    pub constraint: usize,
    /// `None` for `s_0`, `Some(i)` for the multiplier of `g_i`.
    pub multiplier: Option<usize>,
    pub basis: Vec<Monomial>,
}

pub struct CompiledSos {
    pub sdp: SdpProblem,
    pub blocks: Vec<BlockInfo>,
    /// Constraint index and monomial of every SDP row.
    pub rows: Vec<(usize, Monomial)>,
}

/// Gram bases for one constraint: degrees `lo..=hi` for `s_0`, then one
/// optional range per multiplier.
fn basis_ranges(c: &SosConstraint) -> (Option<(u32, u32)>, Vec<Option<(u32, u32)>>) {
    let mindeg = c.expr.min_degree();
    let maxdeg = c.expr.degree();
    let global = c.domain.is_global();
    let zero = vec![0.0; c.expr.nvars()];
    let positive_at_origin = c.domain.constraints().iter().all(|g| g.eval(&zero) > 0.0);
    // The lowest-degree part of each SOS term is a nonnegative form, so none
    // can cancel below the expression's lowest degree when g_i(0) > 0.
    let lo = if global || positive_at_origin {
        mindeg.div_ceil(2)
    } else {
        0
    };
    let hi0 = if global {
        c.degree.min(maxdeg) / 2
    } else {
        c.degree / 2
    };
    let s0 = (lo <= hi0).then_some((lo, hi0));
    let mults = putinar_allocate(c)
        .into_iter()
        .map(|d| d.and_then(|d| (lo <= d / 2).then_some((lo, d / 2))))
        .collect();
    (s0, mults)
}

#[derive(Default)]
struct RowBuilder {
    blocks: BTreeMap<usize, SparseSym>,
    free: BTreeMap<usize, f64>,
    rhs: f64,
}

pub fn compile(prog: &SosProgram) -> Result<CompiledSos, SosError> {
    let n = prog.nvars();
    let mut blocks: Vec<BlockInfo> = Vec::new();
    let mut rows_out: Vec<(usize, Monomial)> = Vec::new();
    let mut constraints: Vec<Constraint> = Vec::new();
    for (ci, c) in prog.constraints.iter().enumerate() {
        let maxdeg = c.expr.degree();
        if maxdeg > c.degree {
            return Err(SosError::DegreeOverflow {
                label: c.label.clone(),
                found: maxdeg,
                declared: c.degree,
            });
        }
        let mut rows: BTreeMap<Monomial, RowBuilder> = BTreeMap::new();
        for (m, v) in c.expr.constant().terms() {
            rows.entry(m.clone()).or_default().rhs += v;
        }
        for (var, p) in c.expr.linear() {
            for (m, v) in p.terms() {
                *rows.entry(m.clone()).or_default().free.entry(var.0).or_insert(0.0) -= v;
            }
        }
        let (s0, mults) = basis_ranges(c);
        let one = Polynomial::constant(n, 1.0);
        let pieces = std::iter::once((None, s0, &one)).chain(
            mults
                .iter()
                .zip(c.domain.constraints())
                .enumerate()
                .map(|(i, (r, g))| (Some(i), *r, g)),
        );
        for (mult, range, g) in pieces {
            let Some((lo, hi)) = range else { continue };
            let basis = Monomial::all_up_to(n, lo, hi);
            let bi = blocks.len();
            let s = basis.len();
            for a in 0..s {
                for b in a..s {
                    let ab = basis[a].mul(&basis[b]);
                    for (t, gc) in g.terms() {
                        let row = rows.entry(ab.mul(t)).or_default();
                        row.blocks
                            .entry(bi)
                            .or_insert_with(|| SparseSym::new(s))
                            .push(a, b, gc);
                    }
                }
            }
            blocks.push(BlockInfo {
                constraint: ci,
                multiplier: mult,
                basis,
            });
        }
        for (m, rb) in rows {
            let mut bl: Vec<(usize, SparseSym)> = rb.blocks.into_iter().collect();
            for (_, sym) in &mut bl {
                sym.compress();
            }
            bl.retain(|(_, s)| !s.is_empty());
            constraints.push(Constraint {
                blocks: bl,
                free: rb.free.into_iter().filter(|(_, v)| *v != 0.0).collect(),
                rhs: rb.rhs,
            });
            rows_out.push((ci, m));
        }
    }
    let mut sdp = SdpProblem::new(blocks.iter().map(|b| b.basis.len()).collect(), prog.num_vars());
    for &(v, w) in prog.objective() {
        sdp.free_objective[v.0] += w;
    }
    sdp.constraints = constraints;
    Ok(CompiledSos {
        sdp,
        blocks,
        rows: rows_out,
    })
}

/// Rebuilds decision values and SOS polynomials from SDP blocks, checking
/// the Gram and identity-residual contracts.
pub fn extract(
    prog: &SosProgram,
    compiled: &CompiledSos,
    x: &[DMatrix<f64>],
    u: &[f64],
) -> Result<SosCertificate, SosError> {
    let values = u.to_vec();
    let mut certs = Vec::with_capacity(prog.constraints.len());
    for (ci, c) in prog.constraints.iter().enumerate() {
        let target = c.expr.eval(&values);
        let mut recon = Polynomial::zero(prog.nvars());
        let mut grams = Vec::new();
        let mut min_eig = f64::INFINITY;
        for (bi, info) in compiled.blocks.iter().enumerate() {
            if info.constraint != ci {
                continue;
            }
            let q = &x[bi];
            let e = min_eigenvalue(q);
            min_eig = min_eig.min(e);
            let s = gram_coefficients(&info.basis, q);
            let term = match info.multiplier {
                None => s.clone(),
                Some(i) => &s * &c.domain.constraints()[i],
            };
            recon = &recon + &term;
            grams.push(GramBlock {
                multiplier: info.multiplier,
                basis: info.basis.clone(),
                gram: (0..q.nrows())
                    .map(|r| q.row(r).iter().copied().collect())
                    .collect(),
                polynomial: s,
            });
        }
        let scale = c.expr.constant().max_abs_coeff().max(1.0);
        let residual = (&target - &recon).max_abs_coeff();
        if min_eig < GRAM_EIG_TOL {
            return Err(SosError::Indefinite {
                label: c.label.clone(),
                min_eig,
            });
        }
        if residual > IDENTITY_TOL * scale {
            return Err(SosError::ResidualTooLarge {
                label: c.label.clone(),
                residual,
                limit: IDENTITY_TOL * scale,
            });
        }
        certs.push(ConstraintCertificate {
            label: c.label.clone(),
            expression: target,
            domain: c.domain.constraints().to_vec(),
            blocks: grams,
            identity_residual: residual,
            scale,
            min_gram_eig: if min_eig.is_finite() { min_eig } else { 0.0 },
        });
    }
    Ok(SosCertificate {
        decision_values: values,
        constraints: certs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SosVerdict {
    Feasible,
    Infeasible,
    /// Shift `tau*` fell between the feasibility thresholds.
    Marginal,
    NumericalTrouble,
}

#[derive(Debug, Clone)]
pub struct SosOutcome {
    pub verdict: SosVerdict,
    /// Feasibility shift, when solved as a feasibility problem.
    pub tau: Option<f64>,
    /// Objective value, when solved as an optimization problem.
    pub objective: Option<f64>,
    pub certificate: Option<SosCertificate>,
    pub kkt: Option<KktReport>,
    pub iterations: usize,
    pub sdp_rows: usize,
    pub sdp_blocks: Vec<usize>,
    /// Why a converged solve did not yield a certificate.
    pub note: Option<String>,
}

/// Compiles and solves. Programs without an objective are decided through the
/// `tau` shift; otherwise the objective is minimized.
pub fn solve_program(prog: &SosProgram, opts: &SolverOptions) -> Result<SosOutcome, SosError> {
    let compiled = compile(prog)?;
    let mut out = SosOutcome {
        verdict: SosVerdict::NumericalTrouble,
        tau: None,
        objective: None,
        certificate: None,
        kkt: None,
        iterations: 0,
        sdp_rows: compiled.sdp.num_constraints(),
        sdp_blocks: compiled.sdp.block_dims.clone(),
        note: None,
    };
    let (x, u) = if prog.has_objective() {
        let sol = solve(&compiled.sdp, opts)?;
        out.iterations = sol.iterations;
        match sol.status {
            Status::Optimal | Status::NearOptimal => {
                out.objective = Some(sol.primal_obj);
                out.kkt = Some(check_kkt(&compiled.sdp, &sol));
                (sol.x, sol.u)
            }
            Status::Infeasible => {
                out.verdict = SosVerdict::Infeasible;
                return Ok(out);
            }
            s => {
                out.note = Some(format!("solver status {s:?}"));
                return Ok(out);
            }
        }
    } else {
        let res = feasibility(&compiled.sdp, opts)?;
        out.iterations = res.solution.iterations;
        out.tau = Some(res.tau);
        match res.verdict {
            Verdict::Feasible => (res.solution.x, res.solution.u),
            Verdict::Infeasible => {
                out.verdict = SosVerdict::Infeasible;
                return Ok(out);
            }
            Verdict::Marginal => {
                out.verdict = SosVerdict::Marginal;
                return Ok(out);
            }
            Verdict::NumericalTrouble => {
                out.note = Some("feasibility solve failed".into());
                return Ok(out);
            }
        }
    };
    match extract(prog, &compiled, &x, u.as_slice()) {
        Ok(cert) => {
            out.verdict = SosVerdict::Feasible;
            out.certificate = Some(cert);
        }
        Err(e) => out.note = Some(e.to_string()),
    }
    Ok(out)
}
