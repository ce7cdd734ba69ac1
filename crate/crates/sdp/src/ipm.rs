//! Infeasible primal-dual path following with Nesterov-Todd scaling and a
//! Mehrotra predictor-corrector, applied to a presolved problem.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{
    frob_dot, independent_subset, max_step_scaled, nt_scaling, symmetrize, NtScaling, PivotedQr,
};
use crate::problem::SdpProblem;
use crate::{IterInfo, SdpError, Solution, SolverOptions, Status};

type Entries = Vec<(usize, usize, f64)>;

/// Linear map from the reduced multiplier space onto original rows.
enum Projection {
    Identity,
    Dense(DMatrix<f64>),
}

impl Projection {
    fn reduce(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Projection::Identity => v.clone(),
            Projection::Dense(q) => q.tr_mul(v),
        }
    }

    fn lift(&self, y: &DVector<f64>) -> DVector<f64> {
        match self {
            Projection::Identity => y.clone(),
            Projection::Dense(q) => q * y,
        }
    }

    fn congruence(&self, m: DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Projection::Identity => m,
            Projection::Dense(q) => {
                let t = &m * q;
                q.tr_mul(&t)
            }
        }
    }
}

/// Presolved problem: scaled rows restricted to `kept`, free variables
/// eliminated through `proj`, objective shifted by `A^*(w)`.
pub(crate) struct Reduced {
    dims: Vec<usize>,
    /// Original number of rows.
    m_orig: usize,
    kept: Vec<usize>,
    scale: Vec<f64>,
    /// Per block: rows (compact index) touching it with their entries.
    block_rows: Vec<Vec<(usize, Entries)>>,
    proj: Projection,
    mbar: usize,
    b_rows: DVector<f64>,
    b: DVector<f64>,
    c: Vec<DMatrix<f64>>,
    /// Shift of multipliers in compact scaled rows.
    w: DVector<f64>,
    obj_offset: f64,
    free: Option<FreeElim>,
    num_free: usize,
}

struct FreeElim {
    qr: PivotedQr,
}

/// Result of presolve: a reduced problem, or an immediate verdict.
pub(crate) enum Presolved {
    Ready(Reduced),
    /// A zero row with nonzero right-hand side; carries the original index.
    TrivialInfeasible(usize),
    /// Objective on free variables not representable by the rows.
    DualInfeasible,
}

pub(crate) fn presolve(p: &SdpProblem) -> Result<Presolved, SdpError> {
    p.validate()?;
    let m_orig = p.constraints.len();
    let nb = p.block_dims.len();
    let mut kept = Vec::new();
    let mut scale = Vec::new();
    for (i, row) in p.constraints.iter().enumerate() {
        let nrm2: f64 = row.blocks.iter().map(|(_, a)| a.frob_sq()).sum::<f64>()
            + row.free.iter().map(|(_, v)| v * v).sum::<f64>();
        if nrm2 == 0.0 {
            if row.rhs.abs() > 1e-12 {
                return Ok(Presolved::TrivialInfeasible(i));
            }
            continue;
        }
        kept.push(i);
        scale.push(nrm2.sqrt());
    }
    let m = kept.len();
    let mut block_rows: Vec<Vec<(usize, Entries)>> = vec![Vec::new(); nb];
    let mut b_rows = DVector::zeros(m);
    let mut bmat = DMatrix::zeros(m, p.num_free);
    for (k, &i) in kept.iter().enumerate() {
        let row = &p.constraints[i];
        let s = 1.0 / scale[k];
        b_rows[k] = row.rhs * s;
        for (j, a) in &row.blocks {
            let mut a = a.clone();
            a.compress();
            if a.is_empty() {
                continue;
            }
            let e: Entries = a.entries().iter().map(|&(x, y, v)| (x, y, v * s)).collect();
            block_rows[*j].push((k, e));
        }
        for &(l, v) in &row.free {
            bmat[(k, l)] += v * s;
        }
    }
    for br in &mut block_rows {
        // merge repeated (row, block) pairs
        br.sort_by_key(|(k, _)| *k);
        let mut merged: Vec<(usize, Entries)> = Vec::new();
        for (k, e) in br.drain(..) {
            match merged.last_mut() {
                Some((lk, le)) if *lk == k => le.extend(e),
                _ => merged.push((k, e)),
            }
        }
        *br = merged;
    }
    let cu = DVector::from_vec(p.free_objective.clone());
    let mut w = DVector::zeros(m);
    let mut obj_offset = 0.0;
    let (mut proj, free) = if p.num_free > 0 && m > 0 {
        let qr = PivotedQr::new(&bmat, 1e-11);
        let r = qr.rank;
        if r > 0 {
            // w = Q [R11^{-T} (P^T c_u)[..r]; 0] so that B^T w = c_u
            let pc: Vec<f64> = qr.perm.iter().map(|&j| cu[j]).collect();
            let r11 = qr.r11();
            let head = DVector::from_column_slice(&pc[..r]);
            let t = r11
                .transpose()
                .solve_lower_triangular(&head)
                .ok_or(SdpError::Numerical("singular free-variable factor".into()))?;
            let mut full = DVector::zeros(m);
            full.rows_mut(0, r).copy_from(&t);
            w = qr.q_mul(&full);
        }
        let resid = (bmat.tr_mul(&w) - &cu).norm();
        if resid > 1e-9 * (1.0 + cu.norm()) {
            return Ok(Presolved::DualInfeasible);
        }
        obj_offset = w.dot(&b_rows);
        let q2 = qr.complement();
        (Projection::Dense(q2), Some(FreeElim { qr }))
    } else {
        if p.num_free > 0 && cu.norm() > 0.0 {
            return Ok(Presolved::DualInfeasible);
        }
        (Projection::Identity, None)
    };
    let dims = p.block_dims.clone();
    let mut red = Reduced {
        dims,
        m_orig,
        kept,
        scale,
        block_rows,
        proj: Projection::Identity,
        mbar: 0,
        b_rows,
        b: DVector::zeros(0),
        c: Vec::new(),
        w,
        obj_offset,
        free,
        num_free: p.num_free,
    };
    // Objective C' = C - A^*(w).
    let aw = red.adjoint_rows(&red.w);
    red.c = p
        .objective
        .iter()
        .zip(aw)
        .map(|(cj, awj)| {
            let mut d = cj.to_dense();
            d -= awj;
            d
        })
        .collect();
    // Drop rows that are dependent after projection.
    let gram = red.schur_rows(None);
    let gbar = proj.congruence(gram);
    let keep = independent_subset(&gbar, 1e-12);
    if keep.len() < gbar.nrows() {
        let base = match &proj {
            Projection::Identity => DMatrix::identity(m, m),
            Projection::Dense(q) => q.clone(),
        };
        proj = Projection::Dense(base.select_columns(keep.iter()));
    }
    red.mbar = match &proj {
        Projection::Identity => m,
        Projection::Dense(q) => q.ncols(),
    };
    red.b = proj.reduce(&red.b_rows);
    red.proj = proj;
    Ok(Presolved::Ready(red))
}

impl Reduced {
    fn a_rows(&self, x: &[DMatrix<f64>]) -> DVector<f64> {
        let m = self.kept.len();
        let mut out = DVector::zeros(m);
        for (j, rows) in self.block_rows.iter().enumerate() {
            let xj = &x[j];
            for (k, e) in rows {
                let mut s = 0.0;
                for &(a, b, v) in e {
                    s += if a == b { v * xj[(a, a)] } else { 2.0 * v * xj[(a, b)] };
                }
                out[*k] += s;
            }
        }
        out
    }

    fn adjoint_rows(&self, v: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> =
            self.dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
        for (j, rows) in self.block_rows.iter().enumerate() {
            let o = &mut out[j];
            for (k, e) in rows {
                let s = v[*k];
                if s == 0.0 {
                    continue;
                }
                for &(a, b, val) in e {
                    o[(a, b)] += s * val;
                    if a != b {
                        o[(b, a)] += s * val;
                    }
                }
            }
        }
        out
    }

    fn a_op(&self, x: &[DMatrix<f64>]) -> DVector<f64> {
        self.proj.reduce(&self.a_rows(x))
    }

    fn a_adj(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        self.adjoint_rows(&self.proj.lift(y))
    }

    /// `M_kl = sum_j tr(A_kj W_j A_lj W_j)` on compact rows; `W = I` when `None`.
    fn schur_rows(&self, w: Option<&[NtScaling]>) -> DMatrix<f64> {
        let m = self.kept.len();
        let mut mm = DMatrix::zeros(m, m);
        for (j, rows) in self.block_rows.iter().enumerate() {
            let s = self.dims[j];
            if rows.is_empty() {
                continue;
            }
            let wj = w.map(|w| &w[j].w);
            let mut p = vec![0.0; s * s];
            for (ri, (k, ek)) in rows.iter().enumerate() {
                p.iter_mut().for_each(|v| *v = 0.0);
                match wj {
                    Some(wm) => {
                        let ws = wm.as_slice();
                        for &(a, b, v) in ek {
                            let wa = &ws[a * s..(a + 1) * s];
                            let wb = &ws[b * s..(b + 1) * s];
                            // upper triangle of v (wa wb^T + wb wa^T), column-major
                            for d in 0..s {
                                let (xa, xb) = (v * wa[d], v * wb[d]);
                                let col = &mut p[d * s..d * s + d + 1];
                                if a == b {
                                    for (c, pc) in col.iter_mut().enumerate() {
                                        *pc += wa[c] * xa;
                                    }
                                } else {
                                    for (c, pc) in col.iter_mut().enumerate() {
                                        *pc += wa[c] * xb + wb[c] * xa;
                                    }
                                }
                            }
                        }
                    }
                    None => {
                        for &(a, b, v) in ek {
                            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                            p[hi * s + lo] += v;
                        }
                    }
                }
                for (k2, el) in rows.iter().skip(ri) {
                    let mut acc = 0.0;
                    for &(c, d, v) in el {
                        let pv = p[d * s + c];
                        acc += if c == d { v * pv } else { 2.0 * v * pv };
                    }
                    mm[(*k, *k2)] += acc;
                    if k != k2 {
                        mm[(*k2, *k)] += acc;
                    }
                }
            }
        }
        mm
    }

    fn dot_c(&self, x: &[DMatrix<f64>]) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| frob_dot(c, x)).sum()
    }

    /// Maps a reduced iterate back to the original problem.
    fn recover(&self, x: &[DMatrix<f64>], y: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let y_rows = self.proj.lift(y) + &self.w;
        let mut y_orig = DVector::zeros(self.m_orig);
        for (k, &i) in self.kept.iter().enumerate() {
            y_orig[i] = y_rows[k] / self.scale[k];
        }
        let mut u = DVector::zeros(self.num_free);
        if let Some(fe) = &self.free {
            let r = fe.qr.rank;
            if r > 0 {
                let resid = &self.b_rows - self.a_rows(x);
                let qt = fe.qr.qt_mul(&resid);
                let head = qt.rows(0, r).clone_owned();
                if let Some(t) = fe.qr.r11().solve_upper_triangular(&head) {
                    for k in 0..r {
                        u[fe.qr.perm[k]] = t[k];
                    }
                }
            }
        }
        (y_orig, u)
    }
}

fn block_dot(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| frob_dot(x, y)).sum()
}

fn block_norm(a: &[DMatrix<f64>]) -> f64 {
    a.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt()
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dy: DVector<f64>,
    dz: Vec<DMatrix<f64>>,
}

pub(crate) fn run(red: &Reduced, opts: &SolverOptions) -> Result<Solution, SdpError> {
    let nb = red.dims.len();
    let n: usize = red.dims.iter().sum::<usize>().max(1);
    let bnorm = red.b.norm();
    let cnorm = block_norm(&red.c);
    let xi = 10f64.max((n as f64).sqrt()).max(n as f64 * red.b.amax().max(1.0) / 10.0);
    let eta = 10f64.max((n as f64).sqrt()).max(1.0 + cnorm);
    let mut x: Vec<DMatrix<f64>> = red.dims.iter().map(|&d| DMatrix::identity(d, d) * xi).collect();
    let mut z: Vec<DMatrix<f64>> = red.dims.iter().map(|&d| DMatrix::identity(d, d) * eta).collect();
    let mut y = DVector::zeros(red.mbar);
    let mut history = Vec::new();
    let mut status = Status::MaxIterations;
    let mut stalls = 0;
    let mut best: Option<(f64, Vec<DMatrix<f64>>, DVector<f64>, Vec<DMatrix<f64>>)> = None;
    for iter in 0..opts.max_iter {
        let rp = &red.b - red.a_op(&x);
        let aty = red.a_adj(&y);
        let rd: Vec<DMatrix<f64>> = (0..nb).map(|j| &red.c[j] - &z[j] - &aty[j]).collect();
        let pobj = red.dot_c(&x) + red.obj_offset;
        let dobj = red.b.dot(&y) + red.obj_offset;
        let pinf = rp.norm() / (1.0 + bnorm);
        let dinf = block_norm(&rd) / (1.0 + cnorm);
        let gap = block_dot(&x, &z);
        let mu = gap / n as f64;
        let relgap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let info = IterInfo {
            iter,
            primal_obj: pobj,
            dual_obj: dobj,
            complementarity: gap,
            primal_infeas: pinf,
            dual_infeas: dinf,
            step_primal: 0.0,
            step_dual: 0.0,
        };
        let merit = pinf.max(dinf).max(relgap);
        if best.as_ref().map_or(true, |b| merit < b.0) {
            best = Some((merit, x.clone(), y.clone(), z.clone()));
        }
        if relgap <= opts.gap_tol && pinf <= opts.feas_tol && dinf <= opts.feas_tol {
            history.push(info);
            status = Status::Optimal;
            break;
        }
        // Divergence of the dual objective with small dual residual signals
        // primal infeasibility; the caller confirms it with a certificate.
        if dobj > opts.divergence && dinf <= 1e-6 {
            history.push(info);
            status = Status::SuspectedInfeasible;
            break;
        }
        if -pobj > opts.divergence && pinf <= 1e-6 {
            history.push(info);
            status = Status::Unbounded;
            break;
        }
        let scal: Option<Vec<NtScaling>> = (0..nb).map(|j| nt_scaling(&x[j], &z[j])).collect();
        let Some(scal) = scal else {
            history.push(info);
            status = Status::NumericalTrouble;
            break;
        };
        let mut mbar = red.proj.congruence(red.schur_rows(Some(&scal)));
        symmetrize(&mut mbar);
        let diag_max = (0..mbar.nrows()).map(|i| mbar[(i, i)]).fold(0.0, f64::max);
        let chol = if !diag_max.is_finite() || mbar.iter().any(|v| !v.is_finite()) {
            None
        } else {
            let mut reg = 0.0;
            loop {
                let mut mr = mbar.clone();
                for i in 0..mr.nrows() {
                    mr[(i, i)] += reg;
                }
                if let Some(c) = mr.cholesky() {
                    break Some(c);
                }
                reg = if reg == 0.0 { 1e-14 * diag_max.max(1e-300) } else { reg * 100.0 };
                if reg > 1e-6 * diag_max.max(1.0) {
                    break None;
                }
            }
        };
        let Some(chol) = chol else {
            history.push(info);
            status = Status::NumericalTrouble;
            break;
        };
        // W Rd W per block, reused by both solves.
        let wrdw: Vec<DMatrix<f64>> = (0..nb).map(|j| &scal[j].w * &rd[j] * &scal[j].w).collect();
        let solve = |h: &[DMatrix<f64>]| -> Direction {
            let ghg: Vec<DMatrix<f64>> = (0..nb)
                .map(|j| &scal[j].g * &h[j] * scal[j].g.transpose())
                .collect();
            let t: Vec<DMatrix<f64>> = (0..nb).map(|j| &ghg[j] - &wrdw[j]).collect();
            let rhs = &rp - red.a_op(&t);
            let dy = chol.solve(&rhs);
            let atdy = red.a_adj(&dy);
            let dz: Vec<DMatrix<f64>> = (0..nb).map(|j| &rd[j] - &atdy[j]).collect();
            let dx: Vec<DMatrix<f64>> = (0..nb)
                .map(|j| {
                    let mut d = &ghg[j] - &scal[j].w * &dz[j] * &scal[j].w;
                    symmetrize(&mut d);
                    d
                })
                .collect();
            Direction { dx, dy, dz }
        };
        let steps = |dir: &Direction| -> (f64, f64) {
            let mut ap = f64::INFINITY;
            let mut ad = f64::INFINITY;
            for j in 0..nb {
                let s = &scal[j];
                let dxt = &s.ginv * &dir.dx[j] * s.ginv.transpose();
                let dzt = s.g.transpose() * &dir.dz[j] * &s.g;
                ap = ap.min(max_step_scaled(&s.d, &dxt));
                ad = ad.min(max_step_scaled(&s.d, &dzt));
            }
            (ap, ad)
        };
        // Predictor: target mu = 0.
        let h_aff: Vec<DMatrix<f64>> = (0..nb).map(|j| -DMatrix::from_diagonal(&scal[j].d)).collect();
        let aff = solve(&h_aff);
        let (ap_a, ad_a) = steps(&aff);
        let (ap_a, ad_a) = (ap_a.min(1.0), ad_a.min(1.0));
        let mut gap_aff = 0.0;
        for j in 0..nb {
            let xa = &x[j] + &aff.dx[j] * ap_a;
            let za = &z[j] + &aff.dz[j] * ad_a;
            gap_aff += frob_dot(&xa, &za);
        }
        let mu_aff = gap_aff / n as f64;
        let sigma = if mu > 0.0 { (mu_aff / mu).clamp(0.0, 1.0).powi(3) } else { 0.0 };
        // Corrector with second-order term.
        let h_cor: Vec<DMatrix<f64>> = (0..nb)
            .map(|j| {
                let s = &scal[j];
                let dxt = &s.ginv * &aff.dx[j] * s.ginv.transpose();
                let dzt = s.g.transpose() * &aff.dz[j] * &s.g;
                let prod = &dxt * &dzt;
                let dim = s.d.len();
                let mut h = DMatrix::zeros(dim, dim);
                for a in 0..dim {
                    for b in 0..dim {
                        let mut rc = -0.5 * (prod[(a, b)] + prod[(b, a)]);
                        if a == b {
                            rc += sigma * mu - s.d[a] * s.d[a];
                        }
                        h[(a, b)] = 2.0 * rc / (s.d[a] + s.d[b]);
                    }
                }
                h
            })
            .collect();
        let dir = solve(&h_cor);
        let (ap, ad) = steps(&dir);
        let gamma = (0.9 + 0.09 * ap_a.min(ad_a)).min(opts.max_step_fraction);
        let ap = (gamma * ap).min(1.0);
        let ad = (gamma * ad).min(1.0);
        for j in 0..nb {
            x[j] += &dir.dx[j] * ap;
            symmetrize(&mut x[j]);
            z[j] += &dir.dz[j] * ad;
            symmetrize(&mut z[j]);
        }
        y += &dir.dy * ad;
        history.push(IterInfo {
            step_primal: ap,
            step_dual: ad,
            ..info
        });
        if ap.max(ad) < 1e-9 {
            stalls += 1;
            if stalls >= 3 {
                status = Status::NumericalTrouble;
                break;
            }
        } else {
            stalls = 0;
        }
    }
    // Fall back to the most accurate iterate when the run did not converge.
    if !matches!(status, Status::Optimal) {
        if let Some((merit, bx, by, bz)) = best {
            if merit <= opts.loose_tol {
                x = bx;
                y = by;
                z = bz;
                if matches!(status, Status::MaxIterations | Status::NumericalTrouble) {
                    status = Status::NearOptimal;
                }
            }
        }
    }
    let pobj = red.dot_c(&x) + red.obj_offset;
    let dobj = red.b.dot(&y) + red.obj_offset;
    let (y_orig, u) = red.recover(&x, &y);
    Ok(Solution {
        status,
        x,
        z,
        y: y_orig,
        u,
        primal_obj: pobj,
        dual_obj: dobj,
        iterations: history.len(),
        history,
        witness: None,
    })
}
