use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub(crate) fn frob_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    let mut s = m.clone();
    symmetrize(&mut s);
    s.symmetric_eigenvalues().min()
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    -min_eigenvalue(&(-m))
}

pub(crate) fn cholesky_lower(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    Cholesky::new(m.clone()).map(|c| c.unpack())
}

pub(crate) fn lower_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    l.solve_lower_triangular(&DMatrix::identity(n, n))
        .expect("triangular factor with zero diagonal")
}

/// Nesterov-Todd scaling of one block: `W = G G^T` with `W Z W = X`,
/// `G^{-1} X G^{-T} = G^T Z G = diag(d)`.
pub(crate) struct NtScaling {
    pub g: DMatrix<f64>,
    pub ginv: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub d: DVector<f64>,
}

pub(crate) fn nt_scaling(x: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<NtScaling> {
    let l = cholesky_lower(x)?;
    let mut t = l.transpose() * z * &l;
    symmetrize(&mut t);
    let eig = SymmetricEigen::new(t);
    let lam = eig.eigenvalues;
    if lam.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return None;
    }
    let q = eig.eigenvectors;
    let n = x.nrows();
    let mut g = &l * &q;
    let mut ginv = q.transpose() * lower_inverse(&l);
    for k in 0..n {
        let s = lam[k].powf(-0.25);
        g.column_mut(k).scale_mut(s);
        ginv.row_mut(k).scale_mut(1.0 / s);
    }
    let mut w = &g * g.transpose();
    symmetrize(&mut w);
    let d = lam.map(f64::sqrt);
    Some(NtScaling { g, ginv, w, d })
}

/// Largest `alpha` with `diag(d) + alpha * s >= 0` (infinite if none binds).
pub(crate) fn max_step_scaled(d: &DVector<f64>, s: &DMatrix<f64>) -> f64 {
    let n = d.len();
    let mut t = s.clone();
    for i in 0..n {
        for j in 0..n {
            t[(i, j)] /= (d[i] * d[j]).sqrt();
        }
    }
    let lmin = min_eigenvalue(&t);
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

/// Householder QR with column pivoting, kept in factored form.
pub(crate) struct PivotedQr {
    m: usize,
    pub rank: usize,
    pub perm: Vec<usize>,
    /// Reflectors `I - beta v v^T`, `v` padded with leading zeros.
    refl: Vec<(DVector<f64>, f64)>,
    pub r: DMatrix<f64>,
}

impl PivotedQr {
    pub fn new(b: &DMatrix<f64>, rel_tol: f64) -> Self {
        let (m, n) = b.shape();
        let mut a = b.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut refl = Vec::new();
        let mut rank = 0;
        let mut first = 0.0;
        for k in 0..m.min(n) {
            let (mut best, mut p) = (-1.0, k);
            for j in k..n {
                let nrm = a.view((k, j), (m - k, 1)).norm();
                if nrm > best {
                    best = nrm;
                    p = j;
                }
            }
            if k == 0 {
                first = best;
            }
            if best <= rel_tol * first || best == 0.0 {
                break;
            }
            a.swap_columns(k, p);
            perm.swap(k, p);
            let alpha = if a[(k, k)] >= 0.0 { -best } else { best };
            let mut v = DVector::zeros(m);
            for i in k..m {
                v[i] = a[(i, k)];
            }
            v[k] -= alpha;
            let vnorm2 = v.norm_squared();
            let beta = if vnorm2 > 0.0 { 2.0 / vnorm2 } else { 0.0 };
            // a <- (I - beta v v^T) a on columns k..n
            for j in k..n {
                let mut s = 0.0;
                for i in k..m {
                    s += v[i] * a[(i, j)];
                }
                s *= beta;
                for i in k..m {
                    a[(i, j)] -= s * v[i];
                }
            }
            refl.push((v, beta));
            rank += 1;
        }
        PivotedQr {
            m,
            rank,
            perm,
            refl,
            r: a,
        }
    }

    fn apply_h(&self, k: usize, x: &mut DVector<f64>) {
        let (v, beta) = &self.refl[k];
        let s = beta * v.dot(x);
        x.axpy(-s, v, 1.0);
    }

    /// `Q^T x`.
    pub fn qt_mul(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = x.clone();
        for k in 0..self.refl.len() {
            self.apply_h(k, &mut y);
        }
        y
    }

    /// `Q x`.
    pub fn q_mul(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = x.clone();
        for k in (0..self.refl.len()).rev() {
            self.apply_h(k, &mut y);
        }
        y
    }

    /// Orthonormal basis of the orthogonal complement of the column space.
    pub fn complement(&self) -> DMatrix<f64> {
        let m = self.m;
        let r = self.rank;
        let mut out = DMatrix::zeros(m, m - r);
        for c in 0..(m - r) {
            let mut e = DVector::zeros(m);
            e[r + c] = 1.0;
            out.set_column(c, &self.q_mul(&e));
        }
        out
    }

    pub fn r11(&self) -> DMatrix<f64> {
        self.r.view((0, 0), (self.rank, self.rank)).upper_triangle()
    }
}

/// Pivoted Cholesky rank revealing: indices of a maximal well-conditioned
/// independent subset of rows/columns of a PSD matrix, in increasing order.
pub(crate) fn independent_subset(g: &DMatrix<f64>, rel_tol: f64) -> Vec<usize> {
    let n = g.nrows();
    let mut a = g.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let maxdiag = (0..n).map(|i| g[(i, i)]).fold(0.0, f64::max);
    let mut chosen = Vec::new();
    for k in 0..n {
        let (mut best, mut p) = (f64::NEG_INFINITY, k);
        for j in k..n {
            if a[(j, j)] > best {
                best = a[(j, j)];
                p = j;
            }
        }
        if best <= rel_tol * maxdiag || best <= 0.0 {
            break;
        }
        a.swap_rows(k, p);
        a.swap_columns(k, p);
        perm.swap(k, p);
        let piv = a[(k, k)].sqrt();
        a[(k, k)] = piv;
        for i in (k + 1)..n {
            a[(i, k)] /= piv;
        }
        for j in (k + 1)..n {
            let ljk = a[(j, k)];
            for i in j..n {
                let v = a[(i, k)] * ljk;
                a[(i, j)] -= v;
            }
        }
        for j in (k + 1)..n {
            for i in j..n {
                a[(j, i)] = a[(i, j)];
            }
        }
        chosen.push(perm[k]);
    }
    chosen.sort_unstable();
    chosen
}
