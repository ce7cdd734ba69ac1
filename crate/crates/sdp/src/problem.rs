use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::SdpError;

/// Sparse symmetric matrix stored as its upper triangle. An entry `(i, j, v)`
/// with `i < j` stands for both `A[i][j]` and `A[j][i]`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseSym {
    pub dim: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    pub fn new(dim: usize) -> Self {
        SparseSym {
            dim,
            entries: Vec::new(),
        }
    }

    /// Adds `v` at `(i, j)` and, by symmetry, at `(j, i)`.
    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.entries.push((a, b, v));
    }

    /// Merges duplicate coordinates and drops zeros.
    pub fn compress(&mut self) {
        self.entries.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(self.entries.len());
        for &(i, j, v) in &self.entries {
            match out.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => out.push((i, j, v)),
            }
        }
        out.retain(|e| e.2 != 0.0);
        self.entries = out;
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Frobenius inner product with a dense symmetric matrix.
    pub fn dot(&self, x: &DMatrix<f64>) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| if i == j { v * x[(i, i)] } else { 2.0 * v * x[(i, j)] })
            .sum()
    }

    pub fn add_to(&self, m: &mut DMatrix<f64>, s: f64) {
        for &(i, j, v) in &self.entries {
            m[(i, j)] += s * v;
            if i != j {
                m[(j, i)] += s * v;
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        self.add_to(&mut m, 1.0);
        m
    }

    pub fn frob_sq(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| if i == j { v * v } else { 2.0 * v * v })
            .sum()
    }

    pub fn trace(&self) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.0 == e.1)
            .map(|e| e.2)
            .sum()
    }
}

/// One equality row: `sum_j <A_j, X_j> + sum_l B_l u_l = rhs`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Constraint {
    pub blocks: Vec<(usize, SparseSym)>,
    pub free: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// `min sum_j <C_j, X_j> + c_u^T u` subject to equality rows, `X_j >= 0` (PSD)
/// and `u` free.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SdpProblem {
    pub block_dims: Vec<usize>,
    pub num_free: usize,
    pub objective: Vec<SparseSym>,
    pub free_objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl SdpProblem {
    pub fn new(block_dims: Vec<usize>, num_free: usize) -> Self {
        let objective = block_dims.iter().map(|&d| SparseSym::new(d)).collect();
        SdpProblem {
            block_dims,
            num_free,
            objective,
            free_objective: vec![0.0; num_free],
            constraints: Vec::new(),
        }
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Total order `n = sum_j dim_j` of the PSD cone.
    pub fn cone_order(&self) -> usize {
        self.block_dims.iter().sum()
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        let nb = self.block_dims.len();
        if self.objective.len() != nb {
            return Err(SdpError::Malformed("objective block count".into()));
        }
        if self.free_objective.len() != self.num_free {
            return Err(SdpError::Malformed("free objective length".into()));
        }
        let check_sym = |s: &SparseSym, j: usize, what: &str| -> Result<(), SdpError> {
            if s.dim != self.block_dims[j] {
                return Err(SdpError::Malformed(format!("{what}: block {j} has wrong size")));
            }
            for &(a, b, v) in s.entries() {
                if a >= s.dim || b >= s.dim || !v.is_finite() {
                    return Err(SdpError::Malformed(format!("{what}: bad entry in block {j}")));
                }
            }
            Ok(())
        };
        for (j, c) in self.objective.iter().enumerate() {
            check_sym(c, j, "objective")?;
        }
        if self.free_objective.iter().any(|v| !v.is_finite()) {
            return Err(SdpError::Malformed("free objective not finite".into()));
        }
        for (i, row) in self.constraints.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(SdpError::Malformed(format!("row {i}: rhs not finite")));
            }
            for (j, a) in &row.blocks {
                if *j >= nb {
                    return Err(SdpError::Malformed(format!("row {i}: block {j} out of range")));
                }
                check_sym(a, *j, &format!("row {i}"))?;
            }
            for &(l, v) in &row.free {
                if l >= self.num_free || !v.is_finite() {
                    return Err(SdpError::Malformed(format!("row {i}: bad free entry")));
                }
            }
        }
        Ok(())
    }

    /// Writes the problem in SDPA sparse format. Free variables are split as
    /// `u = u+ - u-` into a trailing diagonal block.
    pub fn to_sdpa(&self) -> String {
        let mut s = String::new();
        let m = self.constraints.len();
        let nfree = self.num_free;
        let mut nblocks = self.block_dims.len();
        if nfree > 0 {
            nblocks += 1;
        }
        let _ = writeln!(s, "{m}");
        let _ = writeln!(s, "{nblocks}");
        let mut dims: Vec<String> = self.block_dims.iter().map(|d| d.to_string()).collect();
        if nfree > 0 {
            dims.push(format!("-{}", 2 * nfree));
        }
        let _ = writeln!(s, "{}", dims.join(" "));
        let rhs: Vec<String> = self.constraints.iter().map(|r| format!("{:e}", r.rhs)).collect();
        let _ = writeln!(s, "{}", rhs.join(" "));
        let lp = self.block_dims.len() + 1;
        // F0 = -C
        for (j, c) in self.objective.iter().enumerate() {
            for &(a, b, v) in c.entries() {
                let _ = writeln!(s, "0 {} {} {} {:e}", j + 1, a + 1, b + 1, -v);
            }
        }
        for (l, &c) in self.free_objective.iter().enumerate() {
            if c != 0.0 {
                let _ = writeln!(s, "0 {lp} {} {} {:e}", l + 1, l + 1, -c);
                let _ = writeln!(s, "0 {lp} {} {} {:e}", nfree + l + 1, nfree + l + 1, c);
            }
        }
        for (i, row) in self.constraints.iter().enumerate() {
            for (j, a) in &row.blocks {
                for &(p, q, v) in a.entries() {
                    let _ = writeln!(s, "{} {} {} {} {:e}", i + 1, j + 1, p + 1, q + 1, v);
                }
            }
            for &(l, v) in &row.free {
                let _ = writeln!(s, "{} {lp} {} {} {:e}", i + 1, l + 1, l + 1, v);
                let _ = writeln!(s, "{} {lp} {} {} {:e}", i + 1, nfree + l + 1, nfree + l + 1, -v);
            }
        }
        s
    }

    /// Reads SDPA sparse format. Diagonal blocks are read as PSD blocks of
    /// the same order with diagonal data.
    pub fn from_sdpa(text: &str) -> Result<SdpProblem, SdpError> {
        let bad = |msg: &str| SdpError::Malformed(format!("sdpa: {msg}"));
        let mut lines = text
            .lines()
            .map(|l| l.trim())
            .filter(|l| !l.is_empty() && !l.starts_with('"') && !l.starts_with('*'));
        let clean = |l: &str| l.replace([',', '{', '}', '(', ')'], " ");
        let m: usize = clean(lines.next().ok_or_else(|| bad("missing m"))?)
            .split_whitespace()
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("m"))?;
        let nb: usize = clean(lines.next().ok_or_else(|| bad("missing nblocks"))?)
            .split_whitespace()
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("nblocks"))?;
        let dims: Vec<i64> = clean(lines.next().ok_or_else(|| bad("missing sizes"))?)
            .split_whitespace()
            .take(nb)
            .map(|t| t.parse::<i64>().map_err(|_| bad("size")))
            .collect::<Result<_, _>>()?;
        let rhs: Vec<f64> = clean(lines.next().ok_or_else(|| bad("missing rhs"))?)
            .split_whitespace()
            .take(m)
            .map(|t| t.parse::<f64>().map_err(|_| bad("rhs")))
            .collect::<Result<_, _>>()?;
        let block_dims: Vec<usize> = dims.iter().map(|d| d.unsigned_abs() as usize).collect();
        let mut p = SdpProblem::new(block_dims.clone(), 0);
        p.constraints = rhs
            .iter()
            .map(|&r| Constraint {
                blocks: Vec::new(),
                free: Vec::new(),
                rhs: r,
            })
            .collect();
        for line in lines {
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() < 5 {
                return Err(bad("entry line"));
            }
            let k: usize = t[0].parse().map_err(|_| bad("matno"))?;
            let j: usize = t[1].parse().map_err(|_| bad("blkno"))?;
            let a: usize = t[2].parse().map_err(|_| bad("i"))?;
            let b: usize = t[3].parse().map_err(|_| bad("j"))?;
            let v: f64 = t[4].parse().map_err(|_| bad("value"))?;
            if j == 0 || j > nb || a == 0 || b == 0 || k > m {
                return Err(bad("index out of range"));
            }
            if k == 0 {
                p.objective[j - 1].push(a - 1, b - 1, -v);
            } else {
                let row = &mut p.constraints[k - 1];
                match row.blocks.iter_mut().find(|(bj, _)| *bj == j - 1) {
                    Some((_, s)) => s.push(a - 1, b - 1, v),
                    None => {
                        let mut s = SparseSym::new(block_dims[j - 1]);
                        s.push(a - 1, b - 1, v);
                        row.blocks.push((j - 1, s));
                    }
                }
            }
        }
        for c in &mut p.objective {
            c.compress();
        }
        for r in &mut p.constraints {
            for (_, s) in &mut r.blocks {
                s.compress();
            }
        }
        p.validate()?;
        Ok(p)
    }
}
