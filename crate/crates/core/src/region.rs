//! Sublevel sets of certified Lyapunov functions inside the analysis domain:
//! the largest admissible level, forward-invariance sampling and 2-D
//! boundary extraction.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::poly::{Polynomial, SemialgebraicSet};
use crate::sim::sphere_ics;

/// Directions cast per constraint surface.
pub const BOUNDARY_SAMPLES: usize = 10_000;
/// Shrink applied to the sampled minimum of `V` on the domain boundary.
pub const LEVEL_SHRINK: f64 = 0.999;
const SEARCH_LIMIT: f64 = 1e6;
const SCAN_STEPS: usize = 256;
const DIRECTION_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegionError {
    #[error("domain is unbounded along {direction:?}")]
    Unbounded { direction: Vec<f64> },
    #[error("no boundary point of the domain was found")]
    NoBoundary,
    #[error("V is not positive inside the domain at {point:?}")]
    NotPositive { point: Vec<f64> },
    #[error("level set {c} is not crossed within radius {limit}")]
    LevelNotCrossed { c: f64, limit: f64 },
    #[error("boundary extraction needs 2 variables, found {0}")]
    NotPlanar(usize),
}

/// A certified sublevel set and, in the plane, its boundary.
#[derive(Clone, Debug, Serialize)]
pub struct RegionResult {
    pub c_star: f64,
    pub v: Polynomial,
    pub domain: SemialgebraicSet,
    /// Closed polyline; empty unless `n = 2`.
    pub boundary: Vec<[f64; 2]>,
    pub invariance: Option<InvarianceReport>,
}

impl RegionResult {
    pub fn invariance_checked(&self) -> bool {
        self.invariance.as_ref().is_some_and(|r| r.passed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub samples: usize,
    pub passed: bool,
    /// Largest `grad V . f / scale` on the sampled level surface.
    pub worst: f64,
    pub worst_point: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NestingReport {
    pub samples: usize,
    pub violations: usize,
    /// Largest `V_outer(x) / c_outer` over samples of the inner set.
    pub worst_ratio: f64,
}

impl NestingReport {
    pub fn nested(&self) -> bool {
        self.violations == 0
    }
}

fn directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    sphere_ics(n, count, 1.0, DIRECTION_SEED)
}

fn scaled(u: &[f64], rho: f64) -> Vec<f64> {
    u.iter().map(|v| v * rho).collect()
}

/// First `rho` in `(0, limit]` where `g(rho)` turns negative, assuming
/// `g(0) >= 0`; linear scan then bisection.
fn first_exit(g: impl Fn(f64) -> f64, limit: f64, steps: usize) -> Option<f64> {
    let h = limit / steps as f64;
    let mut prev = 0.0;
    for j in 1..=steps {
        let rho = h * j as f64;
        if g(rho) < 0.0 {
            return Some(bisect_sign(&g, prev, rho));
        }
        prev = rho;
    }
    None
}

/// Root of `g` in `[a, b]` with `g(a) >= 0 > g(b)`.
fn bisect_sign(g: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if g(m) < 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    a
}

/// Largest distance from the origin to the domain boundary over a set of
/// directions. The domain must be star-shaped about the origin.
pub fn domain_radius(domain: &SemialgebraicSet) -> Result<f64, RegionError> {
    let n = domain.nvars();
    let mut best: f64 = 0.0;
    for u in directions(n, 2_000) {
        let m = |rho: f64| domain.margin(&scaled(&u, rho));
        let mut hi = 1e-3;
        while m(hi) >= 0.0 {
            hi *= 2.0;
            if hi > SEARCH_LIMIT {
                return Err(RegionError::Unbounded { direction: u });
            }
        }
        best = best.max(bisect_sign(&m, 0.0, hi));
    }
    Ok(best)
}

/// Boundary point of `domain` along `u` on constraint `j`, when that
/// constraint is the first one to fail.
fn boundary_point(domain: &SemialgebraicSet, j: usize, u: &[f64], limit: f64) -> Option<Vec<f64>> {
    let g = &domain.constraints()[j];
    let rho = first_exit(|r| g.eval(&scaled(u, r)), limit, SCAN_STEPS)?;
    let x = scaled(u, rho);
    let tol = 1e-9 * domain.constraints().iter().map(Polynomial::max_abs_coeff).fold(1.0, f64::max);
    (domain.margin(&x) >= -tol).then_some(x)
}

/// Largest `c` with `{V <= c}` inside the domain's interior: `0.999` times the
/// minimum of `V` over boundary samples of every constraint, refined by a
/// pattern search on the direction.
pub fn max_sublevel(v: &Polynomial, domain: &SemialgebraicSet) -> Result<f64, RegionError> {
    let n = domain.nvars();
    let limit = 1.01 * domain_radius(domain)?;
    let dirs = directions(n, BOUNDARY_SAMPLES);
    let mut best = f64::INFINITY;
    for j in 0..domain.constraints().len() {
        let mut cands: Vec<(f64, Vec<f64>)> = Vec::new();
        for u in &dirs {
            if let Some(x) = boundary_point(domain, j, u, limit) {
                let val = v.eval(&x);
                if val <= 0.0 {
                    return Err(RegionError::NotPositive { point: x });
                }
                cands.push((val, u.clone()));
            }
        }
        cands.sort_by(|a, b| a.0.total_cmp(&b.0));
        let spacing = if n == 1 { 0.0 } else { (1.0 / dirs.len() as f64).powf(1.0 / (n - 1) as f64) };
        for (val, u) in cands.into_iter().take(4) {
            best = best.min(refine(v, domain, j, u, val, 2.0 * spacing, limit));
        }
    }
    if !best.is_finite() {
        return Err(RegionError::NoBoundary);
    }
    Ok(LEVEL_SHRINK * best)
}

fn refine(
    v: &Polynomial,
    domain: &SemialgebraicSet,
    j: usize,
    mut u: Vec<f64>,
    mut val: f64,
    mut step: f64,
    limit: f64,
) -> f64 {
    let n = u.len();
    while step > 1e-10 {
        let mut improved = false;
        for i in 0..n {
            for s in [step, -step] {
                let mut w = u.clone();
                w[i] += s;
                let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                w.iter_mut().for_each(|x| *x /= norm);
                if let Some(x) = boundary_point(domain, j, &w, limit) {
                    let cand = v.eval(&x);
                    if cand < val {
                        val = cand;
                        u = w;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    val
}

/// First crossing of `V = c` along `u`, or `None` when `V < c` out to the
/// search limit.
fn level_crossing(v: &Polynomial, c: f64, u: &[f64]) -> Option<f64> {
    let g = |r: f64| c - v.eval(&scaled(u, r));
    let mut hi = 1e-3;
    while g(hi) >= 0.0 {
        hi *= 2.0;
        if hi > SEARCH_LIMIT {
            return None;
        }
    }
    first_exit(g, hi, SCAN_STEPS)
}

/// Samples the level surface `V = c` along `samples` rays and checks
/// `grad V . f <= 1e-6 max(1, ||grad V|| ||f||)`.
pub fn check_invariance(v: &Polynomial, c: f64, field: &[Polynomial], samples: usize) -> InvarianceReport {
    let n = v.nvars();
    let mut out = InvarianceReport {
        samples: 0,
        passed: true,
        worst: f64::NEG_INFINITY,
        worst_point: vec![0.0; n],
    };
    for u in directions(n, samples) {
        let Some(rho) = level_crossing(v, c, &u) else {
            continue;
        };
        let x = scaled(&u, rho);
        let grad = v.eval_gradient(&x);
        let f: Vec<f64> = field.iter().map(|p| p.eval(&x)).collect();
        let dot: f64 = grad.iter().zip(&f).map(|(a, b)| a * b).sum();
        let ng = grad.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nf = f.iter().map(|a| a * a).sum::<f64>().sqrt();
        let rel = dot / (ng * nf).max(1.0);
        out.samples += 1;
        if rel > out.worst {
            out.worst = rel;
            out.worst_point = x;
        }
    }
    out.passed = out.samples > 0 && out.worst <= 1e-6;
    out
}

/// Closed polyline of `V = c` in the plane by polar ray casting, falling
/// back to marching squares when a ray misses the level set.
pub fn boundary_2d(v: &Polynomial, c: f64, resolution: usize) -> Result<Vec<[f64; 2]>, RegionError> {
    if v.nvars() != 2 {
        return Err(RegionError::NotPlanar(v.nvars()));
    }
    let mut pts = Vec::with_capacity(resolution);
    for j in 0..resolution {
        let th = std::f64::consts::TAU * j as f64 / resolution as f64;
        let u = [th.cos(), th.sin()];
        match level_crossing(v, c, &u) {
            Some(r) => pts.push([r * u[0], r * u[1]]),
            None => return marching_squares(v, c, resolution),
        }
    }
    Ok(pts)
}

fn marching_squares(v: &Polynomial, c: f64, resolution: usize) -> Result<Vec<[f64; 2]>, RegionError> {
    // Box from the rays that do cross.
    let mut b: f64 = 0.0;
    for j in 0..64 {
        let th = std::f64::consts::TAU * j as f64 / 64.0;
        if let Some(r) = level_crossing(v, c, &[th.cos(), th.sin()]) {
            b = b.max(r);
        }
    }
    if b == 0.0 {
        return Err(RegionError::LevelNotCrossed { c, limit: SEARCH_LIMIT });
    }
    let b = 1.5 * b;
    let m = resolution.clamp(64, 400);
    let h = 2.0 * b / m as f64;
    let xy = |i: usize, j: usize| [-b + h * i as f64, -b + h * j as f64];
    let mut val = vec![vec![0.0; m + 1]; m + 1];
    for (i, row) in val.iter_mut().enumerate() {
        for (j, s) in row.iter_mut().enumerate() {
            *s = v.eval(&xy(i, j)) - c;
        }
    }
    // Edge ids: horizontal (i, j)-(i+1, j) and vertical (i, j)-(i, j+1).
    let point_on = |e: (usize, usize, bool)| {
        let (i, j, horiz) = e;
        let (i2, j2) = if horiz { (i + 1, j) } else { (i, j + 1) };
        let (a, bb) = (val[i][j], val[i2][j2]);
        let t = if a == bb { 0.5 } else { a / (a - bb) };
        let p = xy(i, j);
        let q = xy(i2, j2);
        [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
    };
    let mut adj: HashMap<(usize, usize, bool), Vec<(usize, usize, bool)>> = HashMap::new();
    for i in 0..m {
        for j in 0..m {
            let edges = [(i, j, true), (i + 1, j, false), (i, j + 1, true), (i, j, false)];
            let ends = [
                ((i, j), (i + 1, j)),
                ((i + 1, j), (i + 1, j + 1)),
                ((i, j + 1), (i + 1, j + 1)),
                ((i, j), (i, j + 1)),
            ];
            let crossed: Vec<_> = edges
                .iter()
                .zip(ends)
                .filter(|(_, (p, q))| (val[p.0][p.1] < 0.0) != (val[q.0][q.1] < 0.0))
                .map(|(e, _)| *e)
                .collect();
            let pairs: Vec<(usize, usize)> = match crossed.len() {
                2 => vec![(0, 1)],
                // Saddle cell: pair by the sign of the center value.
                4 => {
                    let center = v.eval(&[-b + h * (i as f64 + 0.5), -b + h * (j as f64 + 0.5)]) - c;
                    if (center < 0.0) == (val[i][j] < 0.0) {
                        vec![(0, 1), (2, 3)]
                    } else {
                        vec![(0, 3), (1, 2)]
                    }
                }
                _ => vec![],
            };
            for (a, bidx) in pairs {
                adj.entry(crossed[a]).or_default().push(crossed[bidx]);
                adj.entry(crossed[bidx]).or_default().push(crossed[a]);
            }
        }
    }
    // Chain segments into loops and keep the longest.
    let mut seen = std::collections::HashSet::new();
    let mut keys: Vec<_> = adj.keys().copied().collect();
    keys.sort();
    let mut best: Vec<[f64; 2]> = Vec::new();
    for start in keys {
        if seen.contains(&start) {
            continue;
        }
        let mut chain = vec![start];
        seen.insert(start);
        let mut cur = start;
        while let Some(next) = adj[&cur].iter().find(|e| !seen.contains(*e)).copied() {
            seen.insert(next);
            chain.push(next);
            cur = next;
        }
        if chain.len() > best.len() {
            best = chain.into_iter().map(point_on).collect();
        }
    }
    if best.is_empty() {
        return Err(RegionError::LevelNotCrossed { c, limit: b });
    }
    Ok(best)
}

/// Samples `{V_inner <= c_inner}` by ray casting and counts points with
/// `V_outer > c_outer (1 + 1e-6)`.
pub fn check_nesting(
    inner: (&Polynomial, f64),
    outer: (&Polynomial, f64),
    samples: usize,
    seed: u64,
) -> NestingReport {
    let n = inner.0.nvars();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = NestingReport {
        samples: 0,
        violations: 0,
        worst_ratio: 0.0,
    };
    for u in sphere_ics(n, samples, 1.0, seed) {
        let Some(rho) = level_crossing(inner.0, inner.1, &u) else {
            continue;
        };
        let s: f64 = if rng.gen_bool(0.5) { 1.0 } else { rng.gen() };
        let x = scaled(&u, rho * s);
        let ratio = outer.0.eval(&x) / outer.1;
        out.samples += 1;
        out.worst_ratio = out.worst_ratio.max(ratio);
        if ratio > 1.0 + 1e-6 {
            out.violations += 1;
        }
    }
    out
}

/// The region of `v` in `domain`, with its boundary when planar and an
/// invariance check against `field`.
pub fn analyze_region(
    v: &Polynomial,
    domain: &SemialgebraicSet,
    field: Option<&[Polynomial]>,
    resolution: usize,
) -> Result<RegionResult, RegionError> {
    let c_star = max_sublevel(v, domain)?;
    let boundary = if v.nvars() == 2 {
        boundary_2d(v, c_star, resolution)?
    } else {
        Vec::new()
    };
    let invariance = field.map(|f| check_invariance(v, c_star, f, 2_000));
    Ok(RegionResult {
        c_star,
        v: v.clone(),
        domain: domain.clone(),
        boundary,
        invariance,
    })
}
