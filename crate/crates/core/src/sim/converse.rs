use super::{integrate, settling_time, IntegrateOptions, Trajectory, VectorField};
use crate::beta::{AlphaMeasure, BetaFamily};

/// Sampling grid of [`converse_lf_sample`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConverseGrid {
    pub points: usize,
    /// Smallest positive grid time as a fraction of the horizon.
    pub t_min_frac: f64,
    pub refine_iters: usize,
}

impl Default for ConverseGrid {
    fn default() -> Self {
        ConverseGrid {
            points: 400,
            t_min_frac: 1e-6,
            refine_iters: 60,
        }
    }
}

/// Numerical converse Lyapunov function
/// `sup_t beta_neg(alpha1(x(t)), (1 - eps) k t)` on a log-spaced grid over
/// `[0, horizon]` (cut at the settling time for finite-time families), refined
/// once by golden-section search around the coarse argmax. Returns `+inf`
/// when the trajectory cannot be integrated.
#[allow(clippy::too_many_arguments)]
pub fn converse_lf_sample<F: VectorField + ?Sized>(
    field: &F,
    family: &BetaFamily,
    alpha1: &AlphaMeasure,
    epsilon: f64,
    k: f64,
    x: &[f64],
    horizon: f64,
    grid: &ConverseGrid,
) -> f64 {
    let opts = match family {
        BetaFamily::FiniteTime { .. } => {
            IntegrateOptions::finite_time(x.iter().fold(0.0, |m: f64, v| m.max(v.abs())))
        }
        _ => IntegrateOptions::relative(),
    };
    let Ok(traj) = integrate(field, x, horizon, &opts) else {
        return f64::INFINITY;
    };
    converse_from_trajectory(&traj, family, alpha1, epsilon, k, grid)
}

pub fn converse_from_trajectory(
    traj: &Trajectory,
    family: &BetaFamily,
    alpha1: &AlphaMeasure,
    epsilon: f64,
    k: f64,
    grid: &ConverseGrid,
) -> f64 {
    let mut t_stop = traj.t_end();
    if let BetaFamily::FiniteTime { .. } = family {
        if let Ok(ts) = settling_time(traj, alpha1, None) {
            t_stop = ts;
        }
    }
    let s = (1.0 - epsilon) * k;
    let g = |t: f64| family.beta_neg(alpha1.eval(&traj.state_at(t)), s * t);
    let mut times = vec![0.0];
    if t_stop > 0.0 && grid.points > 1 {
        let lo = (t_stop * grid.t_min_frac).ln();
        let hi = t_stop.ln();
        let m = grid.points - 1;
        times.extend((0..m).map(|j| (lo + (hi - lo) * j as f64 / (m - 1).max(1) as f64).exp()));
    }
    let vals: Vec<f64> = times.iter().map(|&t| g(t)).collect();
    let (jmax, &vmax) = vals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    if !vmax.is_finite() {
        return f64::INFINITY;
    }
    let a = times[jmax.saturating_sub(1)];
    let b = times[(jmax + 1).min(times.len() - 1)];
    vmax.max(golden_max(&g, a, b, grid.refine_iters))
}

fn golden_max(g: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    const R: f64 = 0.618_033_988_749_894_8;
    if b <= a {
        return g(a);
    }
    let mut c = b - R * (b - a);
    let mut d = a + R * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..iters {
        if gc >= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - R * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + R * (b - a);
            gd = g(d);
        }
    }
    gc.max(gd)
}
