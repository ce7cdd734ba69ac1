//! Comparison families `beta(y, t)`, their generators and the pointwise
//! decay bound `alpha(x(t)) <= M beta(alpha(x0), k t)`.

use serde::{Deserialize, Serialize};

use crate::sim::Trajectory;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BetaFamily {
    /// `y e^{-t}`.
    Exponential,
    /// `y / (1 + y t)`, paired with `alpha = ||x||_2^p`.
    Rational { p: f64 },
    /// `max(y - t, 0)`, paired with `alpha = ||x||_{p_norm}^eta`.
    FiniteTime { p_norm: f64, eta: f64 },
}

impl BetaFamily {
    pub fn beta(&self, y: f64, t: f64) -> f64 {
        match self {
            BetaFamily::Exponential => y * (-t).exp(),
            BetaFamily::Rational { .. } => {
                if t == 0.0 {
                    y
                } else {
                    y / (1.0 + y * t)
                }
            }
            BetaFamily::FiniteTime { .. } => (y - t).max(0.0),
        }
    }

    /// `d/dt beta(y, t)` at `t = 0`.
    pub fn rho(&self, y: f64) -> f64 {
        match self {
            BetaFamily::Exponential => -y,
            BetaFamily::Rational { .. } => -y * y,
            BetaFamily::FiniteTime { .. } => {
                if y > 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Negative-time extension `beta(y, -t)`; `+inf` past a finite escape.
    pub fn beta_neg(&self, y: f64, t: f64) -> f64 {
        match self {
            BetaFamily::Exponential => y * t.exp(),
            BetaFamily::Rational { .. } => {
                if y * t >= 1.0 {
                    f64::INFINITY
                } else {
                    y / (1.0 - y * t)
                }
            }
            BetaFamily::FiniteTime { .. } => y + t,
        }
    }

    /// The state measure the family is certified against.
    pub fn alpha(&self) -> AlphaMeasure {
        match *self {
            BetaFamily::Exponential => AlphaMeasure::TwoNormPow(1.0),
            BetaFamily::Rational { p } => AlphaMeasure::TwoNormPow(p),
            BetaFamily::FiniteTime { p_norm, eta } => AlphaMeasure::QuasiNormPow { p: p_norm, eta },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BetaFamily::Exponential => "exponential",
            BetaFamily::Rational { .. } => "rational",
            BetaFamily::FiniteTime { .. } => "finite_time",
        }
    }
}

/// `alpha(x)`: `||x||_2^e` or `(sum |x_i|^p)^{eta/p}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum AlphaMeasure {
    TwoNormPow(f64),
    QuasiNormPow { p: f64, eta: f64 },
}

impl AlphaMeasure {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            AlphaMeasure::TwoNormPow(e) => {
                let n2: f64 = x.iter().map(|v| v * v).sum();
                if e == 2.0 {
                    n2
                } else {
                    n2.sqrt().powf(e)
                }
            }
            AlphaMeasure::QuasiNormPow { p, eta } => {
                let s: f64 = x.iter().map(|v| v.abs().powf(p)).sum();
                if s == 0.0 {
                    0.0
                } else {
                    s.powf(eta / p)
                }
            }
        }
    }
}

/// Outcome of [`pointwise_bound`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundCheck {
    pub holds: bool,
    /// `max_j alpha(x(t_j)) - (1 + BOUND_REL) M beta(alpha(x0), k t_j)`.
    pub worst_margin: f64,
    pub worst_time: f64,
}

/// Relative allowance on the bound for integration error.
pub const BOUND_REL: f64 = 1e-6;

/// Default absolute slack `1e-12 (1 + alpha(x0))`.
pub fn default_slack(alpha0: f64) -> f64 {
    1e-12 * (1.0 + alpha0)
}

/// Checks `alpha(x(t_j)) <= (1 + BOUND_REL) M beta(alpha(x0), k t_j) + slack`
/// at every sample.
pub fn pointwise_bound(
    fam: &BetaFamily,
    alpha: &AlphaMeasure,
    gain: f64,
    k: f64,
    traj: &Trajectory,
) -> BoundCheck {
    let a0 = alpha.eval(&traj.states[0]);
    pointwise_bound_with_slack(fam, alpha, gain, k, traj, default_slack(a0))
}

pub fn pointwise_bound_with_slack(
    fam: &BetaFamily,
    alpha: &AlphaMeasure,
    gain: f64,
    k: f64,
    traj: &Trajectory,
    slack: f64,
) -> BoundCheck {
    let a0 = alpha.eval(&traj.states[0]);
    let mut worst = f64::NEG_INFINITY;
    let mut worst_time = 0.0;
    for (t, x) in traj.times.iter().zip(&traj.states) {
        let m = alpha.eval(x) - (1.0 + BOUND_REL) * gain * fam.beta(a0, k * t);
        if m > worst {
            worst = m;
            worst_time = *t;
        }
    }
    BoundCheck {
        holds: worst <= slack,
        worst_margin: worst,
        worst_time,
    }
}

/// First grid point violating the semigroup law or the generator limit.
#[derive(Clone, Debug, PartialEq)]
pub enum InvarianceViolation {
    Semigroup { y: f64, t0: f64, t: f64, error: f64 },
    Generator { y: f64, estimate: f64, rho: f64 },
}

/// Checks `beta(beta(y, t0), t) = beta(y, t0 + t)` to `1e-10 (1 + y)` on the
/// grid and, when `rho` is given, that `(beta(y, h) - y) / h -> rho(y)`.
pub fn check_time_invariance(
    beta: impl Fn(f64, f64) -> f64,
    rho: Option<&dyn Fn(f64) -> f64>,
    ys: &[f64],
    ts: &[f64],
) -> Result<(), InvarianceViolation> {
    for &y in ys {
        for &t0 in ts {
            for &t in ts {
                let error = (beta(beta(y, t0), t) - beta(y, t0 + t)).abs();
                if error > 1e-10 * (1.0 + y) {
                    return Err(InvarianceViolation::Semigroup { y, t0, t, error });
                }
            }
        }
        if let Some(rho) = rho {
            let r = rho(y);
            // Richardson-free first-order estimate at a small step.
            let h = 1e-7 / (1.0 + y * y);
            let estimate = (beta(y, h) - y) / h;
            if (estimate - r).abs() > 1e-4 * (1.0 + r.abs()) {
                return Err(InvarianceViolation::Generator { y, estimate, rho: r });
            }
        }
    }
    Ok(())
}

pub fn check_family_time_invariance(
    fam: &BetaFamily,
    ys: &[f64],
    ts: &[f64],
) -> Result<(), InvarianceViolation> {
    let rho = |y: f64| fam.rho(y);
    check_time_invariance(|y, t| fam.beta(y, t), Some(&rho), ys, ts)
}
