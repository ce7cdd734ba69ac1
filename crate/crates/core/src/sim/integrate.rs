use serde::Serialize;

use super::{SimError, VectorField};

/// Step-size controller settings for [`integrate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegrateOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Initial step; chosen from the field scale when `None`.
    pub h0: Option<f64>,
    pub max_steps: usize,
    /// Largest accepted `||x_new - x||_inf / ||x||_inf`. Keeps finite-time
    /// trajectories from stepping across the origin.
    pub max_rel_change: Option<f64>,
    /// States with `||x||_inf` below this radius are set to the origin.
    pub snap_radius: Option<f64>,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            rel_tol: 1e-6,
            abs_tol: 1e-9,
            h0: None,
            max_steps: 5_000_000,
            max_rel_change: None,
            snap_radius: None,
        }
    }
}

impl IntegrateOptions {
    /// Pure relative error control, for long horizons on decaying states.
    pub fn relative() -> Self {
        IntegrateOptions {
            abs_tol: 0.0,
            ..Self::default()
        }
    }

    /// Settings for fields that reach the origin in finite time: relative
    /// error control, at most a halving of the state per step, and a snap to
    /// the origin at `1e-60 ||x0||`.
    pub fn finite_time(x0_scale: f64) -> Self {
        IntegrateOptions {
            abs_tol: 0.0,
            max_rel_change: Some(0.5),
            snap_radius: Some(1e-60 * x0_scale),
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Largest accepted local error estimate in tolerance units.
    pub max_error: f64,
}

/// Accepted steps of a solution with the slopes needed for Hermite output.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub derivs: Vec<Vec<f64>>,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().unwrap()
    }

    /// Cubic Hermite interpolation; clamps `t` to the integrated interval.
    pub fn state_at(&self, t: f64) -> Vec<f64> {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.states[0].clone();
        }
        if t >= self.times[n - 1] {
            return self.states[n - 1].clone();
        }
        let j = self.times.partition_point(|&s| s <= t) - 1;
        let (t0, t1) = (self.times[j], self.times[j + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let (y0, y1) = (&self.states[j], &self.states[j + 1]);
        let (d0, d1) = (&self.derivs[j], &self.derivs[j + 1]);
        (0..y0.len())
            .map(|i| h00 * y0[i] + h * h10 * d0[i] + h01 * y1[i] + h * h11 * d1[i])
            .collect()
    }

    /// CSV with header `t,x1..xn,alpha`.
    pub fn to_csv(&self, alpha: impl Fn(&[f64]) -> f64) -> String {
        let n = self.dim();
        let mut s = String::from("t");
        for i in 1..=n {
            s.push_str(&format!(",x{i}"));
        }
        s.push_str(",alpha\n");
        for (t, x) in self.times.iter().zip(&self.states) {
            s.push_str(&format!("{t:e}"));
            for v in x {
                s.push_str(&format!(",{v:e}"));
            }
            s.push_str(&format!(",{:e}\n", alpha(x)));
        }
        s
    }
}

fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Bogacki-Shampine 3(2) pair with FSAL and error-per-step control
/// `||err||_inf <= rel_tol ||x||_inf + abs_tol`.
pub fn integrate<F: VectorField + ?Sized>(
    field: &F,
    x0: &[f64],
    t_end: f64,
    opts: &IntegrateOptions,
) -> Result<Trajectory, SimError> {
    let n = field.dim();
    if x0.len() != n {
        return Err(SimError::Dimension {
            expected: n,
            found: x0.len(),
        });
    }
    let mut x = x0.to_vec();
    let x0_scale = inf_norm(x0);
    let mut k1 = vec![0.0; n];
    field.eval_into(&x, &mut k1);
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![x.clone()],
        derivs: vec![k1.clone()],
        stats: StepStats::default(),
    };
    if t_end <= 0.0 {
        return Ok(traj);
    }
    let mut t = 0.0;
    let mut h = opts.h0.unwrap_or_else(|| {
        let sx = inf_norm(&x);
        let sf = inf_norm(&k1);
        let tol = opts.rel_tol * sx + opts.abs_tol;
        if sf > 0.0 {
            (0.5 * (tol / sf).cbrt()).min(0.1 * sx.max(opts.abs_tol) / sf)
        } else {
            1e-3
        }
        .clamp(1e-12, t_end)
    });
    let (mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let mut y = vec![0.0; n];
    while t < t_end {
        if traj.stats.accepted + traj.stats.rejected >= opts.max_steps {
            return Err(SimError::StepSizeUnderflow { t });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        field.eval_into(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = x[i] + 0.75 * h * k2[i];
        }
        field.eval_into(&tmp, &mut k3);
        for i in 0..n {
            y[i] = x[i] + h * (2.0 / 9.0 * k1[i] + 1.0 / 3.0 * k2[i] + 4.0 / 9.0 * k3[i]);
        }
        field.eval_into(&y, &mut k4);
        let mut err = 0.0f64;
        let mut change = 0.0f64;
        for i in 0..n {
            let e = h
                * (-5.0 / 72.0 * k1[i] + 1.0 / 12.0 * k2[i] + 1.0 / 9.0 * k3[i] - 1.0 / 8.0 * k4[i]);
            err = err.max(e.abs());
            change = change.max((y[i] - x[i]).abs());
        }
        let scale = opts.rel_tol * inf_norm(&x).max(inf_norm(&y)) + opts.abs_tol;
        let mut ratio = if scale > 0.0 {
            err / scale
        } else if err == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if !ratio.is_finite() || y.iter().any(|v| !v.is_finite()) {
            ratio = f64::INFINITY;
        }
        let mut too_far = false;
        if let Some(c) = opts.max_rel_change {
            too_far = change > c * inf_norm(&x);
        }
        if ratio <= 1.0 && !too_far {
            t = if last { t_end } else { t + h };
            std::mem::swap(&mut x, &mut y);
            std::mem::swap(&mut k1, &mut k4);
            if let Some(r) = opts.snap_radius {
                if inf_norm(&x) <= r && x.iter().any(|&v| v != 0.0) {
                    x.iter_mut().for_each(|v| *v = 0.0);
                    field.eval_into(&x, &mut k1);
                }
            }
            traj.times.push(t);
            traj.states.push(x.clone());
            traj.derivs.push(k1.clone());
            traj.stats.accepted += 1;
            traj.stats.max_error = traj.stats.max_error.max(ratio);
            let grow = if ratio > 0.0 {
                (0.9 * ratio.powf(-1.0 / 3.0)).min(5.0)
            } else {
                5.0
            };
            h *= grow.max(1.0);
        } else {
            traj.stats.rejected += 1;
            let shrink = if ratio.is_finite() && ratio > 1.0 {
                (0.9 * ratio.powf(-1.0 / 3.0)).max(0.2)
            } else {
                0.5
            };
            h *= shrink;
        }
        if h < 16.0 * f64::EPSILON * t.abs().max(1e-300) || h == 0.0 {
            // A finite-time state far below its initial size has settled to
            // within the time resolution.
            if opts.snap_radius.is_some() && inf_norm(&x) <= 1e-6 * x0_scale {
                x.iter_mut().for_each(|v| *v = 0.0);
                field.eval_into(&x, &mut k1);
                let tn = t + 16.0 * f64::EPSILON * t.abs().max(1e-300);
                traj.times.push(tn.min(t_end));
                traj.states.push(x.clone());
                traj.derivs.push(k1.clone());
                t = tn;
                h = (t_end - t).max(0.0).min(1e-3);
                if t >= t_end {
                    break;
                }
                continue;
            }
            return Err(SimError::StepSizeUnderflow { t });
        }
    }
    Ok(traj)
}
