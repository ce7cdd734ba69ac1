//! Trajectory integration and simulation-based estimators: rate, settling
//! time and the numerical converse Lyapunov function.

mod converse;
mod estimate;
mod field;
mod ics;
mod integrate;

pub use converse::{converse_from_trajectory, converse_lf_sample, ConverseGrid};
pub use estimate::{
    estimate_rate, estimate_rate_settling, rate_from_ics, settling_time, simulate_all,
    trajectory_rate, IcRate, RateEstimate, RATE_REL_TOL, SETTLING_REL,
};
pub use field::{FastPolyField, FnField, SignedPowerField, VectorField};
pub use ics::{ball_ics, sphere_ics};
pub use integrate::{integrate, IntegrateOptions, StepStats, Trajectory};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    #[error("initial state has {found} components, field has {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("trajectory did not settle within horizon {horizon}")]
    NotSettled { horizon: f64 },
    #[error("bound fails at the lowest rate: x0 = {ic:?}, t = {time}, margin {margin:e}")]
    GainViolation { ic: Vec<f64>, time: f64, margin: f64 },
    #[error("bound holds for every rate up to {k}")]
    RateUnbounded { k: f64 },
    #[error("no nonzero initial conditions")]
    NoInitialConditions,
}

/// Maps `f` over `items` on up to `jobs` scoped threads, preserving order.
pub fn parallel_map<T: Sync, R: Send>(
    items: &[T],
    jobs: usize,
    f: impl Fn(&T) -> R + Sync,
) -> Vec<R> {
    let jobs = jobs.max(1).min(items.len().max(1));
    if jobs == 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(jobs);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| {
                let f = &f;
                s.spawn(move || c.iter().map(f).collect::<Vec<R>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}
