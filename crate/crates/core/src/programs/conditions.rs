use serde::{Deserialize, Serialize};

use super::ProgramError;

/// The three equivalent rational decay conditions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum RationalConditions {
    /// `C1 ||x||^r <= V <= C2 ||x||^r`, `dV/dt <= -C3 ||x||^q`.
    I { c1: f64, c2: f64, c3: f64, r: f64, q: f64 },
    /// `||x||^r / gamma <= V <= ||x||^r`, `dV/dt <= -c V ||x||^p`.
    II { gamma: f64, c: f64, p: f64, r: f64 },
    /// `||x||^p / M <= V <= ||x||^p`, `dV/dt <= -k V^2`.
    III { m: f64, k: f64, p: f64 },
}

/// Parameter maps between the rational conditions, numbered
/// 1: (i)->(ii), 2: (ii)->(i), 3: (ii)->(iii), 4: (iii)->(ii),
/// 5: (i)->(iii), 6: (iii)->(i).
pub fn map_conditions(case: u8, params: RationalConditions) -> Result<RationalConditions, ProgramError> {
    use RationalConditions::*;
    let out = match (case, params) {
        (1, I { c1, c2, c3, r, q }) => II {
            gamma: c2 / c1,
            c: c3 / c2,
            p: q - r,
            r,
        },
        (2, II { gamma, c, p, r }) => I {
            c1: 1.0 / gamma,
            c2: 1.0,
            c3: c / gamma,
            r,
            q: r + p,
        },
        (3, II { gamma, c, p, r }) => III {
            m: gamma.powf(p / r),
            k: c * p / r,
            p,
        },
        (4, III { m, k, p }) => II {
            gamma: m,
            c: k / m,
            p,
            r: p,
        },
        (5, I { c1, c2, c3, r, q }) => III {
            m: (c2 / c1).powf(q / r - 1.0),
            k: (q / r - 1.0) * c3 / c2,
            p: q - r,
        },
        (6, III { m, k, p }) => I {
            c1: 1.0 / m,
            c2: 1.0,
            c3: k / (m * m),
            r: p,
            q: 2.0 * p,
        },
        (c @ 1..=6, p) => {
            return Err(ProgramError::InvalidSpec(format!(
                "case {c} does not apply to {p:?}"
            )))
        }
        (c, _) => return Err(ProgramError::InvalidSpec(format!("no case {c}"))),
    };
    let positive = match out {
        I { c1, c2, c3, r, q } => [c1, c2, r, q - r].iter().all(|v| *v > 0.0) && c3 >= 0.0,
        II { gamma, c, p, r } => [gamma, p, r].iter().all(|v| *v > 0.0) && c >= 0.0,
        III { m, k, p } => m > 0.0 && p > 0.0 && k >= 0.0,
    };
    if !positive {
        return Err(ProgramError::InvalidSpec(format!(
            "case {case} produced out-of-range parameters {out:?}"
        )));
    }
    Ok(out)
}
