use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::poly::{Monomial, Polynomial};

/// One PSD block of a certificate: `polynomial = Z^T gram Z` over `basis`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GramBlock {
    /// `None` for `s_0`, otherwise the index of the domain constraint.
    pub multiplier: Option<usize>,
    pub basis: Vec<Monomial>,
    /// Row-major.
    pub gram: Vec<Vec<f64>>,
    pub polynomial: Polynomial,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstraintCertificate {
    pub label: String,
    /// The constraint polynomial at the extracted decision values.
    pub expression: Polynomial,
    pub domain: Vec<Polynomial>,
    pub blocks: Vec<GramBlock>,
    /// Max abs coefficient of `expression - s_0 - sum s_i g_i`.
    pub identity_residual: f64,
    pub scale: f64,
    pub min_gram_eig: f64,
}

impl ConstraintCertificate {
    pub fn s0(&self) -> Option<&Polynomial> {
        self.blocks
            .iter()
            .find(|b| b.multiplier.is_none())
            .map(|b| &b.polynomial)
    }

    /// `expression(x) - s_0(x) - sum s_i(x) g_i(x)` and the smallest SOS value.
    pub fn pointwise(&self, x: &[f64]) -> (f64, f64) {
        let mut r = self.expression.eval(x);
        let mut min_sos = f64::INFINITY;
        for b in &self.blocks {
            let s = b.polynomial.eval(x);
            min_sos = min_sos.min(s);
            r -= match b.multiplier {
                None => s,
                Some(i) => s * self.domain[i].eval(x),
            };
        }
        (r, min_sos)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SosCertificate {
    pub decision_values: Vec<f64>,
    pub constraints: Vec<ConstraintCertificate>,
}

/// Worst values seen by [`SosCertificate::sample_identity`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentitySample {
    /// Largest `|identity residual| / scale`.
    pub max_residual: f64,
    /// Smallest `s(x) / scale` over all SOS terms.
    pub min_sos: f64,
}

impl SosCertificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    /// Evaluates the Putinar identity at `samples` uniform points of the box
    /// `[-half_width, half_width]^n`.
    pub fn sample_identity<R: Rng>(&self, rng: &mut R, samples: usize, half_width: f64) -> IdentitySample {
        let mut out = IdentitySample {
            max_residual: 0.0,
            min_sos: f64::INFINITY,
        };
        for c in &self.constraints {
            let n = c.expression.nvars();
            for _ in 0..samples {
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-half_width..=half_width)).collect();
                let (r, s) = c.pointwise(&x);
                out.max_residual = out.max_residual.max(r.abs() / c.scale);
                out.min_sos = out.min_sos.min(s / c.scale);
            }
        }
        out
    }
}
