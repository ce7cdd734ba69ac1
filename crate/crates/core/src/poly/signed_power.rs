use std::fmt;

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::monomial::Monomial;
use super::polynomial::Polynomial;
use super::PolyError;

pub type Rational = Ratio<i64>;

/// `sign(x_var)^sign * |x_var|^abs_exp`, with `sign` reduced mod 2.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpFactor {
    pub var: usize,
    pub sign: u8,
    pub abs_exp: Rational,
}

impl SpFactor {
    fn eval(&self, x: f64) -> f64 {
        let a = x.abs();
        let mag = if *self.abs_exp.numer() == 0 {
            1.0
        } else {
            a.powf(ratio_f64(self.abs_exp))
        };
        if self.sign == 1 {
            if x == 0.0 {
                0.0
            } else {
                x.signum() * mag
            }
        } else {
            mag
        }
    }

    fn is_trivial(&self) -> bool {
        self.sign == 0 && *self.abs_exp.numer() == 0
    }
}

pub fn ratio_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Coefficient times a product of signed-power factors, one factor per variable
/// at most, sorted by variable index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpTerm {
    pub coeff: f64,
    pub factors: Vec<SpFactor>,
}

impl SpTerm {
    fn key(&self) -> &[SpFactor] {
        &self.factors
    }

    fn mul(&self, other: &SpTerm) -> SpTerm {
        let mut factors = self.factors.clone();
        for f in &other.factors {
            match factors.iter_mut().find(|g| g.var == f.var) {
                Some(g) => {
                    g.sign = (g.sign + f.sign) % 2;
                    g.abs_exp += f.abs_exp;
                }
                None => factors.push(f.clone()),
            }
        }
        factors.retain(|f| !f.is_trivial());
        factors.sort_by_key(|f| f.var);
        SpTerm {
            coeff: self.coeff * other.coeff,
            factors,
        }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.factors
            .iter()
            .fold(self.coeff, |acc, f| acc * f.eval(x[f.var]))
    }
}

/// Finite sum of terms `c * prod_i sign(x_i)^{s_i} |x_i|^{a_i}` with rational
/// `a_i`. Polynomials embed via `x^e = sign(x)^{e mod 2} |x|^e`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignedPowerExpr {
    nvars: usize,
    terms: Vec<SpTerm>,
}

impl SignedPowerExpr {
    pub fn zero(nvars: usize) -> Self {
        SignedPowerExpr {
            nvars,
            terms: Vec::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        Self::from_terms(
            nvars,
            vec![SpTerm {
                coeff: c,
                factors: Vec::new(),
            }],
        )
    }

    /// `sign(x_var)^sign * |x_var|^abs_exp`.
    pub fn factor(nvars: usize, var: usize, sign: u8, abs_exp: Rational) -> Self {
        Self::from_terms(
            nvars,
            vec![SpTerm {
                coeff: 1.0,
                factors: vec![SpFactor {
                    var,
                    sign: sign % 2,
                    abs_exp,
                }],
            }],
        )
    }

    pub fn var(nvars: usize, var: usize) -> Self {
        Self::factor(nvars, var, 1, Rational::from_integer(1))
    }

    pub fn from_terms(nvars: usize, terms: Vec<SpTerm>) -> Self {
        let mut out = SignedPowerExpr { nvars, terms: Vec::new() };
        for mut t in terms {
            t.factors.retain(|f| !f.is_trivial());
            t.factors.sort_by_key(|f| f.var);
            out.push_term(t);
        }
        out.terms.retain(|t| t.coeff != 0.0);
        out
    }

    fn push_term(&mut self, t: SpTerm) {
        if t.coeff == 0.0 {
            return;
        }
        match self.terms.iter_mut().find(|u| u.key() == t.key()) {
            Some(u) => u.coeff += t.coeff,
            None => self.terms.push(t),
        }
    }

    pub fn from_polynomial(p: &Polynomial) -> Self {
        let n = p.nvars();
        let terms = p
            .terms()
            .map(|(m, c)| SpTerm {
                coeff: c,
                factors: m
                    .exponents()
                    .iter()
                    .enumerate()
                    .filter(|(_, &e)| e > 0)
                    .map(|(i, &e)| SpFactor {
                        var: i,
                        sign: (e % 2) as u8,
                        abs_exp: Rational::from_integer(e as i64),
                    })
                    .collect(),
            })
            .collect();
        Self::from_terms(n, terms)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &[SpTerm] {
        &self.terms
    }

    pub fn add(&self, other: &SignedPowerExpr) -> SignedPowerExpr {
        let mut out = self.clone();
        for t in &other.terms {
            out.push_term(t.clone());
        }
        out.terms.retain(|t| t.coeff != 0.0);
        out
    }

    pub fn scale(&self, s: f64) -> SignedPowerExpr {
        let terms = self
            .terms
            .iter()
            .map(|t| SpTerm {
                coeff: t.coeff * s,
                factors: t.factors.clone(),
            })
            .collect();
        Self::from_terms(self.nvars, terms)
    }

    pub fn mul(&self, other: &SignedPowerExpr) -> SignedPowerExpr {
        let mut out = SignedPowerExpr::zero(self.nvars);
        for a in &self.terms {
            for b in &other.terms {
                out.push_term(a.mul(b));
            }
        }
        out.terms.retain(|t| t.coeff != 0.0);
        out
    }

    pub fn pow(&self, k: u32) -> SignedPowerExpr {
        let mut out = SignedPowerExpr::constant(self.nvars, 1.0);
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// Evaluates with `sign(0) = 0` and `|0|^0 = 1`. Negative exponents at a
    /// zero coordinate give an infinite value.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    /// Replaces every `x_i` by `sign(z_i)|z_i|^r`.
    pub fn compose_signed_power(&self, r: Rational) -> SignedPowerExpr {
        let terms = self
            .terms
            .iter()
            .map(|t| SpTerm {
                coeff: t.coeff,
                factors: t
                    .factors
                    .iter()
                    .map(|f| SpFactor {
                        var: f.var,
                        sign: f.sign,
                        abs_exp: f.abs_exp * r,
                    })
                    .collect(),
            })
            .collect();
        Self::from_terms(self.nvars, terms)
    }

    /// Converts to a polynomial in the same variables after multiplying by
    /// `multiplier`. A factor `sign^s |z|^a` becomes `z^a` exactly when `a` is a
    /// non-negative integer with `a = s (mod 2)`.
    pub fn to_polynomial(&self, multiplier: &SignedPowerExpr) -> Result<Polynomial, PolyError> {
        let prod = self.mul(multiplier);
        let n = self.nvars;
        let mut terms = Vec::with_capacity(prod.terms.len());
        for t in &prod.terms {
            let mut e = vec![0u32; n];
            for f in &t.factors {
                let a = f.abs_exp;
                if !a.is_integer() || *a.numer() < 0 || a.numer().mod_floor(&2) != f.sign as i64 {
                    return Err(PolyError::NotPolynomial(format_term(t)));
                }
                e[f.var] = *a.numer() as u32;
            }
            terms.push((Monomial::new(e), t.coeff));
        }
        Polynomial::from_terms(n, terms)
    }
}

/// The change of variables `x = sign(z)|z|^r` applied to `dx/dt = f(x)`:
/// component `i` of the result is `(1/r) f_i(sign(z)|z|^r) |z_i|^{1-r}`.
pub fn substitute_signed_power(
    f: &[SignedPowerExpr],
    r: Rational,
) -> Result<Vec<SignedPowerExpr>, PolyError> {
    if r <= Rational::from_integer(0) {
        return Err(PolyError::InvalidExponent(format!("substitution power {r} must be positive")));
    }
    let n = f.len();
    let one = Rational::from_integer(1);
    Ok(f.iter()
        .enumerate()
        .map(|(i, fi)| {
            let jac = SignedPowerExpr::factor(n, i, 0, one - r);
            fi.compose_signed_power(r)
                .mul(&jac)
                .scale(1.0 / ratio_f64(r))
        })
        .collect())
}

fn format_term(t: &SpTerm) -> String {
    let mut s = format!("{:?}", t.coeff);
    for f in &t.factors {
        if f.sign == 1 {
            s.push_str(&format!("*sign(x{})", f.var + 1));
        }
        if *f.abs_exp.numer() != 0 {
            s.push_str(&format!("*abs(x{})^({})", f.var + 1, f.abs_exp));
        }
    }
    s
}

impl fmt::Display for SignedPowerExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, t) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{}", format_term(t))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn polynomial_roundtrip_through_signed_powers() {
        let x = Polynomial::var(2, 0);
        let y = Polynomial::var(2, 1);
        let p = &(&(&x * &x) * &x) - &(&y * &x);
        let e = SignedPowerExpr::from_polynomial(&p);
        let back = e.to_polynomial(&SignedPowerExpr::constant(2, 1.0)).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn odd_power_without_sign_is_rejected() {
        // |x|^3 is not a polynomial
        let e = SignedPowerExpr::factor(1, 0, 0, q(3, 1));
        assert!(e.to_polynomial(&SignedPowerExpr::constant(1, 1.0)).is_err());
        // sign(x)|x|^3 = x^3
        let e = SignedPowerExpr::factor(1, 0, 1, q(3, 1));
        assert!(e.to_polynomial(&SignedPowerExpr::constant(1, 1.0)).is_ok());
    }

    #[test]
    fn eval_at_zero_coordinate() {
        let e = SignedPowerExpr::factor(1, 0, 1, q(1, 3));
        assert_eq!(e.eval(&[0.0]), 0.0);
        assert!((e.eval(&[-8.0]) + 2.0).abs() < 1e-12);
    }
}
