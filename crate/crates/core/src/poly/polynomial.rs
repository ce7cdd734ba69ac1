use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::monomial::Monomial;
use super::PolyError;

/// Coefficients below this fraction of the largest magnitude are dropped.
pub const PRUNE_REL: f64 = 1e-14;

/// Sparse real polynomial in a fixed number of variables.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(into = "PolyRepr", try_from = "PolyRepr")]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        if c != 0.0 {
            p.terms.insert(Monomial::one(nvars), c);
        }
        p
    }

    /// The coordinate polynomial `x_i` (zero-based).
    pub fn var(nvars: usize, i: usize) -> Self {
        Self::monomial(Monomial::var(nvars, i), 1.0)
    }

    pub fn monomial(m: Monomial, c: f64) -> Self {
        let nvars = m.nvars();
        let mut p = Self::zero(nvars);
        if c != 0.0 {
            p.terms.insert(m, c);
        }
        p
    }

    /// Builds a polynomial from terms, summing duplicates and pruning.
    pub fn from_terms(
        nvars: usize,
        terms: impl IntoIterator<Item = (Monomial, f64)>,
    ) -> Result<Self, PolyError> {
        let mut map = BTreeMap::new();
        for (m, c) in terms {
            if m.nvars() != nvars {
                return Err(PolyError::DimensionMismatch {
                    expected: nvars,
                    found: m.nvars(),
                });
            }
            *map.entry(m).or_insert(0.0) += c;
        }
        let mut p = Polynomial { nvars, terms: map };
        p.prune();
        Ok(p)
    }

    /// `(x1^2 + ... + xn^2)^k`.
    pub fn norm_sq_pow(nvars: usize, k: u32) -> Self {
        let mut s = Self::zero(nvars);
        for i in 0..nvars {
            let mut e = vec![0; nvars];
            e[i] = 2;
            s.terms.insert(Monomial::new(e), 1.0);
        }
        s.pow(k)
    }

    /// `(x^T x)^{r/2}`; only even `r` gives a polynomial.
    pub fn norm_pow(nvars: usize, r: u32) -> Result<Self, PolyError> {
        if r % 2 != 0 {
            return Err(PolyError::UnsupportedExponent(format!(
                "(x^T x)^({r}/2) is not a polynomial"
            )));
        }
        Ok(Self::norm_sq_pow(nvars, r / 2))
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    /// Lowest total degree among the terms; 0 for the zero polynomial.
    pub fn min_degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).min().unwrap_or(0)
    }

    pub fn is_homogeneous(&self) -> bool {
        self.degree() == self.min_degree()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |a, c| a.max(c.abs()))
    }

    fn prune(&mut self) {
        let max = self.max_abs_coeff();
        let cut = PRUNE_REL * max;
        self.terms.retain(|_, c| *c != 0.0 && c.abs() > cut);
    }

    fn check_dim(&self, other: &Polynomial) -> Result<(), PolyError> {
        if self.nvars != other.nvars {
            return Err(PolyError::DimensionMismatch {
                expected: self.nvars,
                found: other.nvars,
            });
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_dim(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            *out.terms.entry(m.clone()).or_insert(0.0) += c;
        }
        out.prune();
        Ok(out)
    }

    pub fn checked_sub(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.checked_add(&other.scale(-1.0))
    }

    pub fn checked_mul(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_dim(other)?;
        let mut map: BTreeMap<Monomial, f64> = BTreeMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                *map.entry(ma.mul(mb)).or_insert(0.0) += ca * cb;
            }
        }
        let mut p = Polynomial {
            nvars: self.nvars,
            terms: map,
        };
        p.prune();
        Ok(p)
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        if s == 0.0 {
            return Polynomial::zero(self.nvars);
        }
        Polynomial {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * s)).collect(),
        }
    }

    pub fn pow(&self, k: u32) -> Polynomial {
        let mut out = Polynomial::constant(self.nvars, 1.0);
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.nvars);
        self.terms.iter().map(|(m, c)| c * m.eval(x)).sum()
    }

    /// Partial derivative with respect to `x_i` (zero-based).
    pub fn diff(&self, i: usize) -> Polynomial {
        let mut map = BTreeMap::new();
        for (m, c) in &self.terms {
            if let Some((e, dm)) = m.diff(i) {
                *map.entry(dm).or_insert(0.0) += c * e as f64;
            }
        }
        Polynomial {
            nvars: self.nvars,
            terms: map,
        }
    }

    pub fn gradient(&self) -> Vec<Polynomial> {
        (0..self.nvars).map(|i| self.diff(i)).collect()
    }

    /// `grad(self) . f`.
    pub fn lie_derivative(&self, f: &[Polynomial]) -> Result<Polynomial, PolyError> {
        if f.len() != self.nvars {
            return Err(PolyError::DimensionMismatch {
                expected: self.nvars,
                found: f.len(),
            });
        }
        let mut out = Polynomial::zero(self.nvars);
        for (i, fi) in f.iter().enumerate() {
            let d = self.diff(i);
            if !d.is_zero() {
                out = out.checked_add(&d.checked_mul(fi)?)?;
            }
        }
        Ok(out)
    }

    /// Gradient evaluated at `x`.
    pub fn eval_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.nvars];
        for (m, c) in &self.terms {
            for (i, gi) in g.iter_mut().enumerate() {
                if let Some((e, dm)) = m.diff(i) {
                    *gi += c * e as f64 * dm.eval(x);
                }
            }
        }
        g
    }

    /// Copy with every coefficient of magnitude at most `tol` removed.
    pub fn drop_below(&self, tol: f64) -> Polynomial {
        Polynomial {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(_, c)| c.abs() > tol)
                .map(|(m, c)| (m.clone(), *c))
                .collect(),
        }
    }
}

/// Serialized form: exponent tuples with coefficients.
#[derive(Serialize, Deserialize)]
struct PolyRepr {
    nvars: usize,
    terms: Vec<(Vec<u32>, f64)>,
}

impl From<Polynomial> for PolyRepr {
    fn from(p: Polynomial) -> Self {
        PolyRepr {
            nvars: p.nvars,
            terms: p
                .terms
                .into_iter()
                .map(|(m, c)| (m.exponents().to_vec(), c))
                .collect(),
        }
    }
}

impl TryFrom<PolyRepr> for Polynomial {
    type Error = PolyError;
    fn try_from(r: PolyRepr) -> Result<Self, PolyError> {
        Polynomial::from_terms(r.nvars, r.terms.into_iter().map(|(e, c)| (Monomial::new(e), c)))
    }
}

impl PartialEq for Polynomial {
    fn eq(&self, other: &Self) -> bool {
        if self.nvars != other.nvars {
            return false;
        }
        let cut = PRUNE_REL * self.max_abs_coeff().max(other.max_abs_coeff());
        let a = self.terms.iter().filter(|(_, c)| c.abs() >= cut);
        let b = other.terms.iter().filter(|(_, c)| c.abs() >= cut);
        a.eq(b)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        // Highest degree first reads more naturally.
        for (k, (m, &c)) in self.terms.iter().rev().enumerate() {
            let mag = c.abs();
            if k == 0 {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else if c < 0.0 {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if m.is_constant() {
                write!(f, "{mag:?}")?;
            } else if mag == 1.0 {
                write!(f, "{m}")?;
            } else {
                write!(f, "{mag:?}*{m}")?;
            }
        }
        Ok(())
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $checked:ident) => {
        impl $tr<&Polynomial> for &Polynomial {
            type Output = Polynomial;
            /// Panics on a dimension mismatch; use the `checked_` form to recover.
            fn $method(self, rhs: &Polynomial) -> Polynomial {
                self.$checked(rhs).expect("polynomial dimension mismatch")
            }
        }
        impl $tr<Polynomial> for Polynomial {
            type Output = Polynomial;
            fn $method(self, rhs: Polynomial) -> Polynomial {
                (&self).$checked(&rhs).expect("polynomial dimension mismatch")
            }
        }
    };
}

binop!(Add, add, checked_add);
binop!(Sub, sub, checked_sub);
binop!(Mul, mul, checked_mul);

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

/// Polynomial vector field `dx/dt = f(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyVectorField {
    components: Vec<Polynomial>,
}

impl PolyVectorField {
    pub fn new(components: Vec<Polynomial>) -> Result<Self, PolyError> {
        let n = components.len();
        if n == 0 {
            return Err(PolyError::Empty);
        }
        for c in &components {
            if c.nvars() != n {
                return Err(PolyError::DimensionMismatch {
                    expected: n,
                    found: c.nvars(),
                });
            }
        }
        Ok(PolyVectorField { components })
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Polynomial] {
        &self.components
    }

    pub fn degree(&self) -> u32 {
        self.components.iter().map(Polynomial::degree).max().unwrap_or(0)
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.eval(x);
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(x, &mut out);
        out
    }
}

/// `{x : g_i(x) >= 0 for all i}`; no constraints means all of R^n.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemialgebraicSet {
    nvars: usize,
    constraints: Vec<Polynomial>,
}

impl SemialgebraicSet {
    pub fn global(nvars: usize) -> Self {
        SemialgebraicSet {
            nvars,
            constraints: Vec::new(),
        }
    }

    pub fn new(nvars: usize, constraints: Vec<Polynomial>) -> Result<Self, PolyError> {
        for g in &constraints {
            if g.nvars() != nvars {
                return Err(PolyError::DimensionMismatch {
                    expected: nvars,
                    found: g.nvars(),
                });
            }
        }
        Ok(SemialgebraicSet {
            nvars,
            constraints,
        })
    }

    /// The closed ball `R^2 - x^T x >= 0`.
    pub fn ball(nvars: usize, radius: f64) -> Self {
        let g = Polynomial::constant(nvars, radius * radius) - Polynomial::norm_sq_pow(nvars, 1);
        SemialgebraicSet {
            nvars,
            constraints: vec![g],
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn constraints(&self) -> &[Polynomial] {
        &self.constraints
    }

    pub fn is_global(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.constraints.iter().all(|g| g.eval(x) >= 0.0)
    }

    /// Smallest constraint value at `x` (`+inf` for the global set).
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|g| g.eval(x))
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(n: usize, i: usize) -> Polynomial {
        Polynomial::var(n, i)
    }

    #[test]
    fn difference_of_squares_is_exact() {
        let a = &x(2, 0) + &x(2, 1);
        let b = &x(2, 0) - &x(2, 1);
        let p = &a * &b;
        let q = &(&x(2, 0) * &x(2, 0)) - &(&x(2, 1) * &x(2, 1));
        assert_eq!(p, q);
        assert_eq!(p.num_terms(), 2);
    }

    #[test]
    fn lie_derivative_of_norm_along_rotation_vanishes() {
        let v = Polynomial::norm_sq_pow(2, 1);
        let f = [x(2, 1).scale(-1.0), x(2, 0)];
        assert!(v.lie_derivative(&f).unwrap().is_zero());
    }

    #[test]
    fn mismatched_dimensions_error() {
        let e = x(2, 0).checked_add(&x(3, 0)).unwrap_err();
        assert!(matches!(e, PolyError::DimensionMismatch { .. }));
    }

    #[test]
    fn ball_membership() {
        let b = SemialgebraicSet::ball(2, 1.0);
        assert!(b.contains(&[0.6, 0.6]));
        assert!(!b.contains(&[0.8, 0.8]));
    }
}
