//! Polynomials, signed-power expressions and semialgebraic sets.

mod monomial;
mod parse;
mod polynomial;
mod signed_power;

pub use monomial::Monomial;
pub use parse::{parse_expr, parse_polynomial, parse_system, ParsedSystem};
pub use polynomial::{PolyVectorField, Polynomial, SemialgebraicSet, PRUNE_REL};
pub use signed_power::{
    ratio_f64, substitute_signed_power, Rational, SignedPowerExpr, SpFactor, SpTerm,
};

/// All monomials in `nvars` variables with degree in `min_deg..=max_deg`,
/// graded-lexicographic.
pub fn monomial_basis(nvars: usize, min_deg: u32, max_deg: u32) -> Vec<Monomial> {
    Monomial::all_up_to(nvars, min_deg, max_deg)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolyError {
    #[error("dimension mismatch: expected {expected} variables, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("term `{0}` is not polynomial")]
    NotPolynomial(String),
    #[error("invalid exponent: {0}")]
    InvalidExponent(String),
    #[error("unsupported exponent: {0}")]
    UnsupportedExponent(String),
    #[error("empty vector field")]
    Empty,
}
