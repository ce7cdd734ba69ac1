use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Exponent vector `x1^e1 * ... * xn^en`.
///
/// The total order is graded-lexicographic: lower total degree first, and
/// within one degree `x1` dominates `x2` and so on, so that sorted bases read
/// `1, x1, x2, x1^2, x1*x2, x2^2, ...`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exponents: Vec<u32>) -> Self {
        Monomial(exponents)
    }

    pub fn one(nvars: usize) -> Self {
        Monomial(vec![0; nvars])
    }

    /// The monomial `x_i` (zero-based index).
    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Monomial(e)
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_constant(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.nvars(), other.nvars());
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// True when every exponent is even, i.e. the monomial is a square.
    pub fn is_even(&self) -> bool {
        self.0.iter().all(|e| e % 2 == 0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .fold(1.0, |acc, (&e, &xi)| acc * powu(xi, e))
    }

    /// Derivative with respect to `x_i`: returns the multiplier and the
    /// reduced monomial, or `None` when the exponent is zero.
    pub fn diff(&self, i: usize) -> Option<(u32, Monomial)> {
        let e = self.0[i];
        if e == 0 {
            return None;
        }
        let mut v = self.0.clone();
        v[i] -= 1;
        Some((e, Monomial(v)))
    }

    /// All monomials in `nvars` variables with total degree in `lo..=hi`,
    /// in graded-lexicographic order.
    pub fn all_up_to(nvars: usize, lo: u32, hi: u32) -> Vec<Monomial> {
        let mut out = Vec::new();
        for deg in lo..=hi {
            out.extend(Self::homogeneous(nvars, deg));
        }
        out
    }

    /// All monomials of exact total degree `deg`, in graded-lexicographic order.
    pub fn homogeneous(nvars: usize, deg: u32) -> Vec<Monomial> {
        let mut out = Vec::new();
        let mut cur = vec![0u32; nvars];
        fn rec(i: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Monomial>) {
            let n = cur.len();
            if n == 0 {
                if left == 0 {
                    out.push(Monomial(Vec::new()));
                }
                return;
            }
            if i == n - 1 {
                cur[i] = left;
                out.push(Monomial(cur.clone()));
                return;
            }
            for e in (0..=left).rev() {
                cur[i] = e;
                rec(i + 1, left - e, cur, out);
            }
            cur[i] = 0;
        }
        rec(0, deg, &mut cur, &mut out);
        out
    }
}

pub(crate) fn powu(x: f64, e: u32) -> f64 {
    match e {
        0 => 1.0,
        1 => x,
        2 => x * x,
        _ => x.powi(e as i32),
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, &e) in self.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if e == 1 {
                write!(f, "x{}", i + 1)?;
            } else {
                write!(f, "x{}^{}", i + 1, e)?;
            }
        }
        if first {
            write!(f, "1")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grlex_order_of_small_basis() {
        let b = Monomial::all_up_to(2, 0, 2);
        let s: Vec<String> = b.iter().map(|m| m.to_string()).collect();
        assert_eq!(s, ["1", "x1", "x2", "x1^2", "x1*x2", "x2^2"]);
        let mut sorted = b.clone();
        sorted.sort();
        assert_eq!(sorted, b);
    }

    #[test]
    fn homogeneous_counts_match_binomials() {
        // C(n + d - 1, d)
        assert_eq!(Monomial::homogeneous(3, 4).len(), 15);
        assert_eq!(Monomial::homogeneous(2, 8).len(), 9);
        assert_eq!(Monomial::all_up_to(2, 0, 8).len(), 45);
    }
}
