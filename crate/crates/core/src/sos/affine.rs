use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::poly::{Monomial, PolyError, Polynomial};

/// Handle of a scalar decision variable in an [`super::SosProgram`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DecisionVar(pub usize);

/// Polynomial whose coefficients are affine in the decision variables:
/// `constant + sum_v u_v * linear[v]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinePoly {
    nvars: usize,
    constant: Polynomial,
    linear: BTreeMap<DecisionVar, Polynomial>,
}

impl AffinePoly {
    pub fn zero(nvars: usize) -> Self {
        AffinePoly {
            nvars,
            constant: Polynomial::zero(nvars),
            linear: BTreeMap::new(),
        }
    }

    pub fn from_poly(p: Polynomial) -> Self {
        AffinePoly {
            nvars: p.nvars(),
            constant: p,
            linear: BTreeMap::new(),
        }
    }

    /// `u_v * p`.
    pub fn term(v: DecisionVar, p: Polynomial) -> Self {
        let mut a = Self::zero(p.nvars());
        if !p.is_zero() {
            a.linear.insert(v, p);
        }
        a
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn constant(&self) -> &Polynomial {
        &self.constant
    }

    pub fn linear(&self) -> impl Iterator<Item = (DecisionVar, &Polynomial)> {
        self.linear.iter().map(|(v, p)| (*v, p))
    }

    fn parts(&self) -> impl Iterator<Item = &Polynomial> {
        std::iter::once(&self.constant).chain(self.linear.values())
    }

    pub fn add(&self, other: &AffinePoly) -> AffinePoly {
        let mut out = self.clone();
        out.constant = &out.constant + &other.constant;
        for (v, p) in &other.linear {
            let e = out
                .linear
                .entry(*v)
                .or_insert_with(|| Polynomial::zero(self.nvars));
            *e = &*e + p;
        }
        out.linear.retain(|_, p| !p.is_zero());
        out
    }

    pub fn sub(&self, other: &AffinePoly) -> AffinePoly {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> AffinePoly {
        AffinePoly {
            nvars: self.nvars,
            constant: self.constant.scale(s),
            linear: self
                .linear
                .iter()
                .map(|(v, p)| (*v, p.scale(s)))
                .filter(|(_, p)| !p.is_zero())
                .collect(),
        }
    }

    pub fn mul_poly(&self, q: &Polynomial) -> AffinePoly {
        AffinePoly {
            nvars: self.nvars,
            constant: &self.constant * q,
            linear: self
                .linear
                .iter()
                .map(|(v, p)| (*v, p * q))
                .filter(|(_, p)| !p.is_zero())
                .collect(),
        }
    }

    /// `grad(self) . f`, applied coefficient-wise.
    pub fn lie_derivative(&self, f: &[Polynomial]) -> Result<AffinePoly, PolyError> {
        let mut linear = BTreeMap::new();
        for (v, p) in &self.linear {
            let d = p.lie_derivative(f)?;
            if !d.is_zero() {
                linear.insert(*v, d);
            }
        }
        Ok(AffinePoly {
            nvars: self.nvars,
            constant: self.constant.lie_derivative(f)?,
            linear,
        })
    }

    /// Substitutes decision values.
    pub fn eval(&self, values: &[f64]) -> Polynomial {
        let mut out = self.constant.clone();
        for (v, p) in &self.linear {
            out = &out + &p.scale(values[v.0]);
        }
        out
    }

    pub fn monomials(&self) -> BTreeSet<Monomial> {
        self.parts()
            .flat_map(|p| p.terms().map(|(m, _)| m.clone()))
            .collect()
    }

    pub fn degree(&self) -> u32 {
        self.parts().map(Polynomial::degree).max().unwrap_or(0)
    }

    pub fn min_degree(&self) -> u32 {
        self.parts()
            .filter(|p| !p.is_zero())
            .map(Polynomial::min_degree)
            .min()
            .unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.parts().all(Polynomial::is_zero)
    }

    pub fn vars(&self) -> impl Iterator<Item = DecisionVar> + '_ {
        self.linear.keys().copied()
    }
}

/// Polynomial with one unknown coefficient per basis monomial.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyTemplate {
    pub basis: Vec<Monomial>,
    pub coeff_ids: Vec<DecisionVar>,
}

impl PolyTemplate {
    pub fn nvars(&self) -> usize {
        self.basis.first().map(Monomial::nvars).unwrap_or(0)
    }

    pub fn affine(&self) -> AffinePoly {
        let n = self.nvars();
        let mut a = AffinePoly::zero(n);
        for (m, v) in self.basis.iter().zip(&self.coeff_ids) {
            a.linear.insert(*v, Polynomial::monomial(m.clone(), 1.0));
        }
        a
    }

    pub fn eval(&self, values: &[f64]) -> Polynomial {
        Polynomial::from_terms(
            self.nvars(),
            self.basis
                .iter()
                .zip(&self.coeff_ids)
                .map(|(m, v)| (m.clone(), values[v.0])),
        )
        .expect("template basis dimensions are uniform")
    }
}
