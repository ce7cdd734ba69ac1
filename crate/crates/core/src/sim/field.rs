use crate::poly::{PolyVectorField, SignedPowerExpr};

/// Right-hand side of an autonomous ODE `dx/dt = f(x)`.
pub trait VectorField: Sync {
    fn dim(&self) -> usize;
    fn eval_into(&self, x: &[f64], out: &mut [f64]);
}

impl VectorField for PolyVectorField {
    fn dim(&self) -> usize {
        PolyVectorField::dim(self)
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        PolyVectorField::eval_into(self, x, out)
    }
}

/// Flattened polynomial field for hot integration loops.
#[derive(Clone, Debug)]
pub struct FastPolyField {
    dim: usize,
    // Per component: (coefficient, [(variable, exponent)]).
    terms: Vec<Vec<(f64, Vec<(usize, i32)>)>>,
}

impl FastPolyField {
    pub fn new(field: &PolyVectorField) -> Self {
        let terms = field
            .components()
            .iter()
            .map(|p| {
                p.terms()
                    .map(|(m, c)| {
                        let f = m
                            .exponents()
                            .iter()
                            .enumerate()
                            .filter(|(_, &e)| e > 0)
                            .map(|(i, &e)| (i, e as i32))
                            .collect();
                        (c, f)
                    })
                    .collect()
            })
            .collect();
        FastPolyField {
            dim: field.dim(),
            terms,
        }
    }
}

impl VectorField for FastPolyField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, comp) in out.iter_mut().zip(&self.terms) {
            *o = comp
                .iter()
                .map(|(c, f)| f.iter().fold(*c, |acc, &(i, e)| acc * x[i].powi(e)))
                .sum();
        }
    }
}

/// Field with signed-power components. Non-finite values (negative exponents
/// at a zero coordinate) evaluate as 0.
#[derive(Clone, Debug)]
pub struct SignedPowerField {
    components: Vec<SignedPowerExpr>,
}

impl SignedPowerField {
    pub fn new(components: Vec<SignedPowerExpr>) -> Self {
        SignedPowerField { components }
    }

    pub fn components(&self) -> &[SignedPowerExpr] {
        &self.components
    }
}

impl VectorField for SignedPowerField {
    fn dim(&self) -> usize {
        self.components.len()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.components) {
            let v = c.eval(x);
            *o = if v.is_finite() { v } else { 0.0 };
        }
    }
}

/// Closure-backed field.
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> FnField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnField { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> VectorField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}
