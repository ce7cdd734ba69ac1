//! Sum-of-squares programs over affine polynomial expressions, compiled to
//! block SDPs with Gram matrices and Putinar multipliers.

mod affine;
mod certificate;
mod compile;

pub use affine::{AffinePoly, DecisionVar, PolyTemplate};
pub use certificate::{ConstraintCertificate, GramBlock, SosCertificate};
pub use compile::{
    compile, extract, gram_coefficients, gram_parameterize, putinar_allocate, solve_program,
    BlockInfo, CompiledSos, SosOutcome, SosVerdict,
};

use crate::poly::{Monomial, PolyError, SemialgebraicSet};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SosError {
    #[error("constraint `{label}`: expression degree {found} exceeds declared degree {declared}")]
    DegreeOverflow {
        label: String,
        found: u32,
        declared: u32,
    },
    #[error("constraint `{label}`: identity residual {residual:e} exceeds {limit:e}")]
    ResidualTooLarge {
        label: String,
        residual: f64,
        limit: f64,
    },
    #[error("constraint `{label}`: Gram matrix has eigenvalue {min_eig:e}")]
    Indefinite { label: String, min_eig: f64 },
    #[error("unknown decision variable {0}")]
    UnknownVariable(usize),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Sdp(#[from] ratecert_sdp::SdpError),
}

/// `expr in Sigma_{degree}[domain]`.
#[derive(Clone, Debug)]
pub struct SosConstraint {
    pub label: String,
    pub expr: AffinePoly,
    pub domain: SemialgebraicSet,
    pub degree: u32,
}

/// Decision variables, SOS constraints and a linear objective to minimize.
#[derive(Clone, Debug)]
pub struct SosProgram {
    nvars: usize,
    var_names: Vec<String>,
    pub constraints: Vec<SosConstraint>,
    objective: Vec<(DecisionVar, f64)>,
}

impl SosProgram {
    pub fn new(nvars: usize) -> Self {
        SosProgram {
            nvars,
            var_names: Vec::new(),
            constraints: Vec::new(),
            objective: Vec::new(),
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn num_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn var_name(&self, v: DecisionVar) -> &str {
        &self.var_names[v.0]
    }

    pub fn new_var(&mut self, name: impl Into<String>) -> DecisionVar {
        self.var_names.push(name.into());
        DecisionVar(self.var_names.len() - 1)
    }

    pub fn new_template(&mut self, name: &str, basis: Vec<Monomial>) -> PolyTemplate {
        let coeff_ids = basis
            .iter()
            .map(|m| self.new_var(format!("{name}[{m}]")))
            .collect();
        PolyTemplate { basis, coeff_ids }
    }

    pub fn add_constraint(
        &mut self,
        label: impl Into<String>,
        expr: AffinePoly,
        domain: SemialgebraicSet,
        degree: u32,
    ) -> Result<(), SosError> {
        if let Some(v) = expr.vars().find(|v| v.0 >= self.num_vars()) {
            return Err(SosError::UnknownVariable(v.0));
        }
        if expr.nvars() != self.nvars || domain.nvars() != self.nvars {
            return Err(PolyError::DimensionMismatch {
                expected: self.nvars,
                found: expr.nvars().max(domain.nvars()),
            }
            .into());
        }
        self.constraints.push(SosConstraint {
            label: label.into(),
            expr,
            domain,
            degree,
        });
        Ok(())
    }

    /// Adds `weight * v` to the minimized objective.
    pub fn minimize(&mut self, v: DecisionVar, weight: f64) -> Result<(), SosError> {
        if v.0 >= self.num_vars() {
            return Err(SosError::UnknownVariable(v.0));
        }
        self.objective.push((v, weight));
        Ok(())
    }

    pub fn objective(&self) -> &[(DecisionVar, f64)] {
        &self.objective
    }

    pub fn has_objective(&self) -> bool {
        !self.objective.is_empty()
    }
}
