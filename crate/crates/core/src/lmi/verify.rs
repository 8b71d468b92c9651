//! Solver-independent certificate checking by symmetric eigen-decomposition.

use super::problem::{Assignment, LmiProblem, VarKind};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginKind {
    /// Largest eigenvalue of a constraint that must be negative definite.
    MaxEig,
    /// Smallest eigenvalue of a variable that must be positive.
    MinEig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Margin {
    pub name: String,
    pub kind: MarginKind,
    pub value: f64,
}

impl Margin {
    pub fn passes(&self, tol: f64) -> bool {
        match self.kind {
            MarginKind::MaxEig => self.value < -tol,
            MarginKind::MinEig => self.value > tol,
        }
    }
}

/// Assignment together with its extreme eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiCertificate {
    pub assignment: Assignment,
    pub margins: Vec<Margin>,
    pub feasible: bool,
}

impl LmiCertificate {
    pub fn margin(&self, name: &str) -> Option<f64> {
        self.margins.iter().find(|m| m.name == name).map(|m| m.value)
    }
}

/// Recomputes every constraint matrix and reports its extreme eigenvalue.
pub fn verify_certificate(problem: &LmiProblem, assignment: &Assignment, tol: f64) -> Result<LmiCertificate> {
    problem.check_assignment(assignment)?;
    let mut margins = Vec::new();
    for (ci, c) in problem.constraints.iter().enumerate() {
        let f = problem.evaluate(ci, assignment);
        let value = if f.iter().all(|v| v.is_finite()) { f.symmetric_eigenvalues().max() } else { f64::NAN };
        margins.push(Margin { name: c.name.clone(), kind: MarginKind::MaxEig, value });
    }
    for (v, x) in problem.vars.iter().zip(&assignment.values) {
        let value = match v.kind {
            VarKind::Sym(_) => {
                let mut s = x.clone();
                super::problem::symmetrize(&mut s);
                s.symmetric_eigenvalues().min()
            }
            VarKind::Scalar => x[(0, 0)],
            VarKind::Free(..) => continue,
        };
        margins.push(Margin { name: v.name.clone(), kind: MarginKind::MinEig, value });
    }
    let feasible = margins.iter().all(|m| m.passes(tol));
    Ok(LmiCertificate { assignment: assignment.clone(), margins, feasible })
}
