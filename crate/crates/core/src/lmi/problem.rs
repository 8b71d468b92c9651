//! Affine matrix-inequality problems.
//!
//! Every constraint is a symmetric map `F(x) = F₀ + Σ terms` required to be
//! negative definite. Matrix variables enter through congruence terms
//! `Lᵀ X R + Rᵀ Xᵀ L`, which covers `P·A + AᵀP`, off-diagonal couplings such as
//! `P·B` and quadratic forms `ΘᵀRΘ` (take `L = R = Θ/√2`). Keeping the factors
//! `L`, `R` instead of expanded coefficient matrices lets the solver assemble
//! its Newton system from small Gram products.
//!
//! Positivity is implied by the variable kind: symmetric blocks must be
//! positive definite and scalars positive. Free matrices are unconstrained.

use std::ops::AddAssign;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    /// Symmetric positive-definite block of the given order.
    Sym(usize),
    /// Positive scalar.
    Scalar,
    /// Unconstrained rows × cols matrix.
    Free(usize, usize),
}

impl VarKind {
    /// Number of scalar unknowns.
    pub fn len(self) -> usize {
        match self {
            VarKind::Sym(n) => n * (n + 1) / 2,
            VarKind::Scalar => 1,
            VarKind::Free(p, q) => p * q,
        }
    }

    /// Shape of the value matrix.
    pub fn shape(self) -> (usize, usize) {
        match self {
            VarKind::Sym(n) => (n, n),
            VarKind::Scalar => (1, 1),
            VarKind::Free(p, q) => (p, q),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    /// `Lᵀ X R + Rᵀ Xᵀ L` with `left` rows×D and `right` cols×D.
    Congruence { var: VarId, left: Mat, right: Mat },
    /// `s · coeff` for a scalar variable.
    Scaled { var: VarId, coeff: Mat },
}

impl Term {
    pub fn var(&self) -> VarId {
        match self {
            Term::Congruence { var, .. } | Term::Scaled { var, .. } => *var,
        }
    }
}

/// `constant + Σ terms ≺ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub constant: Mat,
    pub terms: Vec<Term>,
}

impl Constraint {
    pub fn dim(&self) -> usize {
        self.constant.nrows()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LmiProblem {
    pub vars: Vec<Variable>,
    pub constraints: Vec<Constraint>,
}

/// Values for every variable, in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub values: Vec<Mat>,
}

impl Assignment {
    pub fn get(&self, v: VarId) -> &Mat {
        &self.values[v.0]
    }

    pub fn scalar(&self, v: VarId) -> f64 {
        self.values[v.0][(0, 0)]
    }
}

impl LmiProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind) -> VarId {
        self.vars.push(Variable { name: name.into(), kind });
        VarId(self.vars.len() - 1)
    }

    pub fn sym(&mut self, name: impl Into<String>, n: usize) -> VarId {
        self.add_var(name, VarKind::Sym(n))
    }

    pub fn scalar(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, VarKind::Scalar)
    }

    pub fn free(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> VarId {
        self.add_var(name, VarKind::Free(rows, cols))
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn add_constraint(&mut self, c: Constraint) -> Result<()> {
        self.check_constraint(&c)?;
        self.constraints.push(c);
        Ok(())
    }

    fn check_constraint(&self, c: &Constraint) -> Result<()> {
        let d = c.constant.nrows();
        let bad = |msg: String| Err(Error::Dimension(format!("constraint '{}': {msg}", c.name)));
        if c.constant.ncols() != d {
            return bad("constant is not square".into());
        }
        if !is_symmetric(&c.constant) {
            return bad("constant is not symmetric".into());
        }
        for t in &c.terms {
            let Some(var) = self.vars.get(t.var().0) else {
                return bad(format!("unknown variable id {}", t.var().0));
            };
            match (t, var.kind) {
                (Term::Congruence { left, right, .. }, VarKind::Sym(_) | VarKind::Free(..)) => {
                    let (p, q) = var.kind.shape();
                    if left.shape() != (p, d) || right.shape() != (q, d) {
                        return bad(format!(
                            "congruence factors for '{}' are {:?}/{:?}, expected ({p}, {d})/({q}, {d})",
                            var.name,
                            left.shape(),
                            right.shape()
                        ));
                    }
                }
                (Term::Scaled { coeff, .. }, VarKind::Scalar) => {
                    if coeff.shape() != (d, d) || !is_symmetric(coeff) {
                        return bad(format!("coefficient of '{}' must be symmetric {d}×{d}", var.name));
                    }
                }
                _ => return bad(format!("term kind does not match variable '{}'", var.name)),
            }
        }
        Ok(())
    }

    pub fn num_unknowns(&self) -> usize {
        self.vars.iter().map(|v| v.kind.len()).sum()
    }

    /// Checks that an assignment covers every variable with the right shape.
    pub fn check_assignment(&self, a: &Assignment) -> Result<()> {
        if a.values.len() != self.vars.len() {
            return Err(Error::Dimension(format!(
                "assignment has {} values for {} variables",
                a.values.len(),
                self.vars.len()
            )));
        }
        for (v, x) in self.vars.iter().zip(&a.values) {
            if x.shape() != v.kind.shape() {
                return Err(Error::Dimension(format!(
                    "value of '{}' has shape {:?}, expected {:?}",
                    v.name,
                    x.shape(),
                    v.kind.shape()
                )));
            }
        }
        Ok(())
    }

    /// F(x) for constraint `ci`.
    pub fn evaluate(&self, ci: usize, a: &Assignment) -> Mat {
        let c = &self.constraints[ci];
        let mut f = c.constant.clone();
        for t in &c.terms {
            add_term(&mut f, t, a.get(t.var()));
        }
        symmetrize(&mut f);
        f
    }
}

/// Adds one term evaluated at `x` to `acc`.
pub(crate) fn add_term(acc: &mut Mat, t: &Term, x: &Mat) {
    match t {
        Term::Congruence { left, right, .. } => {
            let m = left.transpose() * (x * right);
            *acc += &m;
            *acc += m.transpose();
        }
        Term::Scaled { coeff, .. } => {
            *acc += coeff * x[(0, 0)];
        }
    }
}

pub fn is_symmetric(m: &Mat) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = m.amax().max(1.0);
    (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= 1e-12 * scale))
}

pub fn symmetrize(m: &mut Mat) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Partition of a constraint's rows/columns into named-by-index blocks.
#[derive(Debug, Clone)]
pub struct BlockLayout {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockLayout {
    pub fn new(sizes: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        let mut o = 0;
        offsets.push(0);
        for s in sizes {
            o += s;
            offsets.push(o);
        }
        Self { sizes: sizes.to_vec(), offsets }
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn size(&self, b: usize) -> usize {
        self.sizes[b]
    }

    pub fn offset(&self, b: usize) -> usize {
        self.offsets[b]
    }

    /// rows × D matrix holding `pieces` in the columns of their blocks.
    pub fn embed(&self, rows: usize, pieces: &[(usize, Mat)]) -> Mat {
        let mut out = Mat::zeros(rows, self.dim());
        for (b, p) in pieces {
            assert_eq!(p.shape(), (rows, self.sizes[*b]), "piece shape for block {b}");
            out.view_mut((0, self.offsets[*b]), p.shape()).add_assign(p);
        }
        out
    }

    /// Adds `piece` at block (bi, bj) and its transpose at (bj, bi).
    pub fn place(&self, target: &mut Mat, bi: usize, bj: usize, piece: &Mat) {
        assert_eq!(piece.shape(), (self.sizes[bi], self.sizes[bj]), "piece shape at ({bi}, {bj})");
        target.view_mut((self.offsets[bi], self.offsets[bj]), piece.shape()).add_assign(piece);
        if bi != bj {
            let pt = piece.transpose();
            target.view_mut((self.offsets[bj], self.offsets[bi]), pt.shape()).add_assign(&pt);
        }
    }

    /// Extracts block (bi, bj).
    pub fn block(&self, m: &Mat, bi: usize, bj: usize) -> Mat {
        m.view((self.offsets[bi], self.offsets[bj]), (self.sizes[bi], self.sizes[bj])).into_owned()
    }
}

/// Incremental assembly of one block-structured constraint.
#[derive(Debug, Clone)]
pub struct ConstraintBuilder {
    name: String,
    layout: BlockLayout,
    constant: Mat,
    scaled: Vec<(VarId, Mat)>,
    congruences: Vec<Term>,
}

impl ConstraintBuilder {
    pub fn new(name: impl Into<String>, layout: BlockLayout) -> Self {
        let d = layout.dim();
        Self { name: name.into(), layout, constant: Mat::zeros(d, d), scaled: Vec::new(), congruences: Vec::new() }
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    /// Constant piece at (bi, bj), mirrored.
    pub fn constant(&mut self, bi: usize, bj: usize, piece: &Mat) -> &mut Self {
        self.layout.place(&mut self.constant, bi, bj, piece);
        self
    }

    /// `s · piece` at (bi, bj), mirrored.
    pub fn scaled(&mut self, var: VarId, bi: usize, bj: usize, piece: &Mat) -> &mut Self {
        let d = self.layout.dim();
        let idx = match self.scaled.iter().position(|(v, _)| *v == var) {
            Some(i) => i,
            None => {
                self.scaled.push((var, Mat::zeros(d, d)));
                self.scaled.len() - 1
            }
        };
        self.layout.place(&mut self.scaled[idx].1, bi, bj, piece);
        self
    }

    /// `Lᵀ X R + Rᵀ Xᵀ L` with L, R assembled from per-block pieces.
    pub fn congruence(&mut self, var: VarId, kind: VarKind, left: &[(usize, Mat)], right: &[(usize, Mat)]) -> &mut Self {
        let (p, q) = kind.shape();
        let left = self.layout.embed(p, left);
        let right = self.layout.embed(q, right);
        self.congruences.push(Term::Congruence { var, left, right });
        self
    }

    pub fn build(self) -> Constraint {
        let mut terms = self.congruences;
        terms.extend(self.scaled.into_iter().map(|(var, coeff)| Term::Scaled { var, coeff }));
        Constraint { name: self.name, constant: self.constant, terms }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn congruence_evaluates_lyapunov_form() {
        let mut p = LmiProblem::new();
        let x = p.sym("P", 2);
        let a = Mat::from_row_slice(2, 2, &[-1.0, 2.0, 0.0, -3.0]);
        let mut b = ConstraintBuilder::new("lyap", BlockLayout::new(&[2]));
        b.congruence(x, VarKind::Sym(2), &[(0, Mat::identity(2, 2))], &[(0, a.clone())]);
        p.add_constraint(b.build()).unwrap();
        let pv = Mat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let asg = Assignment { values: vec![pv.clone()] };
        let f = p.evaluate(0, &asg);
        let expect = &pv * &a + a.transpose() * &pv;
        assert!((f - expect).amax() < 1e-14);
    }

    #[test]
    fn builder_places_mirrored_blocks() {
        let layout = BlockLayout::new(&[2, 1]);
        let mut b = ConstraintBuilder::new("c", layout);
        b.constant(0, 1, &Mat::from_column_slice(2, 1, &[1.0, 2.0]));
        let c = b.build();
        assert_eq!(c.constant[(2, 0)], 1.0);
        assert_eq!(c.constant[(1, 2)], 2.0);
        assert!(is_symmetric(&c.constant));
    }

    #[test]
    fn rejects_bad_shapes() {
        let mut p = LmiProblem::new();
        let s = p.scalar("a");
        let c = Constraint {
            name: "c".into(),
            constant: Mat::zeros(2, 2),
            terms: vec![Term::Scaled { var: s, coeff: Mat::zeros(3, 3) }],
        };
        assert!(p.add_constraint(c).is_err());
        let c = Constraint {
            name: "c".into(),
            constant: Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            terms: vec![],
        };
        assert!(p.add_constraint(c).is_err());
    }
}
