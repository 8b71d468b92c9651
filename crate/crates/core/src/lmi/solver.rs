//! Phase-I barrier method for LMI feasibility.
//!
//! Solves `min t` subject to `F_c(x) ≼ tI` for every constraint, `−X ≼ tI`
//! for symmetric blocks, `−s ≤ t` for scalars, and a trust box (`X ≼ ρI`,
//! `s ≤ ρ`, `‖Y‖₂ ≤ ρ` for free matrices). The optimum t* is the best uniform
//! margin: the problem is feasible iff t* < 0.
//!
//! Each barrier block is `S(x, t) = S₀ + c·t·I + Σ terms`. The Newton system
//! `H_ij = Σ tr(Z A_i Z A_j)`, `Z = S⁻¹`, is assembled from Gram products of
//! the congruence factors: for a basis element `A = Σ (x yᵀ + y xᵀ)` with x, y
//! rows of L and R,
//! `tr(Z(xyᵀ+yxᵀ)Z(uvᵀ+vuᵀ)) = 2[(yᵀZu)(xᵀZv) + (yᵀZv)(xᵀZu)]`.

use nalgebra::{Cholesky, DVector, Dyn};

use super::problem::{Assignment, LmiProblem, Mat, Term, VarKind};
use super::verify::{verify_certificate, LmiCertificate};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Margin a certificate must clear (eigenvalues beyond ±tol).
    pub margin_tol: f64,
    /// Trust-box radius ρ.
    pub trust_radius: f64,
    /// Barrier weight growth per outer iteration.
    pub growth: f64,
    /// Total Newton-step budget.
    pub max_newton: usize,
    /// Return as soon as a verified certificate is found instead of maximizing the margin.
    pub stop_at_feasible: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { margin_tol: 1e-9, trust_radius: 1e4, growth: 16.0, max_newton: 1500, stop_at_feasible: true }
    }
}

#[derive(Debug, Clone)]
pub enum Verdict {
    Feasible(LmiCertificate),
    /// Phase-I converged with optimal margin ≥ `lower_bound` ≥ −tol.
    Infeasible { lower_bound: f64, best_margin: f64 },
}

impl Verdict {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Verdict::Feasible(_))
    }

    pub fn certificate(&self) -> Option<&LmiCertificate> {
        match self {
            Verdict::Feasible(c) => Some(c),
            Verdict::Infeasible { .. } => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub verdict: Verdict,
    pub newton_steps: usize,
    /// Best uniform margin t reached.
    pub margin: f64,
}

pub fn solve_feasibility(problem: &LmiProblem) -> Result<Verdict> {
    solve_with(problem, &SolverOptions::default()).map(|r| r.verdict)
}

pub fn solve_with(problem: &LmiProblem, opts: &SolverOptions) -> Result<SolveReport> {
    Solver::new(problem, opts).run()
}

struct Cong {
    var: usize,
    l: Mat,
    r: Mat,
}

struct Scal {
    var: usize,
    c: Mat,
}

struct Block {
    tc: f64,
    constant: Mat,
    cong: Vec<Cong>,
    scal: Vec<Scal>,
}

impl Block {
    fn dim(&self) -> usize {
        self.constant.nrows()
    }
}

/// Basis element of a variable: pairs (a, b) meaning `ℓ_a r_bᵀ + r_b ℓ_aᵀ`.
type Pairs = Vec<(usize, usize)>;

struct Solver<'a> {
    problem: &'a LmiProblem,
    opts: &'a SolverOptions,
    blocks: Vec<Block>,
    offsets: Vec<usize>,
    basis: Vec<Vec<Pairs>>,
    m: usize,
    nu: f64,
}

fn basis_of(kind: VarKind) -> Vec<Pairs> {
    match kind {
        VarKind::Sym(n) => {
            let mut out = Vec::with_capacity(n * (n + 1) / 2);
            for k in 0..n {
                for l in k..n {
                    out.push(if k == l { vec![(k, k)] } else { vec![(k, l), (l, k)] });
                }
            }
            out
        }
        VarKind::Scalar => vec![vec![(0, 0)]],
        VarKind::Free(p, q) => (0..p).flat_map(|a| (0..q).map(move |b| vec![(a, b)])).collect(),
    }
}

/// Unknowns of one variable → value matrix.
fn unflatten(kind: VarKind, x: &[f64]) -> Mat {
    match kind {
        VarKind::Sym(n) => {
            let mut m = Mat::zeros(n, n);
            let mut i = 0;
            for k in 0..n {
                for l in k..n {
                    m[(k, l)] = x[i];
                    m[(l, k)] = x[i];
                    i += 1;
                }
            }
            m
        }
        VarKind::Scalar => Mat::from_element(1, 1, x[0]),
        VarKind::Free(p, q) => Mat::from_row_slice(p, q, x),
    }
}

fn flatten(kind: VarKind, m: &Mat, out: &mut [f64]) {
    match kind {
        VarKind::Sym(n) => {
            let mut i = 0;
            for k in 0..n {
                for l in k..n {
                    out[i] = m[(k, l)];
                    i += 1;
                }
            }
        }
        VarKind::Scalar => out[0] = m[(0, 0)],
        VarKind::Free(p, q) => {
            for a in 0..p {
                for b in 0..q {
                    out[a * q + b] = m[(a, b)];
                }
            }
        }
    }
}

fn trace_product(a: &Mat, b: &Mat) -> f64 {
    // tr(A B) for square A, B.
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    s
}

struct Eval {
    logdet: f64,
    z: Vec<Mat>,
}

impl<'a> Solver<'a> {
    fn new(problem: &'a LmiProblem, opts: &'a SolverOptions) -> Self {
        let rho = opts.trust_radius;
        let mut offsets = Vec::with_capacity(problem.vars.len() + 1);
        let mut o = 0;
        for v in &problem.vars {
            offsets.push(o);
            o += v.kind.len();
        }
        offsets.push(o);
        let basis = problem.vars.iter().map(|v| basis_of(v.kind)).collect();

        let mut blocks = Vec::new();
        for c in &problem.constraints {
            // tI − F(x) ≻ 0
            let mut b = Block { tc: 1.0, constant: -&c.constant, cong: Vec::new(), scal: Vec::new() };
            for t in &c.terms {
                match t {
                    Term::Congruence { var, left, right } => {
                        b.cong.push(Cong { var: var.0, l: left.clone(), r: -right })
                    }
                    Term::Scaled { var, coeff } => b.scal.push(Scal { var: var.0, c: -coeff }),
                }
            }
            blocks.push(b);
        }
        for (vi, v) in problem.vars.iter().enumerate() {
            match v.kind {
                VarKind::Sym(n) => {
                    let id = Mat::identity(n, n);
                    blocks.push(Block {
                        tc: 1.0,
                        constant: Mat::zeros(n, n),
                        cong: vec![Cong { var: vi, l: id.clone(), r: &id * 0.5 }],
                        scal: vec![],
                    });
                    blocks.push(Block {
                        tc: 0.0,
                        constant: &id * rho,
                        cong: vec![Cong { var: vi, l: id.clone(), r: &id * -0.5 }],
                        scal: vec![],
                    });
                }
                VarKind::Scalar => {
                    let one = Mat::from_element(1, 1, 1.0);
                    blocks.push(Block { tc: 1.0, constant: Mat::zeros(1, 1), cong: vec![], scal: vec![Scal { var: vi, c: one.clone() }] });
                    blocks.push(Block { tc: 0.0, constant: &one * rho, cong: vec![], scal: vec![Scal { var: vi, c: -one }] });
                }
                VarKind::Free(p, q) => {
                    let d = p + q;
                    let mut l = Mat::zeros(p, d);
                    let mut r = Mat::zeros(q, d);
                    l.view_mut((0, 0), (p, p)).fill_with_identity();
                    r.view_mut((0, p), (q, q)).fill_with_identity();
                    blocks.push(Block { tc: 0.0, constant: Mat::identity(d, d) * rho, cong: vec![Cong { var: vi, l, r }], scal: vec![] });
                }
            }
        }
        let nu = blocks.iter().map(|b| b.dim() as f64).sum();
        Self { problem, opts, blocks, offsets, basis, m: o, nu }
    }

    fn values(&self, y: &[f64]) -> Vec<Mat> {
        self.problem
            .vars
            .iter()
            .enumerate()
            .map(|(i, v)| unflatten(v.kind, &y[self.offsets[i]..self.offsets[i + 1]]))
            .collect()
    }

    fn block_matrix(&self, b: &Block, vals: &[Mat], t: f64) -> Mat {
        let mut s = b.constant.clone();
        if b.tc != 0.0 {
            for i in 0..s.nrows() {
                s[(i, i)] += b.tc * t;
            }
        }
        for c in &b.cong {
            let m = c.l.transpose() * (&vals[c.var] * &c.r);
            s += &m;
            s += m.transpose();
        }
        for sc in &b.scal {
            s += &sc.c * vals[sc.var][(0, 0)];
        }
        s
    }

    /// Barrier value pieces; None if some block is not positive definite.
    fn evaluate(&self, y: &[f64], want_inverse: bool) -> Option<Eval> {
        let t = y[self.m];
        let vals = self.values(y);
        let mut logdet = 0.0;
        let mut z = Vec::with_capacity(if want_inverse { self.blocks.len() } else { 0 });
        for b in &self.blocks {
            let s = self.block_matrix(b, &vals, t);
            let chol = Cholesky::<f64, Dyn>::new(s)?;
            let l = chol.l_dirty();
            let mut ld = 0.0;
            for i in 0..l.nrows() {
                let d = l[(i, i)];
                if !(d > 0.0) || !d.is_finite() {
                    return None;
                }
                ld += d.ln();
            }
            logdet += 2.0 * ld;
            if want_inverse {
                z.push(chol.inverse());
            }
        }
        Some(Eval { logdet, z })
    }

    fn objective(&self, y: &[f64], tau: f64) -> Option<f64> {
        self.evaluate(y, false).map(|e| tau * y[self.m] - e.logdet)
    }

    /// Gradient and Hessian of τ·t − Σ log det S at y.
    fn newton_system(&self, y: &[f64], tau: f64) -> Option<(DVector<f64>, Mat, f64)> {
        let ev = self.evaluate(y, true)?;
        let n = self.m + 1;
        let ti = self.m;
        let mut g = DVector::zeros(n);
        let mut h = Mat::zeros(n, n);
        g[ti] = tau;

        for (b, z) in self.blocks.iter().zip(&ev.z) {
            let lz: Vec<Mat> = b.cong.iter().map(|c| &c.l * z).collect();
            let rz: Vec<Mat> = b.cong.iter().map(|c| &c.r * z).collect();
            let zc: Vec<Mat> = b.scal.iter().map(|s| z * &s.c).collect();

            // congruence terms: gradient and t coupling
            for (k, c) in b.cong.iter().enumerate() {
                let glr = &lz[k] * c.r.transpose();
                let gt = if b.tc != 0.0 { Some(&lz[k] * rz[k].transpose()) } else { None };
                let off = self.offsets[c.var];
                for (e, pairs) in self.basis[c.var].iter().enumerate() {
                    let mut gv = 0.0;
                    let mut tv = 0.0;
                    for &(a, bb) in pairs {
                        gv += 2.0 * glr[(a, bb)];
                        if let Some(gt) = &gt {
                            tv += 2.0 * gt[(a, bb)];
                        }
                    }
                    g[off + e] -= gv;
                    if gt.is_some() {
                        h[(off + e, ti)] += b.tc * tv;
                        h[(ti, off + e)] += b.tc * tv;
                    }
                }
            }
            // congruence × congruence
            for k1 in 0..b.cong.len() {
                for k2 in k1..b.cong.len() {
                    let c1 = &b.cong[k1];
                    let c2 = &b.cong[k2];
                    let gll = &lz[k1] * c2.l.transpose();
                    let glr = &lz[k1] * c2.r.transpose();
                    let grl = &rz[k1] * c2.l.transpose();
                    let grr = &rz[k1] * c2.r.transpose();
                    let o1 = self.offsets[c1.var];
                    let o2 = self.offsets[c2.var];
                    for (e1, p1) in self.basis[c1.var].iter().enumerate() {
                        for (e2, p2) in self.basis[c2.var].iter().enumerate() {
                            let mut v = 0.0;
                            for &(a, bb) in p1 {
                                for &(cc, d) in p2 {
                                    v += grl[(bb, cc)] * glr[(a, d)] + grr[(bb, d)] * gll[(a, cc)];
                                }
                            }
                            v *= 2.0;
                            h[(o1 + e1, o2 + e2)] += v;
                            if k1 != k2 {
                                h[(o2 + e2, o1 + e1)] += v;
                            }
                        }
                    }
                }
            }
            // scaled terms
            for (k, s) in b.scal.iter().enumerate() {
                let i = self.offsets[s.var];
                g[i] -= zc[k].trace();
                let w = &zc[k] * z;
                if b.tc != 0.0 {
                    let v = b.tc * w.trace();
                    h[(i, ti)] += v;
                    h[(ti, i)] += v;
                }
                for k2 in k..b.scal.len() {
                    let j = self.offsets[b.scal[k2].var];
                    let v = trace_product(&zc[k], &zc[k2]);
                    h[(i, j)] += v;
                    if k2 != k {
                        h[(j, i)] += v;
                    }
                }
                for c in &b.cong {
                    let mm = (&c.l * &w) * c.r.transpose();
                    let off = self.offsets[c.var];
                    for (e, pairs) in self.basis[c.var].iter().enumerate() {
                        let v: f64 = pairs.iter().map(|&(a, bb)| 2.0 * mm[(a, bb)]).sum();
                        h[(i, off + e)] += v;
                        h[(off + e, i)] += v;
                    }
                }
            }
            if b.tc != 0.0 {
                g[ti] -= b.tc * z.trace();
                h[(ti, ti)] += b.tc * b.tc * z.norm_squared();
            }
        }
        Some((g, h, tau * y[ti] - ev.logdet))
    }

    fn newton_direction(g: &DVector<f64>, h: &Mat) -> Option<DVector<f64>> {
        let scale = (0..h.nrows()).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
        let mut reg = 0.0;
        for _ in 0..8 {
            let mut hr = h.clone();
            if reg > 0.0 {
                for i in 0..hr.nrows() {
                    hr[(i, i)] += reg * scale;
                }
            }
            if let Some(ch) = Cholesky::new(hr) {
                let d = ch.solve(&(-g));
                if d.iter().all(|v| v.is_finite()) {
                    return Some(d);
                }
            }
            reg = if reg == 0.0 { 1e-14 } else { reg * 100.0 };
        }
        None
    }

    fn initial_point(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.m + 1];
        // strictly inside the trust box ρI − X ≻ 0
        let c = (0.5 * self.opts.trust_radius).min(1.0);
        for (i, v) in self.problem.vars.iter().enumerate() {
            let init = match v.kind {
                VarKind::Sym(n) => Mat::identity(n, n) * c,
                VarKind::Scalar => Mat::from_element(1, 1, c),
                VarKind::Free(p, q) => Mat::zeros(p, q),
            };
            flatten(v.kind, &init, &mut y[self.offsets[i]..self.offsets[i + 1]]);
        }
        // t strictly above every eigenvalue of the t-blocks at t = 0
        let vals = self.values(&y);
        let mut worst: f64 = 0.0;
        for b in &self.blocks {
            if b.tc != 0.0 {
                let s = self.block_matrix(b, &vals, 0.0);
                let lmin = s.symmetric_eigenvalues().min();
                worst = worst.max(-lmin / b.tc);
            }
        }
        y[self.m] = worst + 1.0;
        y
    }

    fn certificate(&self, y: &[f64]) -> Option<LmiCertificate> {
        let a = Assignment { values: self.values(y) };
        let cert = verify_certificate(self.problem, &a, self.opts.margin_tol).ok()?;
        cert.feasible.then_some(cert)
    }

    fn run(&self) -> Result<SolveReport> {
        let mut y = self.initial_point();
        let mut tau = self.nu / y[self.m].abs().max(1.0);
        let mut steps = 0usize;
        let tol = self.opts.margin_tol;
        let mut best = (y[self.m], y.clone());

        loop {
            // centering
            let mut centered = false;
            for _ in 0..200 {
                let Some((g, h, f)) = self.newton_system(&y, tau) else {
                    return Err(Error::NumericalBreakdown("iterate left the barrier domain".into()));
                };
                let Some(dir) = Self::newton_direction(&g, &h) else {
                    return Err(Error::NumericalBreakdown("singular Newton system".into()));
                };
                let dec = -g.dot(&dir);
                if dec < 1e-9 {
                    centered = true;
                    break;
                }
                steps += 1;
                if steps > self.opts.max_newton {
                    return Err(Error::NumericalBreakdown(format!(
                        "no convergence after {} Newton steps (margin {:.3e}, gap {:.3e})",
                        self.opts.max_newton,
                        y[self.m],
                        self.nu / tau
                    )));
                }
                let mut alpha = 1.0;
                let mut accepted = false;
                let mut trial = y.clone();
                while alpha > 1e-14 {
                    for i in 0..trial.len() {
                        trial[i] = y[i] + alpha * dir[i];
                    }
                    if let Some(fn_) = self.objective(&trial, tau) {
                        if fn_ <= f - 0.01 * alpha * dec {
                            accepted = true;
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                if !accepted {
                    // no descent possible at working precision
                    centered = dec < 1e-6;
                    break;
                }
                y = trial;
                if y[self.m] < best.0 {
                    best = (y[self.m], y.clone());
                }
                if self.opts.stop_at_feasible && y[self.m] < -tol {
                    if let Some(cert) = self.certificate(&y) {
                        return Ok(SolveReport { verdict: Verdict::Feasible(cert), newton_steps: steps, margin: y[self.m] });
                    }
                }
            }
            let t = y[self.m];
            let gap = self.nu / tau;
            if centered && t - gap > -tol {
                return Ok(SolveReport {
                    verdict: Verdict::Infeasible { lower_bound: t - gap, best_margin: best.0 },
                    newton_steps: steps,
                    margin: best.0,
                });
            }
            if centered && gap < 1e-9 * t.abs().max(1.0) {
                // converged with t* < −tol
                if let Some(cert) = self.certificate(&best.1) {
                    return Ok(SolveReport { verdict: Verdict::Feasible(cert), newton_steps: steps, margin: best.0 });
                }
                return Ok(SolveReport {
                    verdict: Verdict::Infeasible { lower_bound: t - gap, best_margin: best.0 },
                    newton_steps: steps,
                    margin: best.0,
                });
            }
            if !centered && tau > 1e20 {
                return Err(Error::NumericalBreakdown(format!("stalled at margin {t:.3e}, gap {gap:.3e}")));
            }
            tau *= self.opts.growth;
        }
    }
}
