//! Reduced modal models, observer/controller gain design and closed-loop
//! matrices.
//!
//! State ordering of the controller part: `col{u, w₀, …, w_{N₀}}` where u is the
//! lifted boundary-input state (u̇ = −μu + v). Observer modes N₀+1..N form the
//! "tail" blocks A₁, B₁, C₁.

use crate::error::{Error, Result};
use crate::lmi::{solve_with, BlockLayout, ConstraintBuilder, LmiProblem, Mat, SolverOptions, VarKind, Verdict};
use crate::spectral::{eigenvalue, input_coefficient, phi, psi, MU, PSI_NORM_SQ};

/// |c| below this counts as a zero of the measurement functional.
const ZERO_TOL: f64 = 1e-12;

/// Margin a designed or supplied gain must clear.
pub const CERT_TOL: f64 = 1e-9;

/// Smallest N₀ with −λ_n + σ < −δ for every n > N₀.
pub fn minimal_controller_dimension(sigma: f64, delta: f64) -> usize {
    let mut n0 = 0;
    while eigenvalue(n0 + 1) <= sigma + delta {
        n0 += 1;
    }
    n0
}

fn diag(v: &[f64]) -> Mat {
    let n = v.len();
    Mat::from_fn(n, n, |i, j| if i == j { v[i] } else { 0.0 })
}

fn col(v: &[f64]) -> Mat {
    Mat::from_column_slice(v.len(), 1, v)
}

fn row(v: &[f64]) -> Mat {
    Mat::from_row_slice(1, v.len(), v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModel {
    pub n0: usize,
    pub n: usize,
    pub x_star: f64,
    pub a0: Mat,
    pub a0_tilde: Mat,
    pub b0: Mat,
    pub b0_tilde: Mat,
    pub c0: Mat,
    pub c0_tilde: Mat,
    pub c1: Mat,
    pub a1: Mat,
    pub b1: Mat,
}

pub fn build_reduced_model(n0: usize, n: usize, x_star: f64) -> Result<ReducedModel> {
    if n < n0 {
        return Err(Error::Dimension(format!("N = {n} must be at least N0 = {n0}")));
    }
    if !(0.0..=1.0).contains(&x_star) {
        return Err(Error::Domain(format!("x* = {x_star} outside [0, 1]")));
    }
    let c: Vec<f64> = (0..=n).map(|k| phi(k, x_star)).collect();
    if let Some(k) = (0..=n0).find(|&k| c[k].abs() < ZERO_TOL) {
        return Err(Error::AssumptionViolated(format!("c_{k} = φ_{k}(x*) = 0 at x* = {x_star}")));
    }
    let lam: Vec<f64> = (0..=n).map(|k| -eigenvalue(k)).collect();
    let b: Vec<f64> = (0..=n).map(input_coefficient).collect();
    let mut at = vec![-MU];
    at.extend_from_slice(&lam[..=n0]);
    let mut bt = vec![1.0];
    bt.extend_from_slice(&b[..=n0]);
    let mut ct = vec![psi(x_star)];
    ct.extend_from_slice(&c[..=n0]);
    Ok(ReducedModel {
        n0,
        n,
        x_star,
        a0: diag(&lam[..=n0]),
        a0_tilde: diag(&at),
        b0: col(&b[..=n0]),
        b0_tilde: col(&bt),
        c0: row(&c[..=n0]),
        c0_tilde: row(&ct),
        c1: row(&c[n0 + 1..]),
        a1: diag(&lam[n0 + 1..]),
        b1: col(&b[n0 + 1..]),
    })
}

impl ReducedModel {
    /// Observer modes outside the controller: N − N₀.
    pub fn tail(&self) -> usize {
        self.n - self.n0
    }

    /// Delayed designs also measure the input state through ψ(x*).
    pub fn require_delayed(&self) -> Result<()> {
        if psi(self.x_star).abs() < ZERO_TOL {
            return Err(Error::AssumptionViolated(format!("ψ(x*) = 0 at x* = {}", self.x_star)));
        }
        Ok(())
    }

    /// Design pair for the observer: (A₀, C₀) or, delayed, (Ã₀, C̃₀).
    pub fn observer_pair(&self, delayed: bool) -> (&Mat, &Mat) {
        if delayed {
            (&self.a0_tilde, &self.c0_tilde)
        } else {
            (&self.a0, &self.c0)
        }
    }

    /// Hautus test on the diagonal pair: distinct eigenvalues and nonzero outputs.
    pub fn observable(&self, delayed: bool) -> bool {
        let (a, c) = self.observer_pair(delayed);
        hautus_diagonal(a, c.iter().copied())
    }

    /// Hautus test for (Ã₀, B̃₀).
    pub fn controllable(&self) -> bool {
        hautus_diagonal(&self.a0_tilde, self.b0_tilde.iter().copied())
    }
}

fn hautus_diagonal(a: &Mat, coupling: impl Iterator<Item = f64>) -> bool {
    let d: Vec<f64> = (0..a.nrows()).map(|i| a[(i, i)]).collect();
    let distinct = d.iter().enumerate().all(|(i, x)| d[..i].iter().all(|y| (x - y).abs() > ZERO_TOL));
    distinct && coupling.into_iter().all(|c| c.abs() >= ZERO_TOL)
}

/// Observer gain L₀ (column) and controller gain K₀ (row), with optional
/// Lyapunov certificates.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSet {
    pub l0: Mat,
    pub k0: Mat,
    pub p_o: Option<Mat>,
    pub p_c: Option<Mat>,
    pub delta: f64,
}

impl GainSet {
    pub fn new(l0: &[f64], k0: &[f64], delta: f64) -> Self {
        Self { l0: col(l0), k0: row(k0), p_o: None, p_c: None, delta }
    }

    /// Gains of the reference non-delayed example (N₀ = 0, x* = 0, δ = 0.001).
    pub fn reference_nodelay() -> Self {
        Self::new(&[2.75], &[-5.468, 32.19], 1e-3)
    }

    /// Gains of the reference delayed example (N₀ = 0, x* = 0, δ = 0.001).
    pub fn reference_delayed() -> Self {
        Self::new(&[7.33, 1.01], &[1.95, 0.55], 1e-3)
    }
}

/// P(A − LC) + (A − LC)ᵀP + 2δP.
pub fn observer_inequality(a: &Mat, l: &Mat, c: &Mat, p: &Mat, delta: f64) -> Mat {
    let acl = a - l * c;
    lyapunov_form(&acl, p, delta)
}

/// P(Ã₀ − B̃₀K₀) + (Ã₀ − B̃₀K₀)ᵀP + 2δP.
pub fn controller_inequality(a: &Mat, b: &Mat, k: &Mat, p: &Mat, delta: f64) -> Mat {
    let acl = a - b * k;
    lyapunov_form(&acl, p, delta)
}

fn lyapunov_form(acl: &Mat, p: &Mat, delta: f64) -> Mat {
    let m = p * acl;
    let mut out = &m + m.transpose() + p * (2.0 * delta);
    crate::lmi::problem::symmetrize(&mut out);
    out
}

/// Eigenvalue check of a Lyapunov certificate: (max eig of the inequality, min eig of P).
pub fn certificate_margins(ineq: &Mat, p: &Mat) -> (f64, f64) {
    (ineq.clone().symmetric_eigenvalues().max(), p.clone().symmetric_eigenvalues().min())
}

pub fn certificate_holds(ineq: &Mat, p: &Mat) -> bool {
    let (hi, lo) = certificate_margins(ineq, p);
    hi < -CERT_TOL && lo > CERT_TOL
}

fn design_options() -> SolverOptions {
    // A unit trust box keeps the margin-maximal gains moderate: ‖L‖ ≲ 1/|t*|.
    SolverOptions { trust_radius: 1.0, stop_at_feasible: false, ..Default::default() }
}

fn normalize(p: &Mat) -> Mat {
    let s = p.clone().symmetric_eigenvalues().max();
    p / s
}

/// Observer gain by Y = P_o L₀: P_oA + AᵀP_o − YC − CᵀYᵀ + 2δP_o ≺ 0.
pub fn design_observer_gain(model: &ReducedModel, delta: f64, delayed: bool) -> Result<(Mat, Mat)> {
    if delayed {
        model.require_delayed()?;
    }
    let (a, c) = model.observer_pair(delayed);
    let n = a.nrows();
    let mut prob = LmiProblem::new();
    let p = prob.sym("P_o", n);
    let y = prob.free("Y", n, 1);
    let id = Mat::identity(n, n);
    let mut b = ConstraintBuilder::new("observer", BlockLayout::new(&[n]));
    b.congruence(p, VarKind::Sym(n), &[(0, id.clone())], &[(0, a + &id * delta)]);
    b.congruence(y, VarKind::Free(n, 1), &[(0, id)], &[(0, -c)]);
    prob.add_constraint(b.build())?;
    let report = solve_with(&prob, &design_options()).map_err(|e| Error::SynthesisFailed(e.to_string()))?;
    let Verdict::Feasible(cert) = report.verdict else {
        return Err(Error::SynthesisFailed("observer inequality infeasible".into()));
    };
    let pv = cert.assignment.get(p).clone();
    let l = pv.clone().try_inverse().ok_or_else(|| Error::SynthesisFailed("singular P_o".into()))? * cert.assignment.get(y);
    let pv = normalize(&pv);
    if !certificate_holds(&observer_inequality(a, &l, c, &pv, delta), &pv) {
        return Err(Error::SynthesisFailed("observer certificate failed re-verification".into()));
    }
    Ok((l, pv))
}

/// Controller gain by Q = P_c⁻¹, Z = K₀Q: ÃQ + QÃᵀ − B̃Z − ZᵀB̃ᵀ + 2δQ ≺ 0.
pub fn design_controller_gain(model: &ReducedModel, delta: f64) -> Result<(Mat, Mat)> {
    let a = &model.a0_tilde;
    let bt = &model.b0_tilde;
    let n = a.nrows();
    let mut prob = LmiProblem::new();
    let q = prob.sym("Q", n);
    let z = prob.free("Z", 1, n);
    let id = Mat::identity(n, n);
    let mut b = ConstraintBuilder::new("controller", BlockLayout::new(&[n]));
    b.congruence(q, VarKind::Sym(n), &[(0, (a + &id * delta).transpose())], &[(0, id.clone())]);
    b.congruence(z, VarKind::Free(1, n), &[(0, -bt.transpose())], &[(0, id)]);
    prob.add_constraint(b.build())?;
    let report = solve_with(&prob, &design_options()).map_err(|e| Error::SynthesisFailed(e.to_string()))?;
    let Verdict::Feasible(cert) = report.verdict else {
        return Err(Error::SynthesisFailed("controller inequality infeasible".into()));
    };
    let qinv = cert.assignment.get(q).clone().try_inverse().ok_or_else(|| Error::SynthesisFailed("singular Q".into()))?;
    let k = cert.assignment.get(z) * &qinv;
    let pc = normalize(&qinv);
    if !certificate_holds(&controller_inequality(a, bt, &k, &pc, delta), &pc) {
        return Err(Error::SynthesisFailed("controller certificate failed re-verification".into()));
    }
    Ok((k, pc))
}

/// Full design: observer and controller gains with certificates.
pub fn design_gains(model: &ReducedModel, delta: f64, delayed: bool) -> Result<GainSet> {
    let (l0, p_o) = design_observer_gain(model, delta, delayed)?;
    let (k0, p_c) = design_controller_gain(model, delta)?;
    Ok(GainSet { l0, k0, p_o: Some(p_o), p_c: Some(p_c), delta })
}

/// Solves (A + δI)ᵀP + P(A + δI) = −I by vectorization; returns None when
/// A + δI is not Hurwitz (the solution is then not positive definite).
pub fn lyapunov_certificate(acl: &Mat, delta: f64) -> Option<Mat> {
    let n = acl.nrows();
    let a = acl + Mat::identity(n, n) * delta;
    let id = Mat::identity(n, n);
    let k = id.kronecker(&a.transpose()) + a.transpose().kronecker(&id);
    let rhs = -Mat::identity(n, n);
    let rhs = nalgebra::DVector::from_column_slice(rhs.as_slice());
    let sol = k.lu().solve(&rhs)?;
    let mut p = Mat::from_column_slice(n, n, sol.as_slice());
    crate::lmi::problem::symmetrize(&mut p);
    (p.clone().symmetric_eigenvalues().min() > 0.0).then_some(p)
}

/// Finds P for fixed gains: Lyapunov equation, then the LMI solver as fallback.
pub fn certify_gain(acl: &Mat, delta: f64) -> Option<Mat> {
    if let Some(p) = lyapunov_certificate(acl, delta) {
        if certificate_holds(&lyapunov_form(acl, &p, delta), &p) {
            return Some(p);
        }
    }
    let n = acl.nrows();
    let mut prob = LmiProblem::new();
    let p = prob.sym("P", n);
    let id = Mat::identity(n, n);
    let mut b = ConstraintBuilder::new("lyapunov", BlockLayout::new(&[n]));
    b.congruence(p, VarKind::Sym(n), &[(0, id.clone())], &[(0, acl + id * delta)]);
    prob.add_constraint(b.build()).ok()?;
    let report = solve_with(&prob, &SolverOptions::default()).ok()?;
    report.verdict.certificate().map(|c| c.assignment.get(p).clone())
}

/// Outcome of checking a supplied gain against its Lyapunov inequality.
#[derive(Debug, Clone)]
pub struct GainCheck {
    pub name: &'static str,
    pub closed_loop: Mat,
    pub certificate: Option<Mat>,
    /// Max eigenvalue of the inequality matrix at the certificate (NaN without one).
    pub max_eig: f64,
    pub min_eig_p: f64,
}

impl GainCheck {
    pub fn holds(&self) -> bool {
        self.max_eig < -CERT_TOL && self.min_eig_p > CERT_TOL
    }

    /// Spectral abscissa of the closed-loop matrix.
    pub fn abscissa(&self) -> f64 {
        self.closed_loop.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }
}

fn check(name: &'static str, acl: Mat, delta: f64) -> GainCheck {
    match certify_gain(&acl, delta) {
        Some(p) => {
            let (hi, lo) = certificate_margins(&lyapunov_form(&acl, &p, delta), &p);
            GainCheck { name, closed_loop: acl, certificate: Some(p), max_eig: hi, min_eig_p: lo }
        }
        None => GainCheck { name, closed_loop: acl, certificate: None, max_eig: f64::NAN, min_eig_p: f64::NAN },
    }
}

pub fn check_observer_gain(model: &ReducedModel, l0: &Mat, delta: f64, delayed: bool) -> Result<GainCheck> {
    let (a, c) = model.observer_pair(delayed);
    if l0.shape() != (a.nrows(), 1) {
        return Err(Error::Dimension(format!("L0 has shape {:?}, expected ({}, 1)", l0.shape(), a.nrows())));
    }
    let name = if delayed { "observer (delayed pair)" } else { "observer" };
    Ok(check(name, a - l0 * c, delta))
}

pub fn check_controller_gain(model: &ReducedModel, k0: &Mat, delta: f64) -> Result<GainCheck> {
    let a = &model.a0_tilde;
    if k0.shape() != (1, a.nrows()) {
        return Err(Error::Dimension(format!("K0 has shape {:?}, expected (1, {})", k0.shape(), a.nrows())));
    }
    Ok(check("controller", a - &model.b0_tilde * k0, delta))
}

/// Closed loop without delay, state X = col{ŵ^{N₀} (with u), e^{N₀}, ŵ^{N−N₀}, e^{N−N₀}}.
#[derive(Debug, Clone, PartialEq)]
pub struct NoDelayLoop {
    pub f_x: Mat,
    pub l_zeta: Mat,
    pub k_x: Mat,
    pub xi_x: Mat,
    pub xi_e: Mat,
}

pub fn assemble_nodelay(model: &ReducedModel, gains: &GainSet) -> Result<NoDelayLoop> {
    let n0 = model.n0;
    let k = n0 + 2;
    let h = n0 + 1;
    let t = model.tail();
    if gains.l0.shape() != (h, 1) || gains.k0.shape() != (1, k) {
        return Err(Error::Dimension(format!(
            "non-delayed gains need L0 ({h}×1) and K0 (1×{k}), got {:?} and {:?}",
            gains.l0.shape(),
            gains.k0.shape()
        )));
    }
    let layout = BlockLayout::new(&[k, h, t, t]);
    let d = layout.dim();
    let mut lt = Mat::zeros(k, 1);
    lt.view_mut((1, 0), (h, 1)).copy_from(&gains.l0);
    let mut f = Mat::zeros(d, d);
    let put = |f: &mut Mat, bi: usize, bj: usize, m: &Mat| {
        f.view_mut((layout.offset(bi), layout.offset(bj)), m.shape()).copy_from(m);
    };
    put(&mut f, 0, 0, &(&model.a0_tilde - &model.b0_tilde * &gains.k0));
    put(&mut f, 0, 1, &(&lt * &model.c0));
    put(&mut f, 0, 3, &(&lt * &model.c1));
    put(&mut f, 1, 1, &(&model.a0 - &gains.l0 * &model.c0));
    put(&mut f, 1, 3, &(-(&gains.l0 * &model.c1)));
    put(&mut f, 2, 0, &(-(&model.b1 * &gains.k0)));
    put(&mut f, 2, 2, &model.a1);
    put(&mut f, 3, 3, &model.a1);

    let mut l_zeta = Mat::zeros(d, 1);
    l_zeta.view_mut((0, 0), (k, 1)).copy_from(&lt);
    l_zeta.view_mut((k, 0), (h, 1)).copy_from(&(-&gains.l0));
    let mut k_x = Mat::zeros(1, d);
    k_x.view_mut((0, 0), (1, k)).copy_from(&gains.k0);

    let mut wx = vec![0.0; d];
    let mut we = vec![0.0; d];
    wx[0] = PSI_NORM_SQ;
    for i in 1..k {
        wx[i] = 1.0;
    }
    for i in 0..h {
        we[k + i] = 1.0;
    }
    for i in 0..t {
        wx[k + h + i] = 1.0;
        we[k + h + t + i] = 1.0;
    }
    Ok(NoDelayLoop { f_x: f, l_zeta, k_x, xi_x: diag(&wx), xi_e: diag(&we) })
}

/// Closed loop with M sub-predictors.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayedLoop {
    pub m: usize,
    pub f_x: Mat,
    pub b_x: Mat,
    /// 𝓘: (N₀+2) × M(N+2) replication of the identity on controller slots.
    pub i_mat: Mat,
    /// K₀𝓘.
    pub k0_i: Mat,
    pub f0: Mat,
    pub l_cal: Mat,
    pub c_cal: Mat,
    pub f_e: Mat,
    pub lambda_e: Mat,
    pub l_zeta: Mat,
    pub xi_x: Mat,
    pub xi_e: Mat,
    pub k0_tilde: Mat,
}

/// Nilpotent upper Jordan block J_{0,M}.
pub fn jordan_nilpotent(m: usize) -> Mat {
    Mat::from_fn(m, m, |i, j| if j == i + 1 { 1.0 } else { 0.0 })
}

pub fn assemble_delayed(model: &ReducedModel, gains: &GainSet, m: usize) -> Result<DelayedLoop> {
    if m < 1 {
        return Err(Error::Domain("M must be at least 1".into()));
    }
    model.require_delayed()?;
    let k = model.n0 + 2;
    let t = model.tail();
    let nb = model.n + 2;
    if gains.l0.shape() != (k, 1) || gains.k0.shape() != (1, k) {
        return Err(Error::Dimension(format!(
            "delayed gains need L0 ({k}×1) and K0 (1×{k}), got {:?} and {:?}",
            gains.l0.shape(),
            gains.k0.shape()
        )));
    }
    let mut f_x = Mat::zeros(nb, nb);
    f_x.view_mut((0, 0), (k, k)).copy_from(&(&model.a0_tilde - &model.b0_tilde * &gains.k0));
    f_x.view_mut((k, 0), (t, k)).copy_from(&(-(&model.b1 * &gains.k0)));
    f_x.view_mut((k, k), (t, t)).copy_from(&model.a1);
    let mut b_x = Mat::zeros(nb, 1);
    b_x.view_mut((0, 0), (k, 1)).copy_from(&model.b0_tilde);
    b_x.view_mut((k, 0), (t, 1)).copy_from(&model.b1);

    let mut f0 = Mat::zeros(nb, nb);
    f0.view_mut((0, 0), (k, k)).copy_from(&(&model.a0_tilde - &gains.l0 * &model.c0_tilde));
    f0.view_mut((0, k), (k, t)).copy_from(&(-(&gains.l0 * &model.c1)));
    f0.view_mut((k, k), (t, t)).copy_from(&model.a1);
    let mut l_cal = Mat::zeros(nb, 1);
    l_cal.view_mut((0, 0), (k, 1)).copy_from(&gains.l0);
    let mut c_cal = Mat::zeros(1, nb);
    c_cal.view_mut((0, 0), (1, k)).copy_from(&model.c0_tilde);
    c_cal.view_mut((0, k), (1, t)).copy_from(&model.c1);
    let lc = &l_cal * &c_cal;
    let id_m = Mat::identity(m, m);
    let j = jordan_nilpotent(m);
    let f_e = id_m.kronecker(&f0) + j.kronecker(&lc);
    let lambda_e = id_m.kronecker(&lc) - j.kronecker(&lc);

    let de = m * nb;
    let mut l_zeta = Mat::zeros(de, 1);
    l_zeta.view_mut(((m - 1) * nb, 0), (nb, 1)).copy_from(&(-&l_cal));
    if m >= 2 {
        l_zeta.view_mut(((m - 2) * nb, 0), (nb, 1)).copy_from(&l_cal);
    }
    let mut i_mat = Mat::zeros(k, de);
    for i in 0..m {
        i_mat.view_mut((0, i * nb), (k, k)).fill_with_identity();
    }
    let k0_i = &gains.k0 * &i_mat;
    let mut k0_tilde = Mat::zeros(1, nb);
    k0_tilde.view_mut((0, 0), (1, k)).copy_from(&gains.k0);

    let mut wx = vec![1.0; nb];
    wx[0] = PSI_NORM_SQ;
    let we: Vec<f64> = (0..m).flat_map(|_| wx.iter().copied()).collect();
    Ok(DelayedLoop { m, f_x, b_x, i_mat, k0_i, f0, l_cal, c_cal, f_e, lambda_e, l_zeta, xi_x: diag(&wx), xi_e: diag(&we), k0_tilde })
}
