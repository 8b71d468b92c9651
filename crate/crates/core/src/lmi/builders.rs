//! Closed-loop stability LMIs.
//!
//! Non-delayed loop, η = col{X, ζ, Ĝ, H, ·} with X ∈ ℝ^{2N+3}:
//!
//! ```text
//! ⎡ ψ₀  P L_ζ   P     P     0           ⎤
//! ⎢ *   2ρ̄      0     0     1 1 1       ⎥
//! ⎢ *   *      −α₁I   0     0           ⎥ ≺ 0
//! ⎢ *   *       *    −α₂I   0           ⎥
//! ⎣ *   *       *     *     Π₂          ⎦
//! ψ₀ = PF + FᵀP + 2δP + (2α₃ξ/π²)KᵀK + 2α₁σ²Ξ_X + α₂σ²Ξ_E
//! ρ̄ = 2κ⁻¹(−λ² + δλ + α₂σ²/2),  Π₂ = −(2κ/λ) diag{α₁/λ, α₂/λ, α₃}
//! ```
//! with λ = λ_{N+1}, κ = κ_{N+1}(Γ), ξ = ξ_{N+1}.
//!
//! Delayed loop with M sub-predictors, η = col{X, G, X_e, ζ(t − r/M), Υ, H}:
//! `Ψ₁ ≺ 0` (Lyapunov–Krasovskii part, including (r/M)²ΘᵀR_eΘ with
//! Θ = [0, 0, F_e, 𝓛_ζ, Λ_e, I]) and the tail condition
//! `[[φ₃, 1 1 1], [*, −(2/λ) diag{α₁/λ, α₂, α₃}]] ≺ 0`,
//! φ₃ = −λ² + (δ + qΓ/2)λ + σ²(α₁ + β) + (q/2)(1 + Γ).

use std::f64::consts::PI;

use super::problem::{BlockLayout, ConstraintBuilder, LmiProblem, Mat, VarKind};
use crate::error::{Error, Result};
use crate::spectral::{eigenvalue, kappa, tail_bound};
use crate::synthesis::{assemble_delayed, assemble_nodelay, GainSet, ReducedModel};

fn eye(n: usize) -> Mat {
    Mat::identity(n, n)
}

fn scalar(v: f64) -> Mat {
    Mat::from_element(1, 1, v)
}

fn unit_diag(n: usize, i: usize, v: f64) -> Mat {
    let mut m = Mat::zeros(n, n);
    m[(i, i)] = v;
    m
}

fn check_params(delta: f64, sigma: f64, gamma: f64) -> Result<()> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("delta = {delta} must be positive")));
    }
    if !(sigma >= 0.0) {
        return Err(Error::Domain(format!("sigma = {sigma} must be nonnegative")));
    }
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!("Gamma = {gamma} must be positive")));
    }
    Ok(())
}

/// Block indices of the non-delayed LMI.
pub mod nodelay_blocks {
    pub const X: usize = 0;
    pub const ZETA: usize = 1;
    pub const G: usize = 2;
    pub const H: usize = 3;
    pub const PI: usize = 4;
}

pub fn build_lmi_nodelay(model: &ReducedModel, gains: &GainSet, delta: f64, sigma: f64, gamma: f64) -> Result<LmiProblem> {
    use nodelay_blocks::*;
    check_params(delta, sigma, gamma)?;
    if model.n < 1 {
        return Err(Error::Domain("N must be at least 1".into()));
    }
    let cl = assemble_nodelay(model, gains)?;
    let d = cl.f_x.nrows();
    let n = model.n;
    let lam = eigenvalue(n + 1);
    let kap = kappa(n + 1, gamma)?;
    let xi = tail_bound(n)?;
    let s2 = sigma * sigma;
    let pi_scale = -2.0 * kap / lam;

    let mut prob = LmiProblem::new();
    let p = prob.sym("P", d);
    let a1 = prob.scalar("alpha1");
    let a2 = prob.scalar("alpha2");
    let a3 = prob.scalar("alpha3");

    let layout = BlockLayout::new(&[d, 1, d, d, 3]);
    let mut b = ConstraintBuilder::new("nodelay", layout);
    b.congruence(
        p,
        VarKind::Sym(d),
        &[(X, eye(d))],
        &[(X, &cl.f_x + eye(d) * delta), (ZETA, cl.l_zeta.clone()), (G, eye(d)), (H, eye(d))],
    );
    b.constant(ZETA, ZETA, &scalar(2.0 * 2.0 / kap * (-lam * lam + delta * lam)));
    b.constant(ZETA, PI, &Mat::from_element(1, 3, 1.0));
    b.scaled(a1, X, X, &(&cl.xi_x * (2.0 * s2)));
    b.scaled(a1, G, G, &(-eye(d)));
    b.scaled(a1, PI, PI, &unit_diag(3, 0, pi_scale / lam));
    b.scaled(a2, X, X, &(&cl.xi_e * s2));
    b.scaled(a2, ZETA, ZETA, &scalar(2.0 * 2.0 / kap * (s2 / 2.0)));
    b.scaled(a2, H, H, &(-eye(d)));
    b.scaled(a2, PI, PI, &unit_diag(3, 1, pi_scale / lam));
    let pi2 = std::f64::consts::PI.powi(2);
    b.scaled(a3, X, X, &(cl.k_x.transpose() * &cl.k_x * (2.0 * xi / pi2)));
    b.scaled(a3, PI, PI, &unit_diag(3, 2, pi_scale));
    prob.add_constraint(b.build())?;
    Ok(prob)
}

/// Block indices of Ψ₁.
pub mod delayed_blocks {
    pub const X: usize = 0;
    pub const G: usize = 1;
    pub const XE: usize = 2;
    pub const ZETA: usize = 3;
    pub const UPS: usize = 4;
    pub const H: usize = 5;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayParams {
    pub delta: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub m: usize,
    pub r: f64,
}

pub fn build_lmi_delayed(model: &ReducedModel, gains: &GainSet, prm: DelayParams) -> Result<LmiProblem> {
    use delayed_blocks::*;
    let DelayParams { delta, sigma, gamma, m, r } = prm;
    check_params(delta, sigma, gamma)?;
    if !(r > 0.0) {
        return Err(Error::Domain(format!("r = {r} must be positive")));
    }
    if m < 1 {
        return Err(Error::Domain("M must be at least 1".into()));
    }
    if model.n < 1 {
        return Err(Error::Domain("N must be at least 1".into()));
    }
    let cl = assemble_delayed(model, gains, m)?;
    let nb = cl.f_x.nrows();
    let de = cl.f_e.nrows();
    let n = model.n;
    let lam = eigenvalue(n + 1);
    let xi = tail_bound(n)?;
    let s2 = sigma * sigma;
    let eps = (-2.0 * delta * r / m as f64).exp();
    let tail_w = 2.0 * xi / (PI * PI);

    let mut prob = LmiProblem::new();
    let px = prob.sym("P_X", nb);
    let pe = prob.sym("P_e", de);
    let se = prob.sym("S_e", de);
    let re = prob.sym("R_e", de);
    let q = prob.scalar("q");
    let a1 = prob.scalar("alpha1");
    let a2 = prob.scalar("alpha2");
    let a3 = prob.scalar("alpha3");
    let beta = prob.scalar("beta");

    let layout = BlockLayout::new(&[nb, nb, de, 1, de, de]);
    let mut b = ConstraintBuilder::new("psi1", layout);
    b.congruence(
        px,
        VarKind::Sym(nb),
        &[(X, eye(nb))],
        &[(X, &cl.f_x + eye(nb) * delta), (G, eye(nb)), (XE, &cl.b_x * &cl.k0_i)],
    );
    b.congruence(
        pe,
        VarKind::Sym(de),
        &[(XE, eye(de))],
        &[(XE, &cl.f_e + eye(de) * delta), (ZETA, cl.l_zeta.clone()), (UPS, cl.lambda_e.clone()), (H, eye(de))],
    );
    b.congruence(se, VarKind::Sym(de), &[(XE, eye(de))], &[(XE, eye(de) * ((1.0 - eps) / 2.0)), (UPS, eye(de) * -eps)]);
    b.congruence(se, VarKind::Sym(de), &[(UPS, eye(de))], &[(UPS, eye(de) * (-eps / 2.0))]);
    b.congruence(re, VarKind::Sym(de), &[(UPS, eye(de))], &[(UPS, eye(de) * (-eps / 2.0))]);
    let c = (r / m as f64) / std::f64::consts::SQRT_2;
    let theta = [(XE, &cl.f_e * c), (ZETA, &cl.l_zeta * c), (UPS, &cl.lambda_e * c), (H, eye(de) * c)];
    b.congruence(re, VarKind::Sym(de), &theta, &theta);
    b.scaled(q, ZETA, ZETA, &scalar(-eps));
    b.scaled(a1, X, X, &(&cl.xi_x * (2.0 * s2)));
    b.scaled(a1, G, G, &(-eye(nb)));
    b.scaled(a2, X, X, &(cl.k0_tilde.transpose() * &cl.k0_tilde * tail_w));
    b.scaled(a3, XE, XE, &(cl.k0_i.transpose() * &cl.k0_i * tail_w));
    b.scaled(beta, XE, XE, &(&cl.xi_e * (2.0 * s2)));
    b.scaled(beta, H, H, &(-eye(de)));
    prob.add_constraint(b.build())?;

    let mut t = ConstraintBuilder::new("tail", BlockLayout::new(&[1, 3]));
    t.constant(0, 0, &scalar(-lam * lam + delta * lam));
    t.constant(0, 1, &Mat::from_element(1, 3, 1.0));
    t.scaled(q, 0, 0, &scalar(gamma * lam / 2.0 + (1.0 + gamma) / 2.0));
    t.scaled(a1, 0, 0, &scalar(s2));
    t.scaled(beta, 0, 0, &scalar(s2));
    t.scaled(a1, 1, 1, &unit_diag(3, 0, -2.0 / (lam * lam)));
    t.scaled(a2, 1, 1, &unit_diag(3, 1, -2.0 / lam));
    t.scaled(a3, 1, 1, &unit_diag(3, 2, -2.0 / lam));
    prob.add_constraint(t.build())?;
    Ok(prob)
}
