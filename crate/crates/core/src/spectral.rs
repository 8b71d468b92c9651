//! Neumann eigenstructure on [0, 1], the actuation shape ψ and trapezoid quadrature.
//!
//! Eigenpairs: λ₀ = 0, φ₀ = 1 and λ_n = n²π², φ_n = √2 cos(nπx).
//! The shape ψ(x) = −(2/π)cos(πx/2) satisfies ψ′(0) = 0 and ψ′(1) = 1, so it
//! lifts the Neumann boundary input into the domain.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

/// μ = π²/4, the decay rate of the lifted boundary-input state.
pub const MU: f64 = PI * PI / 4.0;

/// ‖ψ‖² = 2/π².
pub const PSI_NORM_SQ: f64 = 2.0 / (PI * PI);

fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(format!("x = {x} outside [0, 1]")))
    }
}

pub fn eigenvalue(n: usize) -> f64 {
    let k = n as f64 * PI;
    k * k
}

/// φ_n(x) without domain checking; used on hot paths with grid nodes.
#[inline]
pub fn phi(n: usize, x: f64) -> f64 {
    if n == 0 {
        1.0
    } else {
        SQRT_2 * (n as f64 * PI * x).cos()
    }
}

/// φ_n′(x).
#[inline]
pub fn phi_prime(n: usize, x: f64) -> f64 {
    if n == 0 {
        0.0
    } else {
        -SQRT_2 * n as f64 * PI * (n as f64 * PI * x).sin()
    }
}

pub fn eigenfunction(n: usize, x: f64) -> Result<f64> {
    check_unit(x)?;
    Ok(phi(n, x))
}

#[inline]
pub fn psi(x: f64) -> f64 {
    -(2.0 / PI) * (0.5 * PI * x).cos()
}

#[inline]
pub fn psi_prime(x: f64) -> f64 {
    (0.5 * PI * x).sin()
}

pub fn actuation_shape(x: f64) -> Result<f64> {
    check_unit(x)?;
    Ok(psi(x))
}

/// b_n, the modal coefficient of the input term −ψ v; equals −⟨ψ, φ_n⟩.
pub fn input_coefficient(n: usize) -> f64 {
    if n == 0 {
        4.0 / (PI * PI)
    } else {
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        let nf = n as f64;
        sign * 4.0 * SQRT_2 / (PI * PI * (4.0 * nf * nf - 1.0))
    }
}

/// ξ_{N+1} = (1 + 1/(4(N+1)² − 1))² / N; Σ_{n>N} λ_n b_n² ≤ 2ξ_{N+1}/π².
pub fn tail_bound(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("tail bound needs N >= 1".into()));
    }
    let m = (n + 1) as f64;
    let f = 1.0 + 1.0 / (4.0 * m * m - 1.0);
    Ok(f * f / n as f64)
}

/// κ_n = 1 + Γ + λ_n/Γ.
pub fn kappa(n: usize, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!("Gamma = {gamma} must be positive")));
    }
    Ok(1.0 + gamma + eigenvalue(n) / gamma)
}

/// Eigenvalues, input coefficients and measurement-free data for modes 0..=N.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalBasis {
    pub max_mode: usize,
    pub eigenvalues: Vec<f64>,
    pub input_coeffs: Vec<f64>,
}

impl ModalBasis {
    pub fn new(max_mode: usize) -> Self {
        Self {
            max_mode,
            eigenvalues: (0..=max_mode).map(eigenvalue).collect(),
            input_coeffs: (0..=max_mode).map(input_coefficient).collect(),
        }
    }
}

/// Uniform grid of `nx + 1` nodes on [0, 1] with values.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(nx: usize) -> Self {
        Self { values: vec![0.0; nx + 1] }
    }

    pub fn from_fn(nx: usize, f: impl Fn(f64) -> f64) -> Self {
        Self { values: nodes(nx).map(f).collect() }
    }

    /// Number of intervals.
    pub fn nx(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.nx() as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 / self.nx() as f64
    }
}

pub fn nodes(nx: usize) -> impl Iterator<Item = f64> {
    (0..=nx).map(move |j| j as f64 / nx as f64)
}

/// Composite trapezoid rule for samples on a uniform grid of [0, 1].
pub fn trapezoid(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..n - 1].iter().sum();
    (inner + 0.5 * (values[0] + values[n - 1])) / (n - 1) as f64
}

/// Trapezoid inner product of two sampled functions.
pub fn inner(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let inner: f64 = (1..n - 1).map(|j| a[j] * b[j]).sum();
    (inner + 0.5 * (a[0] * b[0] + a[n - 1] * b[n - 1])) / (n - 1) as f64
}

/// ⟨f, φ_n⟩ by the trapezoid rule.
pub fn project(f: &GridFunction, n: usize) -> Result<f64> {
    if f.values.len() < 3 {
        return Err(Error::Domain("projection needs at least 3 nodes".into()));
    }
    let nx = f.nx();
    let basis: Vec<f64> = nodes(nx).map(|x| phi(n, x)).collect();
    Ok(inner(&f.values, &basis))
}

/// Σ_n coeffs[n] φ_n on the grid.
pub fn synthesize_field(coeffs: &[f64], nx: usize) -> GridFunction {
    GridFunction::from_fn(nx, |x| coeffs.iter().enumerate().map(|(n, c)| c * phi(n, x)).sum())
}

/// Tabulated φ_0..φ_N on a grid, reused by the simulator and the observers.
#[derive(Debug, Clone)]
pub struct BasisTable {
    pub nx: usize,
    /// `rows[n][j] = φ_n(x_j)`.
    pub rows: Vec<Vec<f64>>,
    pub psi: Vec<f64>,
}

impl BasisTable {
    pub fn new(max_mode: usize, nx: usize) -> Self {
        let rows = (0..=max_mode).map(|n| nodes(nx).map(|x| phi(n, x)).collect()).collect();
        let psi = nodes(nx).map(psi).collect();
        Self { nx, rows, psi }
    }

    pub fn project(&self, values: &[f64], n: usize) -> f64 {
        inner(values, &self.rows[n])
    }
}
