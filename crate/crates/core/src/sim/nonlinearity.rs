//! Globally Lipschitz semilinearities g(t, x, z).

/// A nonlinearity with |g(t,x,z₁) − g(t,x,z₂)| ≤ σ|z₁ − z₂|.
pub trait Nonlinearity: Send + Sync {
    fn eval(&self, t: f64, x: f64, z: f64) -> f64;
    fn lipschitz(&self) -> f64;
    fn name(&self) -> &str;
}

/// Built-in catalog.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Catalog {
    Zero,
    /// σ sin(t + 3x + z); note g(t, x, 0) ≠ 0.
    Sin { sigma: f64 },
    /// σ tanh(z).
    Sat { sigma: f64 },
}

impl Catalog {
    /// Looks up a catalog id: `zero`, `sin` or `sat`.
    pub fn from_id(id: &str, sigma: f64) -> Option<Self> {
        match id {
            "zero" => Some(Catalog::Zero),
            "sin" | "paper_sin" => Some(Catalog::Sin { sigma }),
            "sat" => Some(Catalog::Sat { sigma }),
            _ => None,
        }
    }
}

impl Nonlinearity for Catalog {
    fn eval(&self, t: f64, x: f64, z: f64) -> f64 {
        match *self {
            Catalog::Zero => 0.0,
            Catalog::Sin { sigma } => sigma * (t + 3.0 * x + z).sin(),
            Catalog::Sat { sigma } => sigma * z.tanh(),
        }
    }

    fn lipschitz(&self) -> f64 {
        match *self {
            Catalog::Zero => 0.0,
            Catalog::Sin { sigma } | Catalog::Sat { sigma } => sigma,
        }
    }

    fn name(&self) -> &str {
        match self {
            Catalog::Zero => "zero",
            Catalog::Sin { .. } => "sin",
            Catalog::Sat { .. } => "sat",
        }
    }
}

/// Largest |g(t, x, 0)| over a probe grid in t ∈ [0, 2π], x ∈ [0, 1].
pub fn max_at_zero_state(g: &dyn Nonlinearity) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..=16 {
        let t = 2.0 * std::f64::consts::PI * i as f64 / 16.0;
        for j in 0..=16 {
            worst = worst.max(g.eval(t, j as f64 / 16.0, 0.0).abs());
        }
    }
    worst
}
