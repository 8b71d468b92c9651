//! Boundary control of the semilinear heat equation
//! `z_t = z_xx + g(t, x, z)` on (0, 1), `z_x(0) = 0`, `z_x(1) = u(t − r)`,
//! with a point measurement `y = z(x*, t)`.
//!
//! The crate reduces the PDE to modal ODEs, designs finite-dimensional
//! observer/controller gains, certifies closed-loop exponential stability
//! through linear matrix inequalities, searches the largest admissible
//! Lipschitz constant or input delay, and simulates the closed loop.
//!
//! Modules:
//! - [`spectral`]: Neumann eigenpairs, actuation shape, quadrature.
//! - [`synthesis`]: reduced models, gain design, closed-loop matrices.
//! - [`lmi`]: feasibility solver, stability LMIs, bisection searches.
//! - [`sim`]: FTCS/Euler closed-loop simulation with delay lines.
//! - [`experiment`]: configuration, orchestration and CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` rejects NaN on purpose

pub mod error;
pub mod experiment;
pub mod lmi;
pub mod sim;
pub mod spectral;
pub mod synthesis;

pub use error::{Error, Result};
