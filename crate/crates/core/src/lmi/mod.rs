//! Affine matrix inequalities: representation, solver, verification,
//! stability conditions and bisection searches.

pub mod builders;
pub mod problem;
pub mod search;
pub mod solver;
pub mod text;
pub mod verify;

pub use problem::{Assignment, BlockLayout, Constraint, ConstraintBuilder, LmiProblem, Mat, Term, VarId, VarKind};
pub use solver::{solve_feasibility, solve_with, SolveReport, SolverOptions, Verdict};
pub use verify::{verify_certificate, LmiCertificate, Margin, MarginKind};
