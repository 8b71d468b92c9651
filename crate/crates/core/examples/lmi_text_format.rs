//! Builds a small Lyapunov LMI, solves it, and round-trips problem and
//! certificate through the plain-text format.
//!
//! `cargo run --example lmi_text_format`

use heatlmi::lmi::text::{read_certificate, read_problem, write_certificate, write_problem};
use heatlmi::lmi::{solve_feasibility, verify_certificate, BlockLayout, ConstraintBuilder, LmiProblem, Mat, VarKind, Verdict};

fn main() -> heatlmi::Result<()> {
    // Aᵀ P + P A ≺ 0 for a stable, non-normal A
    let a = Mat::from_row_slice(2, 2, &[-1.0, 4.0, 0.0, -2.0]);
    let mut prob = LmiProblem::new();
    let p = prob.sym("P", 2);
    let mut b = ConstraintBuilder::new("lyapunov", BlockLayout::new(&[2]));
    b.congruence(p, VarKind::Sym(2), &[(0, Mat::identity(2, 2))], &[(0, a)]);
    prob.add_constraint(b.build())?;

    let text = write_problem(&prob);
    println!("{text}");
    let back = read_problem(&text)?;
    let Verdict::Feasible(cert) = solve_feasibility(&back)? else {
        println!("unexpectedly infeasible");
        return Ok(());
    };
    let cert_text = write_certificate(&back, &cert);
    println!("{cert_text}");
    let reread = read_certificate(&back, &cert_text)?;
    let check = verify_certificate(&back, &reread.assignment, 1e-9)?;
    println!("independent re-verification: feasible = {}", check.feasible);
    Ok(())
}
