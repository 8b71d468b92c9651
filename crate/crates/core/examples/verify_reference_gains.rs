//! Lyapunov certificates for the four reference gain objects at δ = 0.001.
//!
//! `cargo run --example verify_reference_gains`

use heatlmi::experiment::reference_gain_checks;

fn main() -> heatlmi::Result<()> {
    for (label, c) in reference_gain_checks(1e-3)? {
        println!(
            "{label:<15} {}  certificate max eig {:+.3e}  closed-loop abscissa {:+.4}",
            if c.holds() { "PASS" } else { "FAIL" },
            c.max_eig,
            c.abscissa()
        );
    }
    Ok(())
}
