//! Neumann eigenpairs, actuation shape and input coefficients, with the
//! quadrature check b_n = −⟨ψ, φ_n⟩.
//!
//! `cargo run --example modal_basis`

use heatlmi::spectral::{eigenvalue, input_coefficient, psi, tail_bound, GridFunction, BasisTable, MU};

fn main() -> heatlmi::Result<()> {
    let nx = 2000;
    let table = BasisTable::new(6, nx);
    let shape = GridFunction::from_fn(nx, psi);
    println!("mu = {MU:.7}, psi(0) = {:.7}", psi(0.0));
    println!("{:>2} {:>12} {:>12} {:>12}", "n", "lambda_n", "b_n", "-<psi,phi_n>");
    for n in 0..=6 {
        println!("{n:>2} {:>12.5} {:>12.7} {:>12.7}", eigenvalue(n), input_coefficient(n), -table.project(&shape.values, n));
    }
    for n in 1..=5 {
        println!("xi_{} = {:.7}", n + 1, tail_bound(n)?);
    }
    Ok(())
}
