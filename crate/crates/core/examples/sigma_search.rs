//! Largest Lipschitz constant σ certified by the non-delayed LMI.
//!
//! `cargo run --release --example sigma_search -- [N]` (default N = 4).

use heatlmi::lmi::search::{search_max_sigma, SearchSettings};
use heatlmi::synthesis::{build_reduced_model, GainSet};

fn main() -> heatlmi::Result<()> {
    let n: usize = std::env::args().nth(1).map(|s| s.parse().expect("N must be an integer")).unwrap_or(4);
    let model = build_reduced_model(0, n, 0.0)?;
    let gains = GainSet::reference_nodelay();
    let start = std::time::Instant::now();
    let res = search_max_sigma(&model, &gains, 1e-3, &SearchSettings::default())?;
    match res.max_feasible {
        Some(s) => println!(
            "N = {n}: sigma_max = {s:.4} (bracket {:.4}..{:.4}, Gamma = {:.3}, {} probes, {:.1?})",
            res.bracket.0,
            res.bracket.1,
            res.gamma_used.unwrap_or(f64::NAN),
            res.probes.len(),
            start.elapsed()
        ),
        None => println!("N = {n}: infeasible even at sigma = 0"),
    }
    Ok(())
}
