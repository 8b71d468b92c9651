//! Largest input delay r certified by the sub-predictor LMIs.
//!
//! `cargo run --release --example delay_search -- [N] [M] [sigma]`
//! (defaults N = 4, M = 2, σ = 0.5).

use heatlmi::lmi::search::{search_max_delay, ProbeOutcome, SearchSettings};
use heatlmi::synthesis::{build_reduced_model, GainSet};

fn main() -> heatlmi::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: usize = args.first().map(|s| s.parse().expect("N must be an integer")).unwrap_or(4);
    let m: usize = args.get(1).map(|s| s.parse().expect("M must be an integer")).unwrap_or(2);
    let sigma: f64 = args.get(2).map(|s| s.parse().expect("sigma must be a number")).unwrap_or(0.5);
    let model = build_reduced_model(0, n, 0.0)?;
    let gains = GainSet::reference_delayed();
    let start = std::time::Instant::now();
    let res = search_max_delay(&model, &gains, m, sigma, 1e-3, &SearchSettings::default())?;
    let breakdowns = res.probes.iter().filter(|p| p.outcome == ProbeOutcome::Breakdown).count();
    match res.max_feasible {
        Some(r) => println!(
            "N = {n}, M = {m}, sigma = {sigma}: r_max = {r:.4} (bracket {:.4}..{:.4}, Gamma = {:.3}, {} probes, {:.1?})",
            res.bracket.0,
            res.bracket.1,
            res.gamma_used.unwrap_or(f64::NAN),
            res.probes.len(),
            start.elapsed()
        ),
        None => println!(
            "N = {n}, M = {m}, sigma = {sigma}: infeasible at r = {} for every Gamma ({} probes, {breakdowns} breakdowns, {:.1?})",
            heatlmi::lmi::search::R_MIN,
            res.probes.len(),
            start.elapsed()
        ),
    }
    Ok(())
}
