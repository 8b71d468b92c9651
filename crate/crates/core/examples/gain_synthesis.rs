//! Designs observer and controller gains by LMI, checks their Lyapunov
//! certificates, and feeds them to the delay search.
//!
//! `cargo run --release --example gain_synthesis`

use heatlmi::lmi::search::{search_max_delay, SearchSettings};
use heatlmi::synthesis::{build_reduced_model, check_controller_gain, check_observer_gain, design_gains};

fn main() -> heatlmi::Result<()> {
    let delta = 1e-3;
    let model = build_reduced_model(0, 4, 0.0)?;
    for delayed in [false, true] {
        let gains = design_gains(&model, delta, delayed)?;
        let obs = check_observer_gain(&model, &gains.l0, delta, delayed)?;
        let ctl = check_controller_gain(&model, &gains.k0, delta)?;
        println!(
            "{}: L0 = {:?}, K0 = {:?}",
            if delayed { "delayed" } else { "non-delayed" },
            gains.l0.as_slice(),
            gains.k0.iter().collect::<Vec<_>>()
        );
        println!("  observer   abscissa {:+.4}, certificate max eig {:+.3e}", obs.abscissa(), obs.max_eig);
        println!("  controller abscissa {:+.4}, certificate max eig {:+.3e}", ctl.abscissa(), ctl.max_eig);
        if delayed {
            for sigma in [0.0, 0.1, 0.25, 0.5] {
                let res = search_max_delay(&model, &gains, 2, sigma, delta, &SearchSettings::default())?;
                match res.max_feasible {
                    Some(r) => println!("  N = 4, M = 2, sigma = {sigma}: r_max = {r:.3}"),
                    None => println!("  N = 4, M = 2, sigma = {sigma}: no certified delay"),
                }
            }
        }
    }
    Ok(())
}
