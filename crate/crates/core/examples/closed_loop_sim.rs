//! Closed-loop simulation with sub-predictors; writes `trajectory.csv`.
//!
//! `cargo run --release --example closed_loop_sim -- [r] [designed]`
//! (default r = 0.32 with the reference gains; `designed` uses LMI gains).

use std::path::Path;
use std::sync::Arc;

use heatlmi::sim::{run_closed_loop, Catalog, SimConfig};
use heatlmi::synthesis::{build_reduced_model, design_gains, GainSet};

fn main() -> heatlmi::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let r: f64 = args.first().map(|s| s.parse().expect("r must be a number")).unwrap_or(0.32);
    let designed = args.get(1).is_some_and(|s| s == "designed");
    let gains = match (r > 0.0, designed) {
        (d, true) => design_gains(&build_reduced_model(0, 4, 0.0)?, 1e-3, d)?,
        (true, false) => GainSet::reference_delayed(),
        (false, false) => GainSet::reference_nodelay(),
    };
    let g = Arc::new(Catalog::Sin { sigma: 0.5 });
    let mut cfg = if r > 0.0 { SimConfig::delayed(gains, 0, 4, r, 2, g) } else { SimConfig::nodelay(gains, 0, 4, g) };
    cfg.t_final = 10.0;
    let tr = run_closed_loop(&cfg)?;
    tr.save_csv(Path::new("trajectory.csv"))?;
    for k in (0..tr.len()).step_by(100) {
        println!("t = {:5.2}  |w|_H1 = {:.4e}  |w_hat|_H1 = {:.4e}  u(t-r) = {:+.4e}", tr.t[k], tr.h1_w[k], tr.h1_what[k], tr.u_delayed[k]);
    }
    println!("decay rate {:?}, blow-up {:?}", tr.decay_rate(), tr.blow_up);
    Ok(())
}
