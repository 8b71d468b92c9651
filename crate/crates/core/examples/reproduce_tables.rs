//! σ_max and r_max tables with the reference gains, compared side by side.
//!
//! `cargo run --release --example reproduce_tables` (writes to `tables/`).

use heatlmi::experiment::{run_reproduce_tables, ExperimentConfig};

fn main() -> heatlmi::Result<()> {
    let cfg = ExperimentConfig { out: "tables".into(), ..Default::default() };
    print!("{}", run_reproduce_tables(&cfg)?.report);
    Ok(())
}
