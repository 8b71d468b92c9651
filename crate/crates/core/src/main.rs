//! Command-line front end: `heatlmi <subcommand> [flags]`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use heatlmi::experiment::{self, exit_code, ExperimentConfig, Outcome};
use heatlmi::lmi::search::GammaGrid;

#[derive(Parser, Debug)]
#[command(name = "heatlmi", version, about = "Delay-compensated boundary control of a semilinear heat equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Bisection tolerance.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Γ grid as lo:hi:n (log-spaced).
    #[arg(long = "gamma-grid", global = true)]
    gamma_grid: Option<String>,
    /// Worker threads for Γ probes.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Extra KEY=VALUE overrides, applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Design observer and controller gains by LMI.
    Synthesize,
    /// Check the reference gains, or a problem/certificate pair given by `problem=`/`certificate=`.
    VerifyLmi,
    /// Largest Lipschitz constant certified without delay.
    SearchSigma,
    /// Largest input delay certified with sub-predictors.
    SearchDelay,
    /// Closed-loop simulation with trajectory CSV and decay report.
    Simulate,
    /// sigma_max and r_max tables per N with comparison against reference values.
    ReproduceTables,
}

fn configure(cli: &Cli) -> heatlmi::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| heatlmi::Error::Config(format!("cannot read {}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    for kv in &cli.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| heatlmi::Error::Parse(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(t) = cli.tolerance {
        cfg.tolerance = t;
    }
    if let Some(g) = &cli.gamma_grid {
        cfg.gamma_grid = GammaGrid::parse(g)?;
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> heatlmi::Result<Outcome> {
    let cfg = configure(cli)?;
    if cfg.jobs > 1 {
        // a second initialization only happens in tests; ignore it
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build_global();
    }
    match cli.command {
        Command::Synthesize => experiment::run_synthesize(&cfg),
        Command::VerifyLmi => experiment::run_verify(&cfg),
        Command::SearchSigma => experiment::run_search_sigma(&cfg),
        Command::SearchDelay => experiment::run_search_delay(&cfg),
        Command::Simulate => experiment::run_simulate(&cfg),
        Command::ReproduceTables => experiment::run_reproduce_tables(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(o) => {
            print!("{}", o.report);
            ExitCode::from(o.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
