//! The CLI workflow driven from code: load a TOML config, then simulate,
//! fit, diagnose and evaluate counterfactuals.
//!
//! cargo run --release --example pipeline -- [config] [iterations]

use std::path::PathBuf;

use endoselect::config::{Overrides, RunConfig};
use endoselect::pipeline::{read_fit_summary, run_command, Command};

fn main() -> endoselect::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let path = args.first().map_or_else(
        || PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/configs/benchmark.toml"),
        PathBuf::from,
    );
    let mut cfg = RunConfig::load(&path)?;
    cfg.apply(&Overrides {
        iterations: args.get(1).map(|a| a.parse().expect("iterations")),
        out: Some(std::env::temp_dir().join("endoselect_pipeline")),
        ..Overrides::default()
    });
    for command in [Command::Simulate, Command::Fit, Command::Diagnose, Command::Counterfactual] {
        for artifact in run_command(command, &cfg)? {
            println!("{:<15} {}", command.name(), artifact.display());
        }
    }
    let summary = read_fit_summary(&cfg.summary_path())?;
    println!(
        "theta {:.3} ± {:.3}; {} of {} parameters stationary",
        summary.theta.mean,
        summary.theta.sd,
        summary.convergence.iter().filter(|r| r.result.stationary).count(),
        summary.convergence.len()
    );
    Ok(())
}
