use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use endoselect::config::{Overrides, RunConfig};
use endoselect::pipeline::{run_command, Command, ErrorRecord};
use endoselect::report::ReportFormat;

#[derive(Parser)]
#[command(version, about = "Endogenous treatment effects with Clayton-copula selection")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// json or csv.
    #[arg(long, global = true)]
    format: Option<String>,
    /// Input dataset CSV.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a synthetic dataset and its ground truth.
    Simulate,
    /// Run the sampler and write the chain dump and posterior summary.
    Fit {
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Policy quantities from a fitted summary.
    Counterfactual {
        #[arg(long)]
        price: Option<f64>,
    },
    /// Selection-on-observables benchmarks.
    Propensity,
    /// Probit with a treatment dummy and its average marginal effect.
    Naive,
    /// Convergence diagnostics on a stored chain dump.
    Diagnose,
}

fn run(cli: Cli) -> Result<(Command, Vec<PathBuf>), (Command, endoselect::Error)> {
    let (command, mut o) = match cli.command {
        Cmd::Simulate => (Command::Simulate, Overrides::default()),
        Cmd::Fit { iterations, delta } => (
            Command::Fit,
            Overrides {
                iterations,
                delta,
                ..Overrides::default()
            },
        ),
        Cmd::Counterfactual { price } => (
            Command::Counterfactual,
            Overrides {
                price,
                ..Overrides::default()
            },
        ),
        Cmd::Propensity => (Command::Propensity, Overrides::default()),
        Cmd::Naive => (Command::Naive, Overrides::default()),
        Cmd::Diagnose => (Command::Diagnose, Overrides::default()),
    };
    let fail = |e| (command, e);
    let path = cli
        .config
        .ok_or_else(|| endoselect::Error::Config("--config is required".into()))
        .map_err(fail)?;
    let mut cfg = RunConfig::load(&path).map_err(fail)?;
    o.seed = cli.seed;
    o.out = cli.out;
    o.data = cli.data;
    o.format = cli.format.map(|f| f.parse::<ReportFormat>()).transpose().map_err(fail)?;
    cfg.apply(&o);
    let artifacts = run_command(command, &cfg).map_err(fail)?;
    Ok((command, artifacts))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok((command, artifacts)) => {
            let record = serde_json::json!({
                "status": "ok",
                "command": command.name(),
                "artifacts": artifacts,
            });
            println!("{record}");
            ExitCode::SUCCESS
        }
        Err((command, err)) => {
            let record = ErrorRecord::new(command.name(), &err);
            eprintln!("{}", serde_json::to_string(&record).expect("serializable"));
            ExitCode::FAILURE
        }
    }
}
