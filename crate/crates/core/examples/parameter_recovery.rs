//! Simulates the benchmark design, fits it with MALA and compares the
//! posterior with the truth.
//!
//! cargo run --release --example parameter_recovery -- [n] [iterations] [seed]

use std::time::Instant;

use endoselect::mala::{run_chain, MalaConfig};
use endoselect::model::ParameterSet;
use endoselect::posterior::Posterior;
use endoselect::prior::PriorSpec;
use endoselect::scenario::{benchmark_covariates, benchmark_truth, parameters_from_names};
use endoselect::simulate::simulate_dataset;
use endoselect::summary::{convergence_table, posterior_summary};

fn main() -> endoselect::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let n = args.first().copied().unwrap_or(50_000) as usize;
    let iterations = args.get(1).copied().unwrap_or(5_000) as usize;
    let seed = args.get(2).copied().unwrap_or(1);

    let covspec = benchmark_covariates(n, seed);
    let layout = covspec.design()?.layout;
    let truth = parameters_from_names(&layout, &benchmark_truth(-0.35))?;
    let data = simulate_dataset(&truth, &covspec)?;
    let prior = PriorSpec {
        instrument_index: Some(data.design.instrument_index),
        ..PriorSpec::default()
    };
    let posterior = Posterior::new(&data.records, data.layout(), &prior);
    let config = MalaConfig {
        iterations,
        adapt_until: iterations / 2,
        seed,
        ..MalaConfig::default()
    };
    let start = Instant::now();
    let init = ParameterSet::initial(data.layout()).to_vec();
    let chain = run_chain(&posterior, init, layout.names(), &config)?;
    println!("sampled {iterations} iterations in {:.1?}", start.elapsed());
    println!("post-warm-up acceptance {:.3}", chain.acceptance_rate_from(iterations / 2));

    let summary = posterior_summary(&chain, 0.5)?;
    let hw = convergence_table(&chain, 0.5, 0.05)?;
    let mut covered = 0;
    println!("{:<24} {:>9} {:>9} {:>8} {:>6} {:>5}", "parameter", "truth", "mean", "sd", "|z|", "HW");
    for ((p, t), row) in summary.parameters.iter().zip(truth.to_vec()).zip(&hw) {
        let z = (p.mean - t).abs() / p.sd;
        covered += usize::from(z <= 3.0);
        println!(
            "{:<24} {:>9.4} {:>9.4} {:>8.4} {:>6.2} {:>5}",
            p.name, t, p.mean, p.sd, z, if row.result.stationary { "pass" } else { "FAIL" }
        );
    }
    println!("theta: truth -0.35, posterior {:.4} ± {:.4}", summary.theta.mean, summary.theta.sd);
    println!(
        "{covered}/{} within 3 sd; {}/{} stationary",
        summary.parameters.len(),
        hw.iter().filter(|r| r.result.stationary).count(),
        hw.len()
    );
    Ok(())
}
