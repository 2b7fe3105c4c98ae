//! Cell probabilities for one impression and the log-likelihood of a small
//! simulated sample, with its gradient.

use endoselect::likelihood::{cell_probabilities, log_likelihood, log_likelihood_gradient};
use endoselect::scenario::{benchmark_covariates, benchmark_truth, parameters_from_names};
use endoselect::simulate::simulate_dataset;

fn main() -> endoselect::Result<()> {
    let covspec = benchmark_covariates(2_000, 3);
    let params = parameters_from_names(&covspec.design()?.layout, &benchmark_truth(-0.35))?;
    let data = simulate_dataset(&params, &covspec)?;

    let c = cell_probabilities(&data.records[0], &params)?;
    println!("first impression cells:");
    for (name, p) in [
        ("d=0 ytau=0", c.p00),
        ("d=0 ytau=1 y=0", c.p010),
        ("d=0 ytau=1 y=1", c.p011),
        ("d=1 ytau=0", c.p10),
        ("d=1 ytau=1 y=0", c.p110),
        ("d=1 ytau=1 y=1", c.p111),
    ] {
        println!("  {name:<16} {p:.6}");
    }
    println!("  sum {:.15}", c.p00 + c.p010 + c.p011 + c.p10 + c.p110 + c.p111);

    println!("log-likelihood at truth: {:.4}", log_likelihood(&data.records, &params)?);
    let grad = log_likelihood_gradient(&data.records, &params)?;
    for (name, g) in data.layout().names().iter().zip(grad) {
        println!("  d/d{name:<22} {g:>10.3}");
    }
    Ok(())
}
