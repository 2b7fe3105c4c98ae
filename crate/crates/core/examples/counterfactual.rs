//! Policy report at the true parameters of the benchmark design, plus the
//! CPM arithmetic for a few reported magnitudes.

use endoselect::counterfactual::{counterfactual_report, cpm, Evaluation, DEFAULT_PRICE_PER_INSTALL};
use endoselect::report::to_json_string;
use endoselect::scenario::{benchmark_covariates, benchmark_truth, parameters_from_names};
use endoselect::simulate::simulate_dataset;

fn main() -> endoselect::Result<()> {
    let covspec = benchmark_covariates(20_000, 4);
    let params = parameters_from_names(&covspec.design()?.layout, &benchmark_truth(-0.35))?;
    let data = simulate_dataset(&params, &covspec)?;
    let labels = data.labels("lang")?;
    let report = counterfactual_report(
        &data.records,
        Evaluation::PosteriorMean(&params),
        Some(&labels),
        DEFAULT_PRICE_PER_INSTALL,
    )?;
    print!("{}", to_json_string(&report)?);

    println!("ATE 0.000795 at $0.52 per install: ${:.4} CPM", cpm(0.000795, 0.52)?);
    println!("relative to a 0.00292 baseline: {:.1}%", 100.0 * 0.000795 / 0.00292);
    println!("0.000724 x 252379 impressions: {:.0} installs", 0.000724 * 252_379.0);
    Ok(())
}
