//! Selection-on-observables benchmarks on simulated data: first-stage
//! probit, control functions, IPW, regression adjustment and the naive
//! probit, against the model-implied true ATE.
//!
//! cargo run --release --example propensity -- [theta]

use endoselect::counterfactual::ate;
use endoselect::propensity::{
    control_function_ate, ipw_ate, naive_probit_effect, probit_fit, propensity_design, propensity_scores,
    regression_adjustment_ate,
};
use endoselect::scenario::{benchmark_covariates, benchmark_truth, parameters_from_names};
use endoselect::simulate::simulate_dataset;

fn main() -> endoselect::Result<()> {
    let theta: f64 = std::env::args().nth(1).map_or(0.0, |a| a.parse().expect("theta"));
    let covspec = benchmark_covariates(50_000, 2);
    let params = parameters_from_names(&covspec.design()?.layout, &benchmark_truth(theta))?;
    let data = simulate_dataset(&params, &covspec)?;

    let design = propensity_design(&data)?;
    let d: Vec<bool> = data.records.iter().map(|r| r.d).collect();
    let y: Vec<f64> = data.records.iter().map(|r| f64::from(u8::from(r.y))).collect();
    let first = probit_fit(&design, &d)?;
    let p_hat = propensity_scores(&first, &design)?;

    println!("theta {theta}: true install ATE {:.4}", ate(&data.records, &params)?);
    for degree in [1, 3] {
        let (e, _) = control_function_ate(&y, &d, &p_hat, degree)?;
        println!("control function (degree {degree}): {:.4} ({:.4})", e.ate, e.se);
    }
    let ipw = ipw_ate(&y, &d, &p_hat)?;
    println!("IPW: {:.4} ({:.4}), {} trimmed", ipw.ate, ipw.se, ipw.trimmed);
    let ra = regression_adjustment_ate(&design, &y, &d)?;
    println!("regression adjustment: {:.4} ({:.4})", ra.ate, ra.se);

    let yb: Vec<bool> = data.records.iter().map(|r| r.y).collect();
    let with_d = design.with_column("incentivized", &d.iter().map(|&b| f64::from(u8::from(b))).collect::<Vec<_>>())?;
    let naive = naive_probit_effect(&with_d, &yb, "incentivized")?;
    println!("naive probit AME: {:.4} ({:.4})", naive.average_marginal_effect, naive.ame_se);
    Ok(())
}
