//! Simulates the benchmark design, writes it as CSV, reads it back, and
//! prints outcome rates by treatment arm.
//!
//! cargo run --release --example simulate -- [n] [theta] [path]

use std::path::PathBuf;

use endoselect::dataset::parse_dataset;
use endoselect::scenario::{benchmark_covariates, benchmark_model, benchmark_truth, parameters_from_names};
use endoselect::simulate::simulate_dataset;

fn main() -> endoselect::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: usize = args.first().map_or(20_000, |a| a.parse().expect("n"));
    let theta: f64 = args.get(1).map_or(-0.35, |a| a.parse().expect("theta"));
    let path = args.get(2).map_or_else(|| std::env::temp_dir().join("endoselect_sim.csv"), PathBuf::from);

    let covspec = benchmark_covariates(n, 11);
    let params = parameters_from_names(&covspec.design()?.layout, &benchmark_truth(theta))?;
    let data = simulate_dataset(&params, &covspec)?;
    data.write_csv(&path)?;
    let (back, report) = parse_dataset(&path, &benchmark_model())?;
    assert_eq!(back.records, data.records);
    println!("wrote {} rows to {} ({} read back)", data.len(), path.display(), report.rows_kept);

    for arm in [false, true] {
        let rows: Vec<_> = data.records.iter().filter(|r| r.d == arm).collect();
        let rate = |f: fn(&&endoselect::model::ImpressionRecord) -> bool| {
            rows.iter().filter(|r| f(r)).count() as f64 / rows.len() as f64
        };
        println!(
            "d={}: {:>6} impressions, click rate {:.4}, install rate {:.4}",
            u8::from(arm),
            rows.len(),
            rate(|r| r.y_tau),
            rate(|r| r.y)
        );
    }
    Ok(())
}
