use endoselect::likelihood::cell_probabilities;
use endoselect::mala::{run_chain, MalaConfig, MetricAdaptation};
use endoselect::posterior::IsotropicNormal;
use endoselect::scenario::{benchmark_covariates, benchmark_truth, parameters_from_names};
use endoselect::simulate::simulate_dataset;
use statrs::distribution::{ContinuousCDF, Normal};

/// Observed cell frequencies of a large simulated sample against the mean
/// model probabilities, at 4 standard errors.
#[test]
fn simulated_cell_frequencies_match_likelihood() {
    let n = 1_000_000;
    let covspec = benchmark_covariates(n, 77);
    let params = parameters_from_names(&covspec.design().unwrap().layout, &benchmark_truth(-0.35)).unwrap();
    let data = simulate_dataset(&params, &covspec).unwrap();
    let mut expected = [0.0f64; 6];
    let mut var = [0.0f64; 6];
    let mut observed = [0usize; 6];
    for r in &data.records {
        let c = cell_probabilities(r, &params).unwrap();
        let p = [c.p00, c.p010, c.p011, c.p10, c.p110, c.p111];
        for k in 0..6 {
            expected[k] += p[k];
            var[k] += p[k] * (1.0 - p[k]);
        }
        let k = match (r.d, r.y_tau, r.y) {
            (false, false, _) => 0,
            (false, true, false) => 1,
            (false, true, true) => 2,
            (true, false, _) => 3,
            (true, true, false) => 4,
            (true, true, true) => 5,
        };
        observed[k] += 1;
    }
    for k in 0..6 {
        let z = (observed[k] as f64 - expected[k]) / var[k].sqrt();
        assert!(z.abs() < 4.0, "cell {k}: observed {} expected {:.1} z {z:.2}", observed[k], expected[k]);
    }
}

/// A plain MALA chain on a known Gaussian leaves it invariant: thinned
/// draws pass a Kolmogorov–Smirnov test against the target margin.
#[test]
fn mala_draws_follow_the_target() {
    let target = IsotropicNormal {
        mean: vec![0.5, -1.0, 2.0],
        sd: 1.5,
    };
    let cfg = MalaConfig {
        iterations: 60_000,
        adapt_until: 5_000,
        seed: 19,
        initial_step: 1.0,
        metric: MetricAdaptation::Identity,
        ..MalaConfig::default()
    };
    let chain = run_chain(&target, vec![0.0; 3], vec!["a".into(), "b".into(), "c".into()], &cfg).unwrap();
    for j in 0..3 {
        let dist = Normal::new(target.mean[j], target.sd).unwrap();
        let mut xs: Vec<f64> = chain.column(j, 10_000).into_iter().step_by(25).collect();
        xs.sort_by(f64::total_cmp);
        let m = xs.len() as f64;
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = dist.cdf(x);
                (f - i as f64 / m).abs().max((f - (i + 1) as f64 / m).abs())
            })
            .fold(0.0, f64::max);
        // 1.95/√m is the 0.1% critical value.
        assert!(ks < 1.95 / m.sqrt(), "component {j}: KS {ks:.4} with {m} draws");
    }
}
