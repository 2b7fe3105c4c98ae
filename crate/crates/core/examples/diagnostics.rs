//! Heidelberger–Welch on an AR(1) series, an iid series and a trend.

use endoselect::diagnostics::{cramer_von_mises_critical, heidelberger_welch, spectral_density_at_zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> endoselect::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let iid: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut ar = vec![0.0f64; 2000];
    for t in 1..ar.len() {
        let e: f64 = StandardNormal.sample(&mut rng);
        ar[t] = 0.8 * ar[t - 1] + e;
    }
    let trend: Vec<f64> = (0..2000).map(|t| t as f64 / 100.0).collect();

    println!("critical value at alpha 0.05: {:.5}", cramer_von_mises_critical(0.05));
    for (name, s) in [("iid", &iid), ("ar(0.8)", &ar), ("trend", &trend)] {
        let r = heidelberger_welch(s, 0.05)?;
        println!(
            "{name:<8} S(0) {:>8.3}  stationary {:<5}  kept {:.0}%  statistic {:.4}",
            spectral_density_at_zero(s),
            r.stationary,
            100.0 * r.kept_fraction,
            r.cvm_statistic
        );
    }
    Ok(())
}
