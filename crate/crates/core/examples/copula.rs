//! Clayton copula values, Kendall's τ, and a sampling check of the
//! trivariate CDF at one grid point.

use endoselect::copula::{clayton_cdf2, clayton_cdf3, kendall_tau, theta_transform};
use endoselect::simulate::sample_clayton3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> endoselect::Result<()> {
    for theta in [-0.353, 0.5, 2.0] {
        println!(
            "theta {theta:>6}: tau {:>7.4}  C2(.5,.5) {:.4}  C3(.5,.5,.5) {:.4}",
            kendall_tau(theta)?,
            clayton_cdf2(0.5, 0.5, theta)?,
            clayton_cdf3(0.5, 0.5, 0.5, theta)?
        );
    }
    let (theta, dtheta) = theta_transform(-0.2);
    println!("theta_tilde -0.2 maps to theta {theta:.4} (dθ/dθ̃ = {dtheta:.2})");

    let theta = 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 200_000;
    let hits = (0..n)
        .map(|_| sample_clayton3(theta, &mut rng))
        .filter(|u| u.as_ref().is_ok_and(|u| u.iter().all(|&x| x <= 0.5)))
        .count();
    println!(
        "P(U <= 0.5 componentwise) at theta 2: empirical {:.4}, exact {:.4}",
        hits as f64 / n as f64,
        clayton_cdf3(0.5, 0.5, 0.5, theta)?
    );
    Ok(())
}
