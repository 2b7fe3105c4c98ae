//! Heidelberger–Welch stationarity test.
//!
//! The first 0%, 10%, ..., 50% of the series are discarded in turn until the
//! Cramér–von Mises statistic of the standardized partial-sum (Brownian
//! bridge) process falls below the critical value. The spectral density at
//! zero is estimated once, on the final half of the full series, with a
//! Bartlett window.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_SERIES_LEN: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarityResult {
    pub stationary: bool,
    /// Fraction of the series kept by the passing (or last tried) configuration.
    pub kept_fraction: f64,
    pub cvm_statistic: f64,
}

/// Bartlett-window estimate of the spectral density at frequency zero
/// (the long-run variance), with bandwidth `floor(sqrt(n))`.
pub fn spectral_density_at_zero(series: &[f64]) -> f64 {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let lag_max = ((n as f64).sqrt().floor() as usize).min(n - 1);
    let autocov = |k: usize| dev[..n - k].iter().zip(&dev[k..]).map(|(a, b)| a * b).sum::<f64>() / n as f64;
    let mut s = autocov(0);
    for k in 1..=lag_max {
        s += 2.0 * (1.0 - k as f64 / (lag_max as f64 + 1.0)) * autocov(k);
    }
    s
}

/// Modified Bessel function of the second kind, `K_ν(x) = ∫₀^∞ e^{-x cosh t} cosh(νt) dt`.
fn bessel_k(nu: f64, x: f64) -> f64 {
    // The integrand is smooth and decays double-exponentially; the trapezoid
    // rule converges geometrically in the step.
    let h: f64 = 0.01;
    let mut sum = 0.5 * (-x).exp();
    let mut t: f64 = h;
    loop {
        let v = (-x * t.cosh()).exp() * (nu * t).cosh();
        sum += v;
        if v < 1e-18 * sum {
            break;
        }
        t += h;
    }
    sum * h
}

/// CDF of the Cramér–von Mises limit distribution `∫₀¹ B(t)² dt`.
pub fn cramer_von_mises_cdf(q: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    for k in 0..4 {
        let kf = k as f64;
        let u = (4.0 * kf + 1.0).powi(2) / (16.0 * q);
        if u > 1e-5f64.ln().abs() + 30.0 {
            continue;
        }
        let z = gamma_ratio(kf) * (4.0 * kf + 1.0).sqrt()
            / (std::f64::consts::PI.powf(1.5) * q.sqrt());
        total += z * (-u).exp() * bessel_k(0.25, u);
    }
    total.min(1.0)
}

/// Γ(k + 1/2) / Γ(k + 1) for integer k ≥ 0.
fn gamma_ratio(k: f64) -> f64 {
    let mut r = std::f64::consts::PI.sqrt();
    let mut j = 0.0;
    while j < k {
        r *= (j + 0.5) / (j + 1.0);
        j += 1.0;
    }
    r
}

/// Upper-α critical value of the Cramér–von Mises limit distribution.
pub fn cramer_von_mises_critical(alpha: f64) -> f64 {
    let (mut lo, mut hi) = (1e-3, 10.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if cramer_von_mises_cdf(mid) < 1.0 - alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn cvm_statistic(series: &[f64], s0: f64) -> f64 {
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let mut partial = 0.0;
    let mut acc = 0.0;
    for x in series {
        partial += x - mean;
        acc += partial * partial / (n * s0);
    }
    acc / n
}

/// Heidelberger–Welch stationarity stage at level `alpha`.
pub fn heidelberger_welch(series: &[f64], alpha: f64) -> Result<StationarityResult> {
    let n = series.len();
    if n < MIN_SERIES_LEN {
        return Err(Error::Diagnostic(format!(
            "series of length {n} is shorter than {MIN_SERIES_LEN}"
        )));
    }
    if !(alpha > 0.0 && alpha <= 0.2) {
        return Err(Error::Diagnostic(format!("alpha {alpha} outside (0, 0.2]")));
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::Diagnostic("series contains non-finite values".into()));
    }
    let s0 = spectral_density_at_zero(&series[n / 2..]);
    if !(s0 > 1e-300) {
        return Err(Error::Diagnostic(
            "zero spectral density; series is degenerate".into(),
        ));
    }
    let critical = cramer_von_mises_critical(alpha);
    let mut last = StationarityResult {
        stationary: false,
        kept_fraction: 1.0,
        cvm_statistic: f64::NAN,
    };
    for tenth in 0..=5 {
        let start = n * tenth / 10;
        let stat = cvm_statistic(&series[start..], s0);
        last = StationarityResult {
            stationary: stat < critical,
            kept_fraction: (n - start) as f64 / n as f64,
            cvm_statistic: stat,
        };
        if last.stationary {
            break;
        }
    }
    Ok(last)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn bessel_k_half_order_closed_form() {
        // K_{1/2}(x) = sqrt(π / (2x)) e^{-x}
        for &x in &[0.1, 0.5, 2.0, 7.0] {
            let exact = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x as f64).exp();
            assert!((bessel_k(0.5, x) / exact - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn known_critical_values() {
        // Tabulated quantiles of the Cramér–von Mises limit law.
        assert!((cramer_von_mises_critical(0.10) - 0.34730).abs() < 1e-3);
        assert!((cramer_von_mises_critical(0.05) - 0.46136).abs() < 1e-3);
        assert!((cramer_von_mises_critical(0.01) - 0.74346).abs() < 1e-3);
    }

    #[test]
    fn cdf_is_monotone() {
        let mut prev = 0.0;
        for i in 1..200 {
            let c = cramer_von_mises_cdf(i as f64 * 0.01);
            assert!(c >= prev - 1e-12);
            prev = c;
        }
        assert!(prev > 0.99);
    }

    #[test]
    fn linear_trend_fails() {
        let n = 2000;
        let series: Vec<f64> = (0..n).map(|t| t as f64 / n as f64).collect();
        let r = heidelberger_welch(&series, 0.05).unwrap();
        assert!(!r.stationary);
        assert!(r.cvm_statistic > cramer_von_mises_critical(0.05), "{r:?}");
        assert_eq!(r.kept_fraction, 0.5);
    }

    #[test]
    fn constant_series_is_an_error() {
        assert!(matches!(heidelberger_welch(&[1.0; 500], 0.05), Err(Error::Diagnostic(_))));
    }

    #[test]
    fn input_validation() {
        assert!(heidelberger_welch(&[0.0; 50], 0.05).is_err());
        let xs: Vec<f64> = (0..200).map(|i| (i as f64).sin()).collect();
        assert!(heidelberger_welch(&xs, 0.5).is_err());
        assert!(heidelberger_welch(&xs, 0.0).is_err());
    }

    #[test]
    fn white_noise_passes_at_nominal_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut first_try = 0;
        for _ in 0..200 {
            let xs: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect();
            let r = heidelberger_welch(&xs, 0.05).unwrap();
            if r.stationary && r.kept_fraction == 1.0 {
                first_try += 1;
            }
        }
        assert!(first_try >= 180, "{first_try} / 200");
    }
}
