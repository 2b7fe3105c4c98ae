//! Clayton copula in two and three dimensions, with analytic derivatives.
//!
//! The k-variate Clayton CDF is `([sum u_i^-θ - (k-1)]_+)^(-1/θ)`. Trivariate
//! validity requires `θ >= -1/2`, so every entry point rejects `θ <= -0.5`.
//! Near `θ = 0` the product copula is used.

use crate::error::{Error, Result};
use crate::logistic::Margin;

/// Below this magnitude θ is treated as the independence copula.
pub const INDEPENDENCE_EPS: f64 = 1e-8;

/// Lower bound (exclusive) on θ accepted by the model.
pub const THETA_MIN: f64 = -0.5;

pub(crate) fn check_theta(theta: f64) -> Result<()> {
    if !theta.is_finite() || theta <= THETA_MIN {
        return Err(Error::Domain(format!(
            "clayton parameter {theta} outside (-0.5, inf)"
        )));
    }
    Ok(())
}

fn check_prob(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("copula argument {p} outside [0, 1]")));
    }
    Ok(())
}

/// Trivariate Clayton CDF.
pub fn clayton_cdf3(u: f64, v: f64, w: f64, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    for p in [u, v, w] {
        check_prob(p)?;
    }
    let m = [Margin::from_prob(u), Margin::from_prob(v), Margin::from_prob(w)];
    Ok(clayton_kernel(&m, theta).value)
}

/// Bivariate Clayton CDF, the margin of [`clayton_cdf3`] with one argument at one.
pub fn clayton_cdf2(u: f64, v: f64, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    for p in [u, v] {
        check_prob(p)?;
    }
    let m = [Margin::from_prob(u), Margin::from_prob(v)];
    Ok(clayton_kernel(&m, theta).value)
}

/// Kendall's τ implied by a Clayton parameter: `θ / (θ + 2)`.
pub fn kendall_tau(theta: f64) -> Result<f64> {
    check_theta(theta)?;
    if theta == 0.0 {
        return Err(Error::Domain("kendall_tau undefined at theta = 0".into()));
    }
    Ok(theta / (theta + 2.0))
}

/// Maps the unconstrained sampler coordinate to θ: returns `((t+1)^2 - 1, 2(t+1))`.
pub fn theta_transform(theta_tilde: f64) -> (f64, f64) {
    let s = theta_tilde + 1.0;
    (s * s - 1.0, 2.0 * s)
}

/// Copula value with its derivatives.
///
/// `d_index[i]` is the derivative with respect to the linear index `x_i`
/// where the i-th argument is `u_i = F(-x_i)`; `d_theta` is the derivative
/// with respect to θ.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct KernelEval {
    pub value: f64,
    pub d_index: [f64; 3],
    pub d_theta: f64,
}

/// Evaluates the Clayton CDF over 2 or 3 margins. Assumes θ was validated.
pub(crate) fn clayton_kernel(margins: &[Margin], theta: f64) -> KernelEval {
    let k = margins.len();
    debug_assert!(k == 2 || k == 3);
    let mut out = KernelEval::default();
    if margins.iter().any(|m| m.u <= 0.0) {
        return out;
    }
    let mut log_u = [0.0; 3];
    for (l, m) in log_u.iter_mut().zip(margins) {
        *l = m.u.ln();
    }

    if theta.abs() < INDEPENDENCE_EPS {
        let prod: f64 = margins.iter().map(|m| m.u).product();
        out.value = prod;
        for i in 0..k {
            out.d_index[i] = -prod * margins[i].complement;
        }
        // d/dθ at θ = 0 of the Clayton CDF: prod * sum_{i<j} ln u_i ln u_j
        let mut cross = 0.0;
        for i in 0..k {
            for j in (i + 1)..k {
                cross += log_u[i] * log_u[j];
            }
        }
        out.d_theta = prod * cross;
        return out;
    }

    let mut t = [0.0; 3];
    for i in 0..k {
        t[i] = -theta * log_u[i];
    }
    let t_max = t[..k].iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    // S = sum e^{t_i} - (k-1)
    let log_s = if t_max <= 1.0 {
        let s: f64 = t[..k].iter().map(|ti| ti.exp_m1()).sum();
        if s <= -1.0 {
            return out;
        }
        s.ln_1p()
    } else {
        let inner: f64 =
            t[..k].iter().map(|ti| (ti - t_max).exp()).sum::<f64>() - (k as f64 - 1.0) * (-t_max).exp();
        if inner <= 0.0 {
            return out;
        }
        t_max + inner.ln()
    };

    let log_c = -log_s / theta;
    let c = log_c.exp();
    if c == 0.0 {
        return out;
    }
    out.value = c;
    let mut ds_over_s = 0.0;
    for i in 0..k {
        let w = (t[i] - log_s).exp();
        out.d_index[i] = -c * w * margins[i].complement;
        ds_over_s -= log_u[i] * w;
    }
    out.d_theta = c * (log_s / (theta * theta) - ds_over_s / theta);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_and_substitution_values() {
        assert!((clayton_cdf3(1.0, 1.0, 1.0, 2.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((clayton_cdf3(0.5, 1.0, 1.0, 2.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((clayton_cdf3(0.5, 0.5, 0.5, 1.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((clayton_cdf2(0.5, 0.5, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn negative_bracket_clamps_to_zero() {
        // 3 * 0.1^0.4 - 2 = -0.8058 < 0
        let bracket = 3.0 * 0.1f64.powf(0.4) - 2.0;
        assert!(bracket < 0.0);
        assert_eq!(clayton_cdf3(0.1, 0.1, 0.1, -0.4).unwrap(), 0.0);
    }

    #[test]
    fn bivariate_margin_property() {
        for &u in &[0.1, 0.9] {
            for &th in &[-0.3, 2.0] {
                assert!((clayton_cdf2(u, 1.0, th).unwrap() - u).abs() < 1e-14);
                assert!((clayton_cdf3(u, 1.0, 1.0, th).unwrap() - u).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn trivariate_reduces_to_bivariate_with_unit_argument() {
        for &th in &[-0.45, -0.2, 0.3, 1.0, 4.0] {
            let c3 = clayton_cdf3(0.3, 0.7, 1.0, th).unwrap();
            let c2 = clayton_cdf2(0.3, 0.7, th).unwrap();
            assert!((c3 - c2).abs() < 1e-14);
        }
    }

    #[test]
    fn negative_dependence_is_below_independence() {
        let direct = (0.3f64.powf(0.3) + 0.7f64.powf(0.3) - 1.0).powf(1.0 / 0.3);
        let c = clayton_cdf2(0.3, 0.7, -0.3).unwrap();
        assert!((c - direct).abs() < 1e-14);
        assert!(c > 0.0 && c < 0.21);
    }

    #[test]
    fn independence_branch() {
        let c = clayton_cdf3(0.3, 0.6, 0.9, 1e-10).unwrap();
        assert!((c - 0.3 * 0.6 * 0.9).abs() < 1e-15);
        let c = clayton_cdf2(0.3, 0.6, 0.0).unwrap();
        assert!((c - 0.18).abs() < 1e-15);
    }

    #[test]
    fn continuity_across_independence_threshold() {
        let at0 = clayton_cdf3(0.3, 0.6, 0.9, 0.0).unwrap();
        for &th in &[2e-8, -2e-8, 1e-6, -1e-6] {
            let c = clayton_cdf3(0.3, 0.6, 0.9, th).unwrap();
            assert!((c - at0).abs() < 1e-6);
        }
    }

    #[test]
    fn domain_errors() {
        assert!(clayton_cdf3(0.5, 0.5, 0.5, -0.5).is_err());
        assert!(clayton_cdf3(0.5, 0.5, 0.5, -0.7).is_err());
        assert!(clayton_cdf3(1.2, 0.5, 0.5, 1.0).is_err());
        assert!(clayton_cdf2(-0.1, 0.5, 1.0).is_err());
        assert!(clayton_cdf2(0.5, 0.5, f64::NAN).is_err());
        assert!(kendall_tau(-0.6).is_err());
        assert!(kendall_tau(0.0).is_err());
    }

    #[test]
    fn kendall_values() {
        assert_eq!(kendall_tau(2.0).unwrap(), 0.5);
        assert!((kendall_tau(-0.353).unwrap() + 0.2143).abs() < 5e-4);
        assert!(kendall_tau(1e-12).unwrap().abs() < 1e-12);
    }

    #[test]
    fn transform_values() {
        assert_eq!(theta_transform(0.0), (0.0, 2.0));
        assert_eq!(theta_transform(-1.0), (-1.0, 0.0));
        assert_eq!(theta_transform(1.0), (3.0, 4.0));
    }

    #[test]
    fn large_theta_and_tiny_margins_stay_finite() {
        let c = clayton_cdf3(1e-200, 0.5, 0.5, 5.0).unwrap();
        assert!(c.is_finite() && c >= 0.0 && c <= 1e-200);
        let c = clayton_cdf2(1e-300, 1e-300, 40.0).unwrap();
        assert!(c.is_finite() && c <= 1e-300);
    }

    fn fd_index(margins_x: [f64; 3], k: usize, theta: f64) {
        let eval = |x: [f64; 3], th: f64| {
            let m: Vec<Margin> = x[..k].iter().map(|&xi| Margin::from_index(xi)).collect();
            clayton_kernel(&m, th)
        };
        let base = eval(margins_x, theta);
        let h = 1e-6;
        for i in 0..k {
            let mut xp = margins_x;
            let mut xm = margins_x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (eval(xp, theta).value - eval(xm, theta).value) / (2.0 * h);
            assert!(
                (fd - base.d_index[i]).abs() < 1e-7 * (1.0 + fd.abs()),
                "index {i}: fd {fd} analytic {}",
                base.d_index[i]
            );
        }
        let fd = (eval(margins_x, theta + h).value - eval(margins_x, theta - h).value) / (2.0 * h);
        assert!(
            (fd - base.d_theta).abs() < 1e-7 * (1.0 + fd.abs()),
            "theta: fd {fd} analytic {}",
            base.d_theta
        );
    }

    #[test]
    fn kernel_derivatives_match_finite_differences() {
        for &th in &[-0.45, -0.2, 0.01, 0.5, 1.0, 5.0] {
            fd_index([0.3, -0.7, 1.2], 3, th);
            fd_index([-1.0, 0.4, 0.0], 2, th);
        }
    }

    #[test]
    fn independence_theta_derivative_is_the_limit() {
        let m = [Margin::from_prob(0.3), Margin::from_prob(0.6), Margin::from_prob(0.9)];
        let at0 = clayton_kernel(&m, 0.0).d_theta;
        let near = clayton_kernel(&m, 1e-5).d_theta;
        assert!((at0 - near).abs() < 1e-4 * at0.abs().max(1e-3));
    }

    /// Inclusion-exclusion mass of the box (lo, hi] under the trivariate copula.
    fn box_mass(lo: [f64; 3], hi: [f64; 3], theta: f64) -> f64 {
        let mut mass = 0.0;
        for corner in 0..8u32 {
            let mut pt = [0.0; 3];
            let mut lows = 0;
            for (j, p) in pt.iter_mut().enumerate() {
                if corner & (1 << j) != 0 {
                    *p = lo[j];
                    lows += 1;
                } else {
                    *p = hi[j];
                }
            }
            let sign = if lows % 2 == 0 { 1.0 } else { -1.0 };
            mass += sign * clayton_cdf3(pt[0], pt[1], pt[2], theta).unwrap();
        }
        mass
    }

    #[test]
    fn three_increasing_on_grid() {
        let grid = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
        for &th in &[-0.45, -0.2, 0.5, 1.0, 5.0] {
            for i in 0..5 {
                for j in 0..5 {
                    for k in 0..5 {
                        let m = box_mass(
                            [grid[i], grid[j], grid[k]],
                            [grid[i + 1], grid[j + 1], grid[k + 1]],
                            th,
                        );
                        assert!(m >= -1e-12, "theta {th} box ({i},{j},{k}) mass {m}");
                    }
                }
            }
        }
    }
}
