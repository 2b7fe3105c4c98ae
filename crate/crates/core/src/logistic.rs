//! Standard logistic distribution helpers.

/// Standard logistic CDF `1 / (1 + e^-x)`, evaluated without overflow.
pub fn logistic_cdf(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln F(x)` for the standard logistic CDF.
pub fn logistic_log_cdf(x: f64) -> f64 {
    -softplus(-x)
}

/// Logistic quantile `ln(u / (1 - u))`.
pub fn logistic_quantile(u: f64) -> f64 {
    (u / (1.0 - u)).ln()
}

fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// Lower-tail mass `u = F(-x)` together with its complement `F(x)`.
///
/// Both are computed directly so that neither loses precision when the other
/// is close to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Margin {
    pub u: f64,
    pub complement: f64,
}

impl Margin {
    pub fn from_index(x: f64) -> Self {
        Margin {
            u: logistic_cdf(-x),
            complement: logistic_cdf(x),
        }
    }

    pub fn from_prob(u: f64) -> Self {
        Margin {
            u,
            complement: 1.0 - u,
        }
    }

    /// d u / d x where `u = F(-x)`.
    pub fn du_dx(&self) -> f64 {
        -self.u * self.complement
    }
}
