//! Priors, including the plausibly-exogenous prior on the instrument's
//! coefficient in the intermediate-outcome equation.

use serde::{Deserialize, Serialize};

use crate::copula::THETA_MIN;
use crate::error::{Error, Result};
use crate::model::{ParamLayout, ParameterSet};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Hierarchical sds below this are treated as degenerate.
const MIN_HIER_SD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorSpec {
    /// sd of the N(0, sd²) prior on unrestricted coefficients and on θ̃.
    pub default_sd: f64,
    pub w1_mean: f64,
    /// Read as a standard deviation; `N(0.5, 0.25)` with 0.25 as variance gives 0.5.
    pub w1_sd: f64,
    /// Scale δ of the instrument prior `N(0, δ² α1_baseline²)`.
    pub delta: f64,
    /// Position of the instrument's coefficient inside the β block.
    pub instrument_index: Option<usize>,
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec {
            default_sd: 100.0,
            w1_mean: 0.5,
            w1_sd: 0.5,
            delta: 0.25,
            instrument_index: None,
        }
    }
}

impl PriorSpec {
    pub fn validate(&self, layout: &ParamLayout) -> Result<()> {
        if !(self.default_sd > 0.0 && self.w1_sd > 0.0) {
            return Err(Error::Config("prior standard deviations must be positive".into()));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::Config("delta must be non-negative".into()));
        }
        if let Some(i) = self.instrument_index {
            if i >= layout.k2() {
                return Err(Error::Config(format!(
                    "instrument index {i} outside beta block of length {}",
                    layout.k2()
                )));
            }
            if layout.kz() == 0 {
                return Err(Error::Config("instrument prior needs an alpha1 baseline".into()));
            }
        }
        Ok(())
    }
}

fn normal_log_density(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -sd.ln() - LN_SQRT_2PI - 0.5 * z * z
}

fn in_support(params: &ParameterSet, spec: &PriorSpec) -> Option<f64> {
    if params.theta() <= THETA_MIN {
        return None;
    }
    match spec.instrument_index {
        Some(_) => {
            let sd = spec.delta * params.alpha1.first().copied().unwrap_or(0.0).abs();
            (sd >= MIN_HIER_SD).then_some(sd)
        }
        None => Some(f64::NAN),
    }
}

/// Log prior density; `-inf` outside the support.
pub fn log_prior(params: &ParameterSet, spec: &PriorSpec) -> f64 {
    let Some(hier_sd) = in_support(params, spec) else {
        return f64::NEG_INFINITY;
    };
    let sd = spec.default_sd;
    let mut lp = 0.0;
    lp += params.gamma.iter().map(|&g| normal_log_density(g, 0.0, sd)).sum::<f64>();
    lp += params.alpha1.iter().map(|&a| normal_log_density(a, 0.0, sd)).sum::<f64>();
    for (i, &b) in params.beta.iter().enumerate() {
        lp += if Some(i) == spec.instrument_index {
            normal_log_density(b, 0.0, hier_sd)
        } else {
            normal_log_density(b, 0.0, sd)
        };
    }
    lp += normal_log_density(params.alpha2, 0.0, sd);
    lp += normal_log_density(params.w1, spec.w1_mean, spec.w1_sd);
    lp += normal_log_density(params.w2, 0.0, sd);
    lp += normal_log_density(params.theta_tilde, 0.0, sd);
    lp
}

/// Gradient of [`log_prior`] in flattened order. Only meaningful where the
/// prior is finite; returns zeros elsewhere.
pub fn log_prior_gradient(params: &ParameterSet, spec: &PriorSpec) -> Vec<f64> {
    let mut v = params.to_vec();
    let Some(_) = in_support(params, spec) else {
        v.iter_mut().for_each(|x| *x = 0.0);
        return v;
    };
    let prec = 1.0 / (spec.default_sd * spec.default_sd);
    for g in v.iter_mut() {
        *g *= -prec;
    }
    let k1 = params.gamma.len();
    let kz = params.alpha1.len();
    let beta0 = k1 + kz;
    let tail = beta0 + params.beta.len();
    v[tail + 1] = -(params.w1 - spec.w1_mean) / (spec.w1_sd * spec.w1_sd);

    if let Some(i) = spec.instrument_index {
        let g = params.beta[i];
        let a = params.alpha1[0];
        let d2 = spec.delta * spec.delta;
        v[beta0 + i] = -g / (d2 * a * a);
        // d/da of [-ln|δ a| - g²/(2 δ² a²)]
        v[k1] += g * g / (d2 * a * a * a) - 1.0 / a;
    }
    v
}
