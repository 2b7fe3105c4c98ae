//! Posterior means and standard deviations after burn-in, plus per-parameter
//! stationarity checks.

use serde::{Deserialize, Serialize};

use crate::copula::theta_transform;
use crate::diagnostics::{heidelberger_welch, StationarityResult};
use crate::error::{Error, Result};
use crate::mala::PosteriorChain;

/// Minimum number of draws left after burn-in.
pub const MIN_KEPT_DRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    /// One entry per flattened parameter, in sampler (θ̃) coordinates.
    pub parameters: Vec<ParamSummary>,
    /// θ = (θ̃+1)² − 1, transformed draw by draw before averaging.
    pub theta: ParamSummary,
    pub kept_draws: usize,
    pub burn_in: usize,
}

impl PosteriorSummary {
    pub fn means(&self) -> Vec<f64> {
        self.parameters.iter().map(|p| p.mean).collect()
    }

    pub fn sds(&self) -> Vec<f64> {
        self.parameters.iter().map(|p| p.sd).collect()
    }
}

/// Mean and sample sd (n − 1 denominator). Exact for constant input.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mut mean = xs.iter().sum::<f64>() / n;
    mean += xs.iter().map(|x| x - mean).sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

fn burn_in_checked(chain: &PosteriorChain, fraction: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Config("burn_in_fraction must lie in [0, 1)".into()));
    }
    let burn = chain.burn_in_len(fraction);
    let kept = chain.iterations() - burn;
    if kept < MIN_KEPT_DRAWS {
        return Err(Error::InsufficientDraws {
            available: kept,
            required: MIN_KEPT_DRAWS,
        });
    }
    Ok(burn)
}

pub fn posterior_summary(chain: &PosteriorChain, burn_in_fraction: f64) -> Result<PosteriorSummary> {
    let burn = burn_in_checked(chain, burn_in_fraction)?;
    let parameters = chain
        .names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let (mean, sd) = mean_sd(&chain.column(j, burn));
            ParamSummary {
                name: name.clone(),
                mean,
                sd,
            }
        })
        .collect();
    let tt = chain
        .names
        .iter()
        .position(|n| n == "theta_tilde")
        .unwrap_or(chain.names.len() - 1);
    let thetas: Vec<f64> = chain.column(tt, burn).into_iter().map(|t| theta_transform(t).0).collect();
    let (mean, sd) = mean_sd(&thetas);
    Ok(PosteriorSummary {
        parameters,
        theta: ParamSummary {
            name: "theta".into(),
            mean,
            sd,
        },
        kept_draws: chain.iterations() - burn,
        burn_in: burn,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub name: String,
    #[serde(flatten)]
    pub result: StationarityResult,
}

/// Heidelberger–Welch on the post-burn-in draws of every parameter.
pub fn convergence_table(chain: &PosteriorChain, burn_in_fraction: f64, alpha: f64) -> Result<Vec<ConvergenceRow>> {
    let burn = burn_in_checked(chain, burn_in_fraction)?;
    chain
        .names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            Ok(ConvergenceRow {
                name: name.clone(),
                result: heidelberger_welch(&chain.column(j, burn), alpha)?,
            })
        })
        .collect()
}
