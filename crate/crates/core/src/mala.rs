//! Metropolis-adjusted Langevin sampler.
//!
//! Proposal: `x' = x + (ε²/2) M ∇log π(x) + ε L ξ` with `M = L Lᵀ` and
//! `ξ ~ N(0, I)`; with the identity metric this is plain MALA. The step size ε
//! follows a Robbins–Monro recursion on `log ε` toward a target acceptance
//! probability during adaptation and is frozen afterwards. With a non-identity
//! metric, `M` is re-estimated from the chain in doubling windows inside the
//! adaptation phase.
//!
//! With `warm_start`, the chain first climbs from the initial point to the
//! posterior mode by damped Newton steps and seeds `M` with the inverse
//! negative Hessian there, so the first metric window already sees a
//! well-scaled chain.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::posterior::LogDensity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MetricAdaptation {
    /// Plain MALA, `M = I`.
    Identity,
    /// Diagonal `M` from windowed draw variances.
    Diagonal,
    /// Dense `M` from windowed draw covariances.
    #[default]
    Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MalaConfig {
    pub iterations: usize,
    pub initial_step: f64,
    pub target_accept: f64,
    pub adapt_until: usize,
    pub seed: u64,
    pub burn_in_fraction: f64,
    pub metric: MetricAdaptation,
    /// Start at the posterior mode with a Laplace-approximation metric.
    /// Ignored with the identity metric.
    pub warm_start: bool,
}

impl Default for MalaConfig {
    fn default() -> Self {
        MalaConfig {
            iterations: 5000,
            initial_step: 0.01,
            target_accept: 0.574,
            adapt_until: 2500,
            seed: 0,
            burn_in_fraction: 0.5,
            metric: MetricAdaptation::Dense,
            warm_start: true,
        }
    }
}

impl MalaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be positive".into()));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(Error::Config("initial_step must be positive".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::Config("target_accept must lie in (0, 1)".into()));
        }
        if self.adapt_until > self.iterations {
            return Err(Error::Config("adapt_until exceeds iterations".into()));
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return Err(Error::Config("burn_in_fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Preconditioning matrix `M` and its lower Cholesky factor.
#[derive(Debug, Clone)]
pub enum Metric {
    Identity,
    Dense { cov: DMatrix<f64>, chol: DMatrix<f64> },
}

impl Metric {
    pub fn from_covariance(cov: DMatrix<f64>) -> Option<Metric> {
        let chol = cov.clone().cholesky()?.l();
        Some(Metric::Dense { cov, chol })
    }

    fn precondition(&self, g: &[f64]) -> Vec<f64> {
        match self {
            Metric::Identity => g.to_vec(),
            Metric::Dense { cov, .. } => (cov * DVector::from_column_slice(g)).as_slice().to_vec(),
        }
    }

    fn scale_noise(&self, xi: &[f64]) -> Vec<f64> {
        match self {
            Metric::Identity => xi.to_vec(),
            Metric::Dense { chol, .. } => (chol * DVector::from_column_slice(xi)).as_slice().to_vec(),
        }
    }

    /// `rᵀ M⁻¹ r`
    fn inv_quad(&self, r: &[f64]) -> f64 {
        match self {
            Metric::Identity => r.iter().map(|x| x * x).sum(),
            Metric::Dense { chol, .. } => {
                let y = chol
                    .solve_lower_triangular(&DVector::from_column_slice(r))
                    .expect("cholesky factor has positive diagonal");
                y.norm_squared()
            }
        }
    }
}

/// Position with cached log density and gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub x: Vec<f64>,
    pub log_density: f64,
    pub grad: Vec<f64>,
}

impl ChainState {
    pub fn at<T: LogDensity + ?Sized>(target: &T, x: Vec<f64>) -> Result<Self> {
        let (log_density, grad) = target.evaluate(&x)?;
        Ok(ChainState { x, log_density, grad })
    }
}

fn langevin_mean(x: &[f64], grad: &[f64], step: f64, metric: &Metric) -> Vec<f64> {
    let drift = metric.precondition(grad);
    let h = 0.5 * step * step;
    x.iter().zip(drift).map(|(xi, di)| xi + h * di).collect()
}

/// Proposal for a given standard-normal vector `xi`.
pub fn propose(state: &ChainState, step: f64, metric: &Metric, xi: &[f64]) -> Vec<f64> {
    let mean = langevin_mean(&state.x, &state.grad, step, metric);
    let noise = metric.scale_noise(xi);
    mean.iter().zip(noise).map(|(m, n)| m + step * n).collect()
}

fn log_q(to: &[f64], from: &ChainState, step: f64, metric: &Metric) -> f64 {
    let mean = langevin_mean(&from.x, &from.grad, step, metric);
    let r: Vec<f64> = to.iter().zip(mean).map(|(t, m)| t - m).collect();
    -metric.inv_quad(&r) / (2.0 * step * step)
}

/// `log[π(x') q(x | x')] - log[π(x) q(x' | x)]`.
pub fn log_acceptance_ratio(current: &ChainState, proposal: &ChainState, step: f64, metric: &Metric) -> f64 {
    if proposal.log_density == f64::NEG_INFINITY || !proposal.log_density.is_finite() {
        return f64::NEG_INFINITY;
    }
    proposal.log_density - current.log_density + log_q(&current.x, proposal, step, metric)
        - log_q(&proposal.x, current, step, metric)
}

pub fn acceptance_probability(log_ratio: f64) -> f64 {
    if log_ratio.is_nan() {
        0.0
    } else {
        log_ratio.exp().min(1.0)
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: ChainState,
    pub accepted: bool,
    pub accept_prob: f64,
}

/// One MALA transition. Deterministic given the RNG state.
pub fn mala_step<T, R>(state: &ChainState, step: f64, metric: &Metric, target: &T, rng: &mut R) -> Result<StepOutcome>
where
    T: LogDensity + ?Sized,
    R: Rng + ?Sized,
{
    let xi: Vec<f64> = (0..state.x.len()).map(|_| rng.sample(StandardNormal)).collect();
    let u: f64 = rng.random();
    let x_new = propose(state, step, metric, &xi);
    let proposal = ChainState::at(target, x_new)?;
    let accept_prob = acceptance_probability(log_acceptance_ratio(state, &proposal, step, metric));
    if u < accept_prob {
        Ok(StepOutcome {
            state: proposal,
            accepted: true,
            accept_prob,
        })
    } else {
        Ok(StepOutcome {
            state: state.clone(),
            accepted: false,
            accept_prob,
        })
    }
}

/// Recorded draws of one chain, one row per iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorChain {
    pub names: Vec<String>,
    pub draws: Vec<Vec<f64>>,
    pub accept_flags: Vec<bool>,
    pub step_sizes: Vec<f64>,
    pub log_posteriors: Vec<f64>,
}

impl PosteriorChain {
    pub fn iterations(&self) -> usize {
        self.draws.len()
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.acceptance_rate_from(0)
    }

    /// Acceptance rate over iterations `start..`.
    pub fn acceptance_rate_from(&self, start: usize) -> f64 {
        let flags = &self.accept_flags[start.min(self.accept_flags.len())..];
        if flags.is_empty() {
            return 0.0;
        }
        flags.iter().filter(|&&a| a).count() as f64 / flags.len() as f64
    }

    pub fn burn_in_len(&self, fraction: f64) -> usize {
        (self.iterations() as f64 * fraction).floor() as usize
    }

    pub fn post_burn_in(&self, fraction: f64) -> &[Vec<f64>] {
        &self.draws[self.burn_in_len(fraction)..]
    }

    /// Draws of parameter `j` over iterations `start..`.
    pub fn column(&self, j: usize, start: usize) -> Vec<f64> {
        self.draws[start..].iter().map(|row| row[j]).collect()
    }
}

/// Metric estimation windows `[start, end)` inside `0..adapt_until`.
pub fn metric_windows(adapt_until: usize) -> Vec<(usize, usize)> {
    if adapt_until < 200 {
        return Vec::new();
    }
    let init = adapt_until * 6 / 100;
    let term = adapt_until * 15 / 100;
    let base = (adapt_until * 4 / 100).max(20);
    let last_end = adapt_until - term;
    let mut out = Vec::new();
    let mut start = init;
    let mut len = base;
    while start < last_end {
        let mut end = start + len;
        // Fold a short remainder into the final window.
        if end + 2 * len > last_end {
            end = last_end;
        }
        out.push((start, end));
        start = end;
        len *= 2;
    }
    out
}

fn window_metric(draws: &[Vec<f64>], kind: MetricAdaptation) -> Option<Metric> {
    let n = draws.len();
    if n < 3 {
        return None;
    }
    let dim = draws[0].len();
    let mut mean = vec![0.0; dim];
    for row in draws {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = DMatrix::zeros(dim, dim);
    for row in draws {
        let r = DVector::from_iterator(dim, row.iter().zip(&mean).map(|(x, m)| x - m));
        cov += &r * r.transpose();
    }
    cov /= (n - 1) as f64;
    if (0..dim).any(|i| !(cov[(i, i)] > 1e-300)) {
        return None;
    }
    // Shrink toward the diagonal.
    let w = n as f64 / (n as f64 + 5.0);
    let diag = DMatrix::from_diagonal(&cov.diagonal());
    let reg = match kind {
        MetricAdaptation::Dense => cov * w + diag * (1.0 - w),
        _ => diag,
    };
    Metric::from_covariance(reg)
}

/// Result of [`find_mode`].
#[derive(Debug, Clone)]
pub struct Mode {
    pub x: Vec<f64>,
    pub log_density: f64,
    /// Inverse of the negative finite-difference Hessian, if positive definite.
    pub covariance: Option<DMatrix<f64>>,
    pub iterations: usize,
}

fn fd_neg_hessian<T: LogDensity + ?Sized>(target: &T, x: &[f64]) -> Result<Option<DMatrix<f64>>> {
    let d = x.len();
    let mut h = DMatrix::zeros(d, d);
    for j in 0..d {
        let step = 1e-5 * x[j].abs().max(1.0);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += step;
        xm[j] -= step;
        let (lp, gp) = target.evaluate(&xp)?;
        let (lm, gm) = target.evaluate(&xm)?;
        if !(lp.is_finite() && lm.is_finite()) {
            return Ok(None);
        }
        for i in 0..d {
            h[(i, j)] = -(gp[i] - gm[i]) / (2.0 * step);
        }
    }
    Ok(Some((&h + h.transpose()) * 0.5))
}

/// `target` plus its mode-search adjustment.
struct ModeSearch<'a, T: ?Sized>(&'a T);

impl<T: LogDensity + ?Sized> LogDensity for ModeSearch<'_, T> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn evaluate(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (mut lp, mut grad) = self.0.evaluate(x)?;
        if !lp.is_finite() {
            return Ok((lp, grad));
        }
        let (adj, adj_grad) = self.0.mode_search_adjustment(x);
        lp += adj;
        for (g, a) in grad.iter_mut().zip(adj_grad) {
            *g += a;
        }
        Ok((if lp.is_nan() { f64::NEG_INFINITY } else { lp }, grad))
    }
}

/// Levenberg-damped Newton ascent from `init` on `target` plus its
/// [`LogDensity::mode_search_adjustment`]. `log_density` in the result is the
/// unadjusted target.
pub fn find_mode<T: LogDensity + ?Sized>(target: &T, init: Vec<f64>, max_iter: usize) -> Result<Mode> {
    let outer = target;
    let target = &ModeSearch(target);
    let d = init.len();
    let mut state = ChainState::at(target, init)?;
    if !state.log_density.is_finite() {
        return Err(Error::Sampler("initial point has non-finite log posterior".into()));
    }
    let mut lambda = 1e-3;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let Some(neg_h) = fd_neg_hessian(target, &state.x)? else { break };
        let g = DVector::from_column_slice(&state.grad);
        let scale = neg_h.diagonal().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let mut moved = false;
        for _ in 0..40 {
            let damped = &neg_h + DMatrix::identity(d, d) * (lambda * scale);
            if let Some(chol) = damped.cholesky() {
                let step = chol.solve(&g);
                let cand: Vec<f64> = state.x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                let next = ChainState::at(target, cand)?;
                if next.log_density.is_finite() && next.log_density >= state.log_density {
                    let gain = next.log_density - state.log_density;
                    state = next;
                    lambda = (lambda * 0.1).max(1e-12);
                    moved = gain > 1e-10 * (1.0 + state.log_density.abs());
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !moved {
            break;
        }
    }
    let covariance = fd_neg_hessian(target, &state.x)?.and_then(|h| h.cholesky().map(|c| c.inverse()));
    let log_density = outer.evaluate(&state.x)?.0;
    Ok(Mode {
        x: state.x,
        log_density,
        covariance,
        iterations,
    })
}

/// Number of leading iterations checked by the stuck-chain guard.
const EARLY_WINDOW: usize = 200;

/// Runs one chain from `init`.
pub fn run_chain<T: LogDensity + ?Sized>(
    target: &T,
    init: Vec<f64>,
    names: Vec<String>,
    config: &MalaConfig,
) -> Result<PosteriorChain> {
    config.validate()?;
    if init.len() != target.dim() || names.len() != target.dim() {
        return Err(Error::DimensionMismatch {
            what: "initial point",
            expected: target.dim(),
            got: init.len(),
        });
    }
    let mut state = ChainState::at(target, init)?;
    if !state.log_density.is_finite() {
        return Err(Error::Sampler("initial point has non-finite log posterior".into()));
    }
    let mut metric = Metric::Identity;
    if config.warm_start && config.metric != MetricAdaptation::Identity {
        let mode = find_mode(target, state.x.clone(), 100)?;
        // Without usable curvature the search is not trusted; stay at `init`.
        if let Some(cov) = mode.covariance {
            state = ChainState::at(target, mode.x)?;
            let cov = match config.metric {
                MetricAdaptation::Diagonal => DMatrix::from_diagonal(&cov.diagonal()),
                _ => cov,
            };
            metric = Metric::from_covariance(cov).unwrap_or(Metric::Identity);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let windows = match config.metric {
        MetricAdaptation::Identity => Vec::new(),
        _ => metric_windows(config.adapt_until),
    };
    let mut log_step = config.initial_step.ln();
    let mut adapt_t = 0usize;

    let n = config.iterations;
    let mut chain = PosteriorChain {
        names,
        draws: Vec::with_capacity(n),
        accept_flags: Vec::with_capacity(n),
        step_sizes: Vec::with_capacity(n),
        log_posteriors: Vec::with_capacity(n),
    };
    let mut early_accepts = 0usize;

    for it in 0..n {
        let step = log_step.exp();
        let out = mala_step(&state, step, &metric, target, &mut rng)?;
        state = out.state;
        chain.step_sizes.push(step);
        chain.accept_flags.push(out.accepted);
        chain.draws.push(state.x.clone());
        chain.log_posteriors.push(state.log_density);

        if it < EARLY_WINDOW && out.accepted {
            early_accepts += 1;
        }
        if it + 1 == EARLY_WINDOW.min(n) && early_accepts * 100 < it + 1 {
            return Err(Error::Sampler(format!(
                "{} of the first {} proposals rejected; step size or posterior is pathological",
                it + 1 - early_accepts,
                it + 1
            )));
        }

        if it < config.adapt_until {
            adapt_t += 1;
            let kappa = (adapt_t as f64).powf(-0.6);
            log_step += kappa * (out.accept_prob - config.target_accept);
            log_step = log_step.clamp(1e-10f64.ln(), 1e3f64.ln());

            if let Some(&(start, _)) = windows.iter().find(|(_, end)| *end == it + 1) {
                if let Some(m) = window_metric(&chain.draws[start..=it], config.metric) {
                    metric = m;
                    adapt_t = 0;
                }
            }
        }
    }
    Ok(chain)
}

/// Runs `n_chains` independent chains concurrently; chain `i` uses seed `seed + i`.
pub fn run_chains<T: LogDensity + ?Sized>(
    target: &T,
    init: Vec<f64>,
    names: Vec<String>,
    config: &MalaConfig,
    n_chains: usize,
) -> Result<Vec<PosteriorChain>> {
    (0..n_chains)
        .into_par_iter()
        .map(|i| {
            let cfg = MalaConfig {
                seed: config.seed.wrapping_add(i as u64),
                ..config.clone()
            };
            run_chain(target, init.clone(), names.clone(), &cfg)
        })
        .collect()
}
