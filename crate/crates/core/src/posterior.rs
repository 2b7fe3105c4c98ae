//! Log-posterior targets for the sampler.

use crate::error::Result;
use crate::likelihood::log_likelihood_with_gradient;
use crate::model::{ImpressionRecord, ParamLayout, ParameterSet};
use crate::prior::{log_prior, log_prior_gradient, PriorSpec};

/// A differentiable log density over a flat parameter vector.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    /// Log density and gradient at `x`. Points outside the support return
    /// `-inf` with an empty gradient.
    fn evaluate(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;

    /// Term added to the log density when searching for a starting mode,
    /// with its gradient. Targets whose density is unbounded (funnels) use it
    /// to move the search to coordinates where a mode exists.
    fn mode_search_adjustment(&self, _x: &[f64]) -> (f64, Vec<f64>) {
        (0.0, Vec::new())
    }
}

/// Likelihood of the selection model plus its priors.
pub struct Posterior<'a> {
    pub dataset: &'a [ImpressionRecord],
    pub layout: &'a ParamLayout,
    pub prior: &'a PriorSpec,
}

impl<'a> Posterior<'a> {
    pub fn new(dataset: &'a [ImpressionRecord], layout: &'a ParamLayout, prior: &'a PriorSpec) -> Self {
        Posterior {
            dataset,
            layout,
            prior,
        }
    }

    pub fn log_posterior(&self, params: &ParameterSet) -> Result<f64> {
        let lp = log_prior(params, self.prior);
        if lp == f64::NEG_INFINITY {
            return Ok(lp);
        }
        Ok(lp + crate::likelihood::log_likelihood(self.dataset, params)?)
    }

    pub fn log_posterior_gradient(&self, params: &ParameterSet) -> Result<Vec<f64>> {
        Ok(self.evaluate(&params.to_vec())?.1)
    }
}

impl LogDensity for Posterior<'_> {
    fn dim(&self) -> usize {
        self.layout.len()
    }

    fn evaluate(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let params = ParameterSet::from_slice(self.layout, x)?;
        let lp = log_prior(&params, self.prior);
        if lp == f64::NEG_INFINITY {
            return Ok((lp, Vec::new()));
        }
        let (ll, mut grad) = log_likelihood_with_gradient(self.dataset, &params)?;
        for (g, p) in grad.iter_mut().zip(log_prior_gradient(&params, self.prior)) {
            *g += p;
        }
        Ok((ll + lp, grad))
    }

    /// `log(δ|α1_baseline|)`: the Jacobian of the non-centred instrument
    /// coefficient `β_instr / (δ|α1_baseline|)`. The hierarchical prior makes
    /// the density unbounded as both go to zero; in non-centred coordinates it
    /// is not.
    fn mode_search_adjustment(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let j = self.layout.alpha1_offset();
        if self.prior.instrument_index.is_none() || self.prior.delta <= 0.0 || self.layout.kz() == 0 {
            return (0.0, Vec::new());
        }
        let mut grad = vec![0.0; x.len()];
        grad[j] = 1.0 / x[j];
        ((self.prior.delta * x[j].abs()).ln(), grad)
    }
}

/// Independent normal target, mostly for exercising the sampler.
#[derive(Debug, Clone)]
pub struct IsotropicNormal {
    pub mean: Vec<f64>,
    pub sd: f64,
}

impl LogDensity for IsotropicNormal {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn evaluate(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let var = self.sd * self.sd;
        let mut lp = 0.0;
        let grad = x
            .iter()
            .zip(&self.mean)
            .map(|(xi, mi)| {
                let r = xi - mi;
                lp -= 0.5 * r * r / var;
                -r / var
            })
            .collect();
        Ok((lp, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::log_likelihood;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dataset(rng: &mut ChaCha8Rng, n: usize) -> Vec<ImpressionRecord> {
        (0..n)
            .map(|_| {
                let v = rng.random_range(-1.0..1.0);
                let w = rng.random_range(-1.0..1.0);
                let d = rng.random_bool(0.6);
                let yt = rng.random_bool(0.4);
                let y = yt && rng.random_bool(0.5);
                let lang = f64::from(rng.random_range(0..2u8));
                ImpressionRecord::new(d, yt, y, vec![1.0, v, w], vec![1.0, v, w], vec![1.0, lang]).unwrap()
            })
            .collect()
    }

    #[test]
    fn flat_prior_limit_matches_likelihood_differences() {
        let layout = ParamLayout::anonymous(3, 2, 3);
        let prior = PriorSpec {
            default_sd: 1e12,
            w1_sd: 1e12,
            ..PriorSpec::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = dataset(&mut rng, 100);
        let post = Posterior::new(&data, &layout, &prior);
        let p1 = ParameterSet::initial(&layout);
        let mut p2 = p1.clone();
        p2.gamma[1] = 0.3;
        p2.beta[0] = -0.2;
        let dpost = post.log_posterior(&p2).unwrap() - post.log_posterior(&p1).unwrap();
        let dlik = log_likelihood(&data, &p2).unwrap() - log_likelihood(&data, &p1).unwrap();
        assert!((dpost - dlik).abs() < 1e-9);
    }

    #[test]
    fn posterior_gradient_matches_finite_differences() {
        let layout = ParamLayout::anonymous(3, 2, 3);
        let prior = PriorSpec {
            instrument_index: Some(2),
            ..PriorSpec::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data = dataset(&mut rng, 80);
        let post = Posterior::new(&data, &layout, &prior);
        for _ in 0..50 {
            let mut v: Vec<f64> = (0..layout.len()).map(|_| rng.random_range(-0.5..0.5)).collect();
            v[layout.alpha1_offset()] = rng.random_range(0.3..1.0);
            v[layout.w1_index()] = rng.random_range(0.2..1.0);
            v[layout.theta_tilde_index()] = rng.random_range(-0.25..1.0);
            let (_, g) = post.evaluate(&v).unwrap();
            let h = 1e-5;
            for i in 0..v.len() {
                let mut vp = v.clone();
                vp[i] += h;
                let mut vm = v.clone();
                vm[i] -= h;
                let fd = (post.evaluate(&vp).unwrap().0 - post.evaluate(&vm).unwrap().0) / (2.0 * h);
                let rel = (fd - g[i]).abs() / fd.abs().max(1.0);
                assert!(rel < 1e-6, "param {i}: fd {fd} analytic {}", g[i]);
            }
        }
    }

    #[test]
    fn outside_support_is_negative_infinity() {
        let layout = ParamLayout::anonymous(3, 2, 3);
        let prior = PriorSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = dataset(&mut rng, 10);
        let post = Posterior::new(&data, &layout, &prior);
        let mut p = ParameterSet::initial(&layout);
        p.set_theta(-0.55);
        let (lp, g) = post.evaluate(&p.to_vec()).unwrap();
        assert_eq!(lp, f64::NEG_INFINITY);
        assert!(g.is_empty());
    }
}
