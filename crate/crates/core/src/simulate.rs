//! Synthetic impression data from the full model.
//!
//! Error triples are Clayton-coupled logistic draws, sampled by conditional
//! inversion. Record `i` draws its covariates from ChaCha stream `2i` and its
//! errors from stream `2i + 1`, so output is independent of thread count.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::{check_theta, INDEPENDENCE_EPS};
use crate::dataset::Dataset;
use crate::design::{Design, ModelSpec, RawColumn, RawTable};
use crate::error::{Error, Result};
use crate::logistic::logistic_quantile;
use crate::model::{indices_unchecked, ParameterSet};

const BASE_FLOOR: f64 = 1e-300;
const U_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalBlock {
    pub name: String,
    pub levels: Vec<String>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "lowercase")]
pub enum ContinuousDist {
    Uniform { low: f64, high: f64 },
    Normal { mean: f64, sd: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousBlock {
    pub name: String,
    #[serde(flatten)]
    pub dist: ContinuousDist,
}

/// How to generate covariates, and which roles they play.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateGenSpec {
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub categorical: Vec<CategoricalBlock>,
    #[serde(default)]
    pub continuous: Vec<ContinuousBlock>,
    pub roles: ModelSpec,
}

enum Sampler {
    Categorical(WeightedIndex<f64>),
    Uniform(Uniform<f64>),
    Normal(Normal<f64>),
}

impl CovariateGenSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        for b in &self.categorical {
            if b.levels.is_empty() || b.levels.len() != b.probs.len() {
                return Err(Error::Config(format!("block `{}`: levels and probs differ in length", b.name)));
            }
            if b.probs.iter().any(|p| !(*p >= 0.0)) || (b.probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("block `{}`: probabilities must sum to 1", b.name)));
            }
            if !self.roles.categorical.contains_key(&b.name) {
                return Err(Error::Config(format!("block `{}` needs a reference level", b.name)));
            }
        }
        for b in &self.continuous {
            let ok = match b.dist {
                ContinuousDist::Uniform { low, high } => low < high && low.is_finite() && high.is_finite(),
                ContinuousDist::Normal { mean, sd } => sd > 0.0 && mean.is_finite() && sd.is_finite(),
            };
            if !ok {
                return Err(Error::Config(format!("block `{}`: invalid distribution parameters", b.name)));
            }
        }
        self.roles.validate()
    }

    /// Level sets declared by the categorical blocks, sorted.
    pub fn levels(&self) -> BTreeMap<String, Vec<String>> {
        self.categorical
            .iter()
            .map(|b| {
                let mut lv = b.levels.clone();
                lv.sort();
                (b.name.clone(), lv)
            })
            .collect()
    }

    pub fn design(&self) -> Result<Design> {
        self.validate()?;
        Design::new(&self.roles, &self.levels())
    }

    fn samplers(&self) -> Result<Vec<Sampler>> {
        let mut out = Vec::new();
        for b in &self.categorical {
            out.push(Sampler::Categorical(
                WeightedIndex::new(&b.probs).map_err(|e| Error::Config(e.to_string()))?,
            ));
        }
        for b in &self.continuous {
            out.push(match b.dist {
                ContinuousDist::Uniform { low, high } => {
                    Sampler::Uniform(Uniform::new(low, high).map_err(|e| Error::Config(e.to_string()))?)
                }
                ContinuousDist::Normal { mean, sd } => {
                    Sampler::Normal(Normal::new(mean, sd).map_err(|e| Error::Config(e.to_string()))?)
                }
            });
        }
        Ok(out)
    }

    /// Covariate table: categorical blocks first, then continuous blocks.
    pub fn generate_table(&self) -> Result<RawTable> {
        self.validate()?;
        let samplers = self.samplers()?;
        let rows: Vec<Vec<f64>> = (0..self.n)
            .into_par_iter()
            .map(|i| {
                let mut rng = substream(self.seed, 2 * i as u64);
                samplers
                    .iter()
                    .map(|s| match s {
                        Sampler::Categorical(w) => w.sample(&mut rng) as f64,
                        Sampler::Uniform(u) => u.sample(&mut rng),
                        Sampler::Normal(nd) => nd.sample(&mut rng),
                    })
                    .collect()
            })
            .collect();
        let mut columns = Vec::new();
        for (j, b) in self.categorical.iter().enumerate() {
            let col = rows.iter().map(|r| b.levels[r[j] as usize].clone()).collect();
            columns.push((b.name.clone(), RawColumn::Categorical(col)));
        }
        let off = self.categorical.len();
        for (j, b) in self.continuous.iter().enumerate() {
            columns.push((b.name.clone(), RawColumn::Numeric(rows.iter().map(|r| r[off + j]).collect())));
        }
        Ok(RawTable { columns })
    }
}

fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Maps independent uniforms `(u1, p2, p3)` to a trivariate Clayton draw by
/// inverting the conditional distributions of `u2 | u1` and `u3 | u1, u2`.
pub fn clayton3_from_uniforms(theta: f64, u1: f64, p2: f64, p3: f64) -> Result<[f64; 3]> {
    check_theta(theta)?;
    for u in [u1, p2, p3] {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain(format!("uniform {u} outside (0, 1)")));
        }
    }
    if theta.abs() < INDEPENDENCE_EPS {
        return Ok([u1, p2, p3]);
    }
    let a1 = u1.powf(-theta);
    let base2 = ((p2.powf(-theta / (1.0 + theta)) - 1.0) * a1 + 1.0).max(BASE_FLOOR);
    let u2 = base2.powf(-1.0 / theta);
    let s2 = a1 + u2.powf(-theta) - 1.0;
    let base3 = (s2 * (p3.powf(-theta / (1.0 + 2.0 * theta)) - 1.0) + 1.0).max(BASE_FLOOR);
    let u3 = base3.powf(-1.0 / theta);
    let clamp = |u: f64| u.clamp(U_CLAMP, 1.0 - U_CLAMP);
    Ok([clamp(u1), clamp(u2), clamp(u3)])
}

/// One trivariate Clayton draw with uniform margins.
pub fn sample_clayton3<R: Rng + ?Sized>(theta: f64, rng: &mut R) -> Result<[f64; 3]> {
    check_theta(theta)?;
    let u1: f64 = rng.sample(Open01);
    let p2: f64 = rng.sample(Open01);
    let p3: f64 = rng.sample(Open01);
    clayton3_from_uniforms(theta, u1, p2, p3)
}

/// One error triple with standard logistic margins.
pub fn sample_error_triple<R: Rng + ?Sized>(theta: f64, rng: &mut R) -> Result<[f64; 3]> {
    Ok(sample_clayton3(theta, rng)?.map(logistic_quantile))
}

/// Draws outcomes for every record of `dataset` in place, using error stream
/// `2i + 1` of `seed` for record `i`.
pub fn draw_outcomes(dataset: &mut Dataset, params: &ParameterSet, seed: u64) -> Result<()> {
    params.check_layout(&dataset.design.layout)?;
    let theta = params.theta();
    check_theta(theta)?;
    dataset.records.par_iter_mut().enumerate().try_for_each(|(i, r)| {
        let mut rng = substream(seed, 2 * i as u64 + 1);
        let [e1, e2, e3] = sample_error_triple(theta, &mut rng)?;
        let idx = indices_unchecked(r, params);
        r.d = idx.a + e1 >= 0.0;
        r.y_tau = idx.b(r.d) + e2 >= 0.0;
        r.y = r.y_tau && idx.c(r.d) + e3 >= 0.0;
        Ok(())
    })
}

/// Full synthetic dataset: covariates, then errors pushed through the model.
pub fn simulate_dataset(params: &ParameterSet, covspec: &CovariateGenSpec) -> Result<Dataset> {
    let design = covspec.design()?;
    params.check_layout(&design.layout)?;
    let table = covspec.generate_table()?;
    let n = covspec.n;
    let zeros = vec![false; n];
    let records = design.records(&zeros, &zeros, &zeros, &table)?;
    let mut dataset = Dataset {
        spec: covspec.roles.clone(),
        design,
        table,
        records,
    };
    draw_outcomes(&mut dataset, params, covspec.seed)?;
    Ok(dataset)
}
