//! A ready-made synthetic design shaped like an ad-impression dataset:
//! language (3 levels), WiFi, device volume (the instrument), screen
//! resolution and app version. Event rates are in the 0.1–0.5 range so that
//! moderate sample sizes carry real information.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::design::ModelSpec;
use crate::error::{Error, Result};
use crate::model::{ParamLayout, ParameterSet};
use crate::simulate::{CategoricalBlock, ContinuousBlock, ContinuousDist, CovariateGenSpec};

pub fn benchmark_model() -> ModelSpec {
    let all: Vec<String> = ["lang", "wifi", "volume", "resolution", "version"]
        .map(String::from)
        .to_vec();
    ModelSpec {
        treatment: "incentivized".into(),
        intermediate: "click".into(),
        final_outcome: "install".into(),
        x1: all.clone(),
        x2: all,
        z: vec!["lang".into()],
        instrument: "volume".into(),
        categorical: BTreeMap::from([("lang".into(), "EN".into()), ("wifi".into(), "no".into())]),
        drop: vec![],
    }
}

pub fn benchmark_covariates(n: usize, seed: u64) -> CovariateGenSpec {
    CovariateGenSpec {
        n,
        seed,
        categorical: vec![
            CategoricalBlock {
                name: "lang".into(),
                levels: vec!["EN".into(), "ES".into(), "ZH".into()],
                probs: vec![0.5, 0.3, 0.2],
            },
            CategoricalBlock {
                name: "wifi".into(),
                levels: vec!["no".into(), "yes".into()],
                probs: vec![0.4, 0.6],
            },
        ],
        continuous: vec![
            ContinuousBlock {
                name: "volume".into(),
                dist: ContinuousDist::Uniform { low: 0.0, high: 1.0 },
            },
            ContinuousBlock {
                name: "resolution".into(),
                dist: ContinuousDist::Normal { mean: 0.0, sd: 1.0 },
            },
            ContinuousBlock {
                name: "version".into(),
                dist: ContinuousDist::Uniform { low: -1.0, high: 1.0 },
            },
        ],
        roles: benchmark_model(),
    }
}

/// A named scalar parameter or a block of named coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TruthEntry {
    Scalar(f64),
    Block(BTreeMap<String, f64>),
}

/// Block name (`gamma`, `alpha1`, `beta`) → column → value, plus scalars
/// `alpha2`, `w1`, `w2` and `theta`. Anything unnamed is zero.
pub type Truth = BTreeMap<String, TruthEntry>;

/// Builds a parameter set from named coefficients.
pub fn parameters_from_names(layout: &ParamLayout, truth: &Truth) -> Result<ParameterSet> {
    let mut p = ParameterSet::zeros(layout);
    for (name, entry) in truth {
        match (name.as_str(), entry) {
            ("alpha2", TruthEntry::Scalar(v)) => p.alpha2 = *v,
            ("w1", TruthEntry::Scalar(v)) => p.w1 = *v,
            ("w2", TruthEntry::Scalar(v)) => p.w2 = *v,
            ("theta", TruthEntry::Scalar(v)) => p.set_theta(*v),
            (block @ ("gamma" | "alpha1" | "beta"), TruthEntry::Block(entries)) => {
                let (names, target) = match block {
                    "gamma" => (&layout.x1_names, &mut p.gamma),
                    "alpha1" => (&layout.z_names, &mut p.alpha1),
                    _ => (&layout.x2_names, &mut p.beta),
                };
                for (col, v) in entries {
                    let j = names
                        .iter()
                        .position(|n| n == col)
                        .ok_or_else(|| Error::Config(format!("no column `{col}` in block `{block}`")))?;
                    target[j] = *v;
                }
            }
            (other, _) => return Err(Error::Config(format!("unknown or malformed parameter `{other}`"))),
        }
    }
    Ok(p)
}

/// Inverse of [`parameters_from_names`], with θ in place of θ̃.
pub fn names_from_parameters(layout: &ParamLayout, p: &ParameterSet) -> Truth {
    let block = |names: &[String], v: &[f64]| {
        TruthEntry::Block(names.iter().cloned().zip(v.iter().copied()).collect())
    };
    BTreeMap::from([
        ("gamma".to_string(), block(&layout.x1_names, &p.gamma)),
        ("alpha1".to_string(), block(&layout.z_names, &p.alpha1)),
        ("beta".to_string(), block(&layout.x2_names, &p.beta)),
        ("alpha2".to_string(), TruthEntry::Scalar(p.alpha2)),
        ("w1".to_string(), TruthEntry::Scalar(p.w1)),
        ("w2".to_string(), TruthEntry::Scalar(p.w2)),
        ("theta".to_string(), TruthEntry::Scalar(p.theta())),
    ])
}

/// True parameters for the benchmark design at copula parameter `theta`.
pub fn benchmark_truth(theta: f64) -> Truth {
    let block = |pairs: &[(&str, f64)]| {
        TruthEntry::Block(pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect())
    };
    BTreeMap::from([
        (
            "gamma".to_string(),
            block(&[
                ("(intercept)", -0.2),
                ("lang=ES", -0.3),
                ("lang=ZH", 0.4),
                ("wifi=yes", 0.5),
                ("volume", 1.5),
                ("resolution", -0.3),
                ("version", 0.4),
            ]),
        ),
        (
            "alpha1".to_string(),
            block(&[("(baseline)", 0.5), ("lang=ES", -0.25), ("lang=ZH", 0.3)]),
        ),
        (
            "beta".to_string(),
            block(&[
                ("(intercept)", -0.6),
                ("lang=ES", 0.2),
                ("lang=ZH", -0.3),
                ("wifi=yes", 0.3),
                ("volume", 0.05),
                ("resolution", 0.25),
                ("version", -0.2),
            ]),
        ),
        ("alpha2".to_string(), TruthEntry::Scalar(0.141)),
        ("w1".to_string(), TruthEntry::Scalar(0.5)),
        ("w2".to_string(), TruthEntry::Scalar(0.4)),
        ("theta".to_string(), TruthEntry::Scalar(theta)),
    ])
}
