//! Observation and parameter types for the three-equation selection model.
//!
//! ```text
//! d      = 1[x1·γ + e1 >= 0]
//! y_tau  = 1[(α1·z) d + x2·β + e2 >= 0]
//! y      = y_tau · 1[α2 d + w1 (x2·β) + w2 + e3 >= 0]
//! ```

use serde::{Deserialize, Serialize};

use crate::copula::theta_transform;
use crate::error::{Error, Result};

/// One ad impression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpressionRecord {
    pub d: bool,
    pub y_tau: bool,
    pub y: bool,
    /// Selection covariates, intercept first.
    pub x1: Vec<f64>,
    /// Outcome covariates, intercept first.
    pub x2: Vec<f64>,
    /// Treatment-interaction covariates, baseline 1 first.
    pub z: Vec<f64>,
}

impl ImpressionRecord {
    pub fn new(d: bool, y_tau: bool, y: bool, x1: Vec<f64>, x2: Vec<f64>, z: Vec<f64>) -> Result<Self> {
        if y && !y_tau {
            return Err(Error::Domain("final outcome without intermediate outcome".into()));
        }
        if x1.iter().chain(&x2).chain(&z).any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite covariate".into()));
        }
        Ok(ImpressionRecord {
            d,
            y_tau,
            y,
            x1,
            x2,
            z,
        })
    }
}

/// Column names behind each coefficient block; fixes the flattening order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub x1_names: Vec<String>,
    pub x2_names: Vec<String>,
    pub z_names: Vec<String>,
}

impl ParamLayout {
    pub fn new(x1_names: Vec<String>, x2_names: Vec<String>, z_names: Vec<String>) -> Self {
        ParamLayout {
            x1_names,
            x2_names,
            z_names,
        }
    }

    /// Layout with generic column names, for programmatic use.
    pub fn anonymous(k1: usize, kz: usize, k2: usize) -> Self {
        let names = |p: &str, k: usize| (0..k).map(|i| format!("{p}{i}")).collect();
        ParamLayout::new(names("x1_", k1), names("x2_", k2), names("z_", kz))
    }

    pub fn k1(&self) -> usize {
        self.x1_names.len()
    }

    pub fn k2(&self) -> usize {
        self.x2_names.len()
    }

    pub fn kz(&self) -> usize {
        self.z_names.len()
    }

    /// Length of the flattened parameter vector.
    pub fn len(&self) -> usize {
        self.k1() + self.kz() + self.k2() + 4
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn gamma_offset(&self) -> usize {
        0
    }

    pub fn alpha1_offset(&self) -> usize {
        self.k1()
    }

    pub fn beta_offset(&self) -> usize {
        self.k1() + self.kz()
    }

    pub fn alpha2_index(&self) -> usize {
        self.beta_offset() + self.k2()
    }

    pub fn w1_index(&self) -> usize {
        self.alpha2_index() + 1
    }

    pub fn w2_index(&self) -> usize {
        self.alpha2_index() + 2
    }

    pub fn theta_tilde_index(&self) -> usize {
        self.alpha2_index() + 3
    }

    /// Parameter names in flattening order.
    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.len());
        out.extend(self.x1_names.iter().map(|n| format!("gamma[{n}]")));
        out.extend(self.z_names.iter().map(|n| format!("alpha1[{n}]")));
        out.extend(self.x2_names.iter().map(|n| format!("beta[{n}]")));
        out.extend(["alpha2", "w1", "w2", "theta_tilde"].map(String::from));
        out
    }

    pub fn check_record(&self, r: &ImpressionRecord) -> Result<()> {
        for (what, expected, got) in [
            ("x1 length", self.k1(), r.x1.len()),
            ("x2 length", self.k2(), r.x2.len()),
            ("z length", self.kz(), r.z.len()),
        ] {
            if expected != got {
                return Err(Error::DimensionMismatch { what, expected, got });
            }
        }
        Ok(())
    }
}

/// Full coefficient vector. `theta_tilde` is the unconstrained copula coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub gamma: Vec<f64>,
    pub alpha1: Vec<f64>,
    pub beta: Vec<f64>,
    pub alpha2: f64,
    pub w1: f64,
    pub w2: f64,
    pub theta_tilde: f64,
}

impl ParameterSet {
    pub fn zeros(layout: &ParamLayout) -> Self {
        ParameterSet {
            gamma: vec![0.0; layout.k1()],
            alpha1: vec![0.0; layout.kz()],
            beta: vec![0.0; layout.k2()],
            alpha2: 0.0,
            w1: 0.0,
            w2: 0.0,
            theta_tilde: 0.0,
        }
    }

    /// Sampler starting point: coefficients at 0 except the α1 baseline at
    /// 0.1 (which keeps the instrument prior proper), w1 at 0.5, θ̃ at 0.1.
    pub fn initial(layout: &ParamLayout) -> Self {
        let mut p = ParameterSet {
            w1: 0.5,
            theta_tilde: 0.1,
            ..ParameterSet::zeros(layout)
        };
        if let Some(a) = p.alpha1.first_mut() {
            *a = 0.1;
        }
        p
    }

    /// Copula parameter θ.
    pub fn theta(&self) -> f64 {
        theta_transform(self.theta_tilde).0
    }

    /// Sets θ̃ on the non-negative branch so that the transform yields `theta`.
    pub fn set_theta(&mut self, theta: f64) {
        self.theta_tilde = (theta + 1.0).sqrt() - 1.0;
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.gamma.len() + self.alpha1.len() + self.beta.len() + 4);
        v.extend_from_slice(&self.gamma);
        v.extend_from_slice(&self.alpha1);
        v.extend_from_slice(&self.beta);
        v.extend_from_slice(&[self.alpha2, self.w1, self.w2, self.theta_tilde]);
        v
    }

    pub fn from_slice(layout: &ParamLayout, v: &[f64]) -> Result<Self> {
        if v.len() != layout.len() {
            return Err(Error::DimensionMismatch {
                what: "parameter vector",
                expected: layout.len(),
                got: v.len(),
            });
        }
        let (g, rest) = v.split_at(layout.k1());
        let (a1, rest) = rest.split_at(layout.kz());
        let (b, rest) = rest.split_at(layout.k2());
        Ok(ParameterSet {
            gamma: g.to_vec(),
            alpha1: a1.to_vec(),
            beta: b.to_vec(),
            alpha2: rest[0],
            w1: rest[1],
            w2: rest[2],
            theta_tilde: rest[3],
        })
    }

    pub fn check_layout(&self, layout: &ParamLayout) -> Result<()> {
        for (what, expected, got) in [
            ("gamma length", layout.k1(), self.gamma.len()),
            ("alpha1 length", layout.kz(), self.alpha1.len()),
            ("beta length", layout.k2(), self.beta.len()),
        ] {
            if expected != got {
                return Err(Error::DimensionMismatch { what, expected, got });
            }
        }
        Ok(())
    }
}

/// Linear indices of the three equations for one record, at both treatment arms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearIndices {
    pub a: f64,
    pub b0: f64,
    pub b1: f64,
    pub c0: f64,
    pub c1: f64,
    /// `x2·β`, kept for the `w1` gradient.
    pub utility: f64,
}

impl LinearIndices {
    pub fn b(&self, d: bool) -> f64 {
        if d {
            self.b1
        } else {
            self.b0
        }
    }

    pub fn c(&self, d: bool) -> f64 {
        if d {
            self.c1
        } else {
            self.c0
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn linear_indices(record: &ImpressionRecord, params: &ParameterSet) -> Result<LinearIndices> {
    for (what, expected, got) in [
        ("x1 vs gamma", params.gamma.len(), record.x1.len()),
        ("x2 vs beta", params.beta.len(), record.x2.len()),
        ("z vs alpha1", params.alpha1.len(), record.z.len()),
    ] {
        if expected != got {
            return Err(Error::DimensionMismatch { what, expected, got });
        }
    }
    Ok(indices_unchecked(record, params))
}

pub(crate) fn indices_unchecked(record: &ImpressionRecord, params: &ParameterSet) -> LinearIndices {
    let a = dot(&record.x1, &params.gamma);
    let utility = dot(&record.x2, &params.beta);
    let effect = dot(&record.z, &params.alpha1);
    let c0 = params.w1 * utility + params.w2;
    LinearIndices {
        a,
        b0: utility,
        b1: effect + utility,
        c0,
        c1: params.alpha2 + c0,
        utility,
    }
}
