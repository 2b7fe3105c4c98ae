//! Mapping raw dataset columns onto the model's covariate roles.
//!
//! Categorical columns expand into one indicator per non-reference level,
//! named `column=level`, in sorted level order. `x1` and `x2` get a leading
//! `(intercept)` column and `z` a leading `(baseline)` column.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{collinear_columns, gram};
use crate::model::{ImpressionRecord, ParamLayout};

pub const INTERCEPT: &str = "(intercept)";
pub const BASELINE: &str = "(baseline)";

/// Column-role assignment for a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub treatment: String,
    pub intermediate: String,
    #[serde(rename = "final")]
    pub final_outcome: String,
    #[serde(default)]
    pub x1: Vec<String>,
    #[serde(default)]
    pub x2: Vec<String>,
    #[serde(default)]
    pub z: Vec<String>,
    /// Plausibly-exogenous instrument; must be a numeric column in both x1 and x2.
    pub instrument: String,
    /// Categorical column → reference level.
    #[serde(default)]
    pub categorical: BTreeMap<String, String>,
    /// Expanded (`column=level`) or raw column names excluded for collinearity.
    #[serde(default)]
    pub drop: Vec<String>,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.x1.contains(&self.instrument) || !self.x2.contains(&self.instrument) {
            return Err(Error::Schema(format!(
                "instrument `{}` must appear in both x1 and x2",
                self.instrument
            )));
        }
        if self.categorical.contains_key(&self.instrument) {
            return Err(Error::Schema("instrument must be a numeric column".into()));
        }
        for role in [&self.x1, &self.x2, &self.z] {
            for c in role {
                if self.drop.contains(c) {
                    return Err(Error::Schema(format!("dropped column `{c}` is referenced in a role")));
                }
                if [&self.treatment, &self.intermediate, &self.final_outcome].contains(&c) {
                    return Err(Error::Schema(format!("outcome column `{c}` used as a covariate")));
                }
            }
        }
        Ok(())
    }

    /// Raw covariate columns referenced by any role, in first-use order.
    pub fn covariate_columns(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.x1
            .iter()
            .chain(&self.x2)
            .chain(&self.z)
            .filter(|c| seen.insert(c.as_str()))
            .cloned()
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawColumn {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl RawColumn {
    pub fn len(&self) -> usize {
        match self {
            RawColumn::Numeric(v) => v.len(),
            RawColumn::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn render(&self, i: usize) -> String {
        match self {
            RawColumn::Numeric(v) => format!("{}", v[i]),
            RawColumn::Categorical(v) => v[i].clone(),
        }
    }
}

/// Covariate columns by name, in insertion order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawTable {
    pub columns: Vec<(String, RawColumn)>,
}

impl RawTable {
    pub fn get(&self, name: &str) -> Option<&RawColumn> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, c)| c)
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |(_, c)| c.len())
    }

    /// Sorted distinct levels of each categorical column.
    pub fn levels(&self) -> BTreeMap<String, Vec<String>> {
        self.columns
            .iter()
            .filter_map(|(n, c)| match c {
                RawColumn::Categorical(v) => {
                    let set: BTreeSet<&String> = v.iter().collect();
                    Some((n.clone(), set.into_iter().cloned().collect()))
                }
                RawColumn::Numeric(_) => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Source {
    Constant,
    Numeric(String),
    Dummy { column: String, level: String },
}

impl Source {
    fn values(&self, table: &RawTable, n: usize) -> Result<Vec<f64>> {
        match self {
            Source::Constant => Ok(vec![1.0; n]),
            Source::Numeric(name) => match table.get(name) {
                Some(RawColumn::Numeric(v)) => Ok(v.clone()),
                Some(RawColumn::Categorical(_)) => {
                    Err(Error::Schema(format!("column `{name}` is not numeric")))
                }
                None => Err(Error::Schema(format!("missing column `{name}`"))),
            },
            Source::Dummy { column, level } => match table.get(column) {
                Some(RawColumn::Categorical(v)) => Ok(v.iter().map(|x| f64::from(u8::from(x == level))).collect()),
                _ => Err(Error::Schema(format!("missing categorical column `{column}`"))),
            },
        }
    }
}

/// Expanded design: which raw values feed each coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub layout: ParamLayout,
    x1: Vec<Source>,
    x2: Vec<Source>,
    z: Vec<Source>,
    /// Position of the instrument inside the β block.
    pub instrument_index: usize,
}

impl Design {
    /// Builds the design given the level sets of the categorical columns.
    pub fn new(spec: &ModelSpec, levels: &BTreeMap<String, Vec<String>>) -> Result<Self> {
        spec.validate()?;
        let expand = |cols: &[String], lead: &str| -> Result<(Vec<String>, Vec<Source>)> {
            let mut names = vec![lead.to_string()];
            let mut sources = vec![Source::Constant];
            for c in cols {
                if let Some(reference) = spec.categorical.get(c) {
                    let lv = levels
                        .get(c)
                        .ok_or_else(|| Error::Schema(format!("no levels for categorical column `{c}`")))?;
                    if !lv.contains(reference) {
                        return Err(Error::Schema(format!(
                            "reference level `{reference}` not present in column `{c}`"
                        )));
                    }
                    for level in lv.iter().filter(|l| *l != reference) {
                        let name = format!("{c}={level}");
                        if spec.drop.contains(&name) {
                            continue;
                        }
                        names.push(name);
                        sources.push(Source::Dummy {
                            column: c.clone(),
                            level: level.clone(),
                        });
                    }
                } else {
                    names.push(c.clone());
                    sources.push(Source::Numeric(c.clone()));
                }
            }
            Ok((names, sources))
        };
        let (x1_names, x1) = expand(&spec.x1, INTERCEPT)?;
        let (x2_names, x2) = expand(&spec.x2, INTERCEPT)?;
        let (z_names, z) = expand(&spec.z, BASELINE)?;
        let instrument_index = x2_names
            .iter()
            .position(|n| n == &spec.instrument)
            .ok_or_else(|| Error::Schema("instrument missing from x2".into()))?;
        Ok(Design {
            layout: ParamLayout::new(x1_names, x2_names, z_names),
            x1,
            x2,
            z,
            instrument_index,
        })
    }

    /// Assembles records from outcome flags and a covariate table.
    pub fn records(&self, d: &[bool], y_tau: &[bool], y: &[bool], table: &RawTable) -> Result<Vec<ImpressionRecord>> {
        let n = d.len();
        if y_tau.len() != n || y.len() != n || (table.rows() != n && !table.columns.is_empty()) {
            return Err(Error::Schema("column lengths differ".into()));
        }
        let cols = |srcs: &[Source]| -> Result<Vec<Vec<f64>>> { srcs.iter().map(|s| s.values(table, n)).collect() };
        let x1 = cols(&self.x1)?;
        let x2 = cols(&self.x2)?;
        let z = cols(&self.z)?;
        (0..n)
            .map(|i| {
                ImpressionRecord::new(
                    d[i],
                    y_tau[i],
                    y[i],
                    x1.iter().map(|c| c[i]).collect(),
                    x2.iter().map(|c| c[i]).collect(),
                    z.iter().map(|c| c[i]).collect(),
                )
            })
            .collect()
    }

    /// Errors with the offending names if any role matrix is rank deficient.
    pub fn check_rank(&self, records: &[ImpressionRecord]) -> Result<()> {
        let blocks: [(&[String], fn(&ImpressionRecord) -> &Vec<f64>); 3] = [
            (&self.layout.x1_names, |r| &r.x1),
            (&self.layout.x2_names, |r| &r.x2),
            (&self.layout.z_names, |r| &r.z),
        ];
        let mut bad = Vec::new();
        for (names, get) in blocks {
            let k = names.len();
            let x = nalgebra::DMatrix::from_fn(records.len(), k, |i, j| get(&records[i])[j]);
            for j in collinear_columns(&gram(&x)) {
                if !bad.contains(&names[j]) {
                    bad.push(names[j].clone());
                }
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::RankDeficient { columns: bad })
        }
    }
}
