//! Policy quantities implied by fitted parameters: treatment effects on the
//! joint install probability, the adverse-selection revenue loss, and their
//! CPM equivalents.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::check_theta;
use crate::error::{Error, Result};
use crate::likelihood::{both_outcomes, cells_from_indices};
use crate::logistic::Margin;
use crate::model::{linear_indices, ImpressionRecord, ParameterSet};
use crate::summary::mean_sd;

pub const DEFAULT_PRICE_PER_INSTALL: f64 = 0.52;

/// `P(y_tau = 1, y = 1)` with treatment forced to `forced_d`.
pub fn joint_outcome_prob(record: &ImpressionRecord, params: &ParameterSet, forced_d: bool) -> Result<f64> {
    let theta = params.theta();
    check_theta(theta)?;
    let idx = linear_indices(record, params)?;
    Ok(both_outcomes(idx.b(forced_d), idx.c(forced_d), theta))
}

/// Per-record quantities needed by every report field.
#[derive(Debug, Clone, Copy)]
struct RecordTerms {
    treated: bool,
    effect: f64,
    baseline: f64,
    selection_gap: f64,
}

fn record_terms(records: &[ImpressionRecord], params: &ParameterSet) -> Result<Vec<RecordTerms>> {
    if records.is_empty() {
        return Err(Error::Empty("dataset has no records".into()));
    }
    let theta = params.theta();
    check_theta(theta)?;
    records
        .par_iter()
        .map(|r| {
            let idx = linear_indices(r, params)?;
            let j1 = both_outcomes(idx.b1, idx.c1, theta);
            let j0 = both_outcomes(idx.b0, idx.c0, theta);
            let p_treat = Margin::from_index(idx.a).complement;
            let p111 = cells_from_indices(&idx, theta).p111;
            Ok(RecordTerms {
                treated: r.d,
                effect: j1 - j0,
                baseline: j0,
                selection_gap: p_treat * j1 - p111,
            })
        })
        .collect()
}

fn mean_where(terms: &[RecordTerms], keep: impl Fn(&RecordTerms) -> bool, f: impl Fn(&RecordTerms) -> f64) -> Option<f64> {
    let vals: Vec<f64> = terms.iter().filter(|t| keep(t)).map(f).collect();
    (!vals.is_empty()).then(|| mean_sd(&vals).0)
}

/// Average over all records of the difference in joint outcome probability
/// between the treated and control arms.
pub fn ate(records: &[ImpressionRecord], params: &ParameterSet) -> Result<f64> {
    let t = record_terms(records, params)?;
    Ok(mean_where(&t, |_| true, |t| t.effect).expect("nonempty"))
}

/// As [`ate`], averaged over treated records only.
pub fn att(records: &[ImpressionRecord], params: &ParameterSet) -> Result<f64> {
    let t = record_terms(records, params)?;
    mean_where(&t, |t| t.treated, |t| t.effect).ok_or_else(|| Error::Empty("no treated records".into()))
}

/// Treatment effect averaged within each label.
pub fn late_by_group(records: &[ImpressionRecord], params: &ParameterSet, labels: &[String]) -> Result<BTreeMap<String, f64>> {
    if labels.len() != records.len() {
        return Err(Error::DimensionMismatch {
            what: "group labels vs records",
            expected: records.len(),
            got: labels.len(),
        });
    }
    let t = record_terms(records, params)?;
    Ok(group_means(&t, labels))
}

fn group_means(terms: &[RecordTerms], labels: &[String]) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (t, g) in terms.iter().zip(labels) {
        acc.entry(g.as_str()).or_default().push(t.effect);
    }
    acc.into_iter().map(|(g, v)| (g.to_string(), mean_sd(&v).0)).collect()
}

/// Mean over treated records of `P(d=1)·P(y_tau=1, y=1 | d=1) − P(d=1, y_tau=1, y=1)`:
/// the install-rate gap attributable to selection on unobservables.
pub fn adverse_selection_loss(records: &[ImpressionRecord], params: &ParameterSet) -> Result<f64> {
    let t = record_terms(records, params)?;
    mean_where(&t, |t| t.treated, |t| t.selection_gap).ok_or_else(|| Error::Empty("no treated records".into()))
}

/// Dollars per thousand impressions.
pub fn cpm(quantity: f64, price_per_install: f64) -> Result<f64> {
    if !(price_per_install >= 0.0) {
        return Err(Error::Domain(format!("price {price_per_install} must be non-negative")));
    }
    Ok(quantity * price_per_install * 1000.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EvaluationMode {
    /// Quantities evaluated once at the posterior-mean parameters.
    #[default]
    PosteriorMean,
    /// Quantities evaluated at every retained draw and averaged.
    DrawAveraged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualReport {
    pub mode: EvaluationMode,
    pub n: usize,
    pub n_treated: usize,
    pub ate: f64,
    pub att: f64,
    pub late_by_group: BTreeMap<String, f64>,
    pub adverse_selection_loss: f64,
    /// Mean joint outcome probability with treatment switched off.
    pub baseline_rate: f64,
    /// `ate / baseline_rate`.
    pub relative_increase: f64,
    /// `att × n_treated`.
    pub installs_lost: f64,
    pub price_per_install: f64,
    pub cpm_equivalents: BTreeMap<String, f64>,
}

impl CounterfactualReport {
    /// Fills the derived fields from the primary quantities.
    pub fn from_quantities(
        mode: EvaluationMode,
        n: usize,
        n_treated: usize,
        ate: f64,
        att: f64,
        late_by_group: BTreeMap<String, f64>,
        adverse_selection_loss: f64,
        baseline_rate: f64,
        price_per_install: f64,
    ) -> Result<Self> {
        let cpm_equivalents = BTreeMap::from([
            ("adverse_selection_loss".to_string(), cpm(adverse_selection_loss, price_per_install)?),
            ("ate".to_string(), cpm(ate, price_per_install)?),
            ("att".to_string(), cpm(att, price_per_install)?),
        ]);
        Ok(CounterfactualReport {
            mode,
            n,
            n_treated,
            ate,
            att,
            late_by_group,
            adverse_selection_loss,
            baseline_rate,
            relative_increase: ate / baseline_rate,
            installs_lost: att * n_treated as f64,
            price_per_install,
            cpm_equivalents,
        })
    }
}

/// Parameters at which to evaluate the report.
#[derive(Debug, Clone, Copy)]
pub enum Evaluation<'a> {
    PosteriorMean(&'a ParameterSet),
    DrawAveraged(&'a [ParameterSet]),
}

struct Quantities {
    ate: f64,
    att: f64,
    late: BTreeMap<String, f64>,
    loss: f64,
    baseline: f64,
}

fn quantities(records: &[ImpressionRecord], params: &ParameterSet, labels: Option<&[String]>) -> Result<Quantities> {
    let t = record_terms(records, params)?;
    let att = mean_where(&t, |t| t.treated, |t| t.effect).ok_or_else(|| Error::Empty("no treated records".into()))?;
    Ok(Quantities {
        ate: mean_where(&t, |_| true, |t| t.effect).expect("nonempty"),
        att,
        late: labels.map(|l| group_means(&t, l)).unwrap_or_default(),
        loss: mean_where(&t, |t| t.treated, |t| t.selection_gap).expect("treated exist"),
        baseline: mean_where(&t, |_| true, |t| t.baseline).expect("nonempty"),
    })
}

/// Full counterfactual report; `labels` (one per record) enables group LATEs.
pub fn counterfactual_report(
    records: &[ImpressionRecord],
    eval: Evaluation<'_>,
    labels: Option<&[String]>,
    price_per_install: f64,
) -> Result<CounterfactualReport> {
    if let Some(l) = labels {
        if l.len() != records.len() {
            return Err(Error::DimensionMismatch {
                what: "group labels vs records",
                expected: records.len(),
                got: l.len(),
            });
        }
    }
    let n_treated = records.iter().filter(|r| r.d).count();
    let (mode, q) = match eval {
        Evaluation::PosteriorMean(p) => (EvaluationMode::PosteriorMean, quantities(records, p, labels)?),
        Evaluation::DrawAveraged(draws) => {
            if draws.is_empty() {
                return Err(Error::InsufficientDraws { available: 0, required: 1 });
            }
            let mut acc = quantities(records, &draws[0], labels)?;
            for p in &draws[1..] {
                let q = quantities(records, p, labels)?;
                acc.ate += q.ate;
                acc.att += q.att;
                acc.loss += q.loss;
                acc.baseline += q.baseline;
                for (g, v) in q.late {
                    *acc.late.get_mut(&g).expect("same groups") += v;
                }
            }
            let m = draws.len() as f64;
            acc.ate /= m;
            acc.att /= m;
            acc.loss /= m;
            acc.baseline /= m;
            acc.late.values_mut().for_each(|v| *v /= m);
            (EvaluationMode::DrawAveraged, acc)
        }
    };
    CounterfactualReport::from_quantities(
        mode,
        records.len(),
        n_treated,
        q.ate,
        q.att,
        q.late,
        q.loss,
        q.baseline,
        price_per_install,
    )
}
