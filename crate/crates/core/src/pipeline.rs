//! Subcommand orchestration: each command reads its inputs from the run
//! configuration, calls the library, and writes artifacts under `out`.
//!
//! | command          | reads                       | writes                          |
//! |------------------|-----------------------------|---------------------------------|
//! | `simulate`       | `[simulate]`                | `data.csv`, `truth.json`        |
//! | `fit`            | data                        | `chain.csv`, `summary.json`     |
//! | `counterfactual` | data, summary (and chain)   | `counterfactual.{json,csv}`     |
//! | `propensity`     | data                        | `propensity.{json,csv}`         |
//! | `naive`          | data                        | `naive.{json,csv}`              |
//! | `diagnose`       | chain                       | `diagnostics.{json,csv}`        |

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::chain_dump::{read_chain_csv, write_chain_csv};
use crate::config::RunConfig;
use crate::counterfactual::{ate, counterfactual_report, EvaluationMode, Evaluation};
use crate::dataset::{parse_dataset, Dataset, IngestionReport};
use crate::error::{Error, Result};
use crate::mala::{run_chain, PosteriorChain};
use crate::model::ParameterSet;
use crate::posterior::Posterior;
use crate::propensity::{
    control_function_ate, ipw_ate, naive_probit_effect, probit_fit, propensity_design, propensity_scores,
    regression_adjustment_ate, Estimate, IpwResult,
};
use crate::report::{coefficient_rows, emit_report, p_value, read_json, stars, CoefficientRow, ReportFormat};
use crate::scenario::{names_from_parameters, parameters_from_names, Truth};
use crate::simulate::simulate_dataset;
use crate::summary::{convergence_table, posterior_summary, ConvergenceRow, ParamSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Simulate,
    Fit,
    Counterfactual,
    Propensity,
    Naive,
    Diagnose,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Fit => "fit",
            Command::Counterfactual => "counterfactual",
            Command::Propensity => "propensity",
            Command::Naive => "naive",
            Command::Diagnose => "diagnose",
        }
    }
}

/// Machine-readable failure record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub status: String,
    pub command: String,
    pub module: String,
    pub kind: String,
    pub message: String,
}

impl ErrorRecord {
    pub fn new(command: &str, err: &Error) -> Self {
        ErrorRecord {
            status: "error".into(),
            command: command.into(),
            module: err.module().into(),
            kind: err.kind().into(),
            message: err.to_string(),
        }
    }
}

/// Ground truth written next to simulated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthReport {
    pub n: usize,
    pub seed: u64,
    pub parameters: Truth,
    /// Model-implied ATE on the simulated covariates.
    pub ate: f64,
}

/// Everything `fit` learns; read back by `counterfactual`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub n: usize,
    pub ingestion: IngestionReport,
    pub instrument: String,
    pub iterations: usize,
    pub burn_in: usize,
    pub kept_draws: usize,
    /// Acceptance rate after step-size adaptation stops.
    pub acceptance_rate: f64,
    pub final_step: f64,
    /// Posterior mean and sd per parameter, θ̃ included.
    pub parameters: Vec<ParamSummary>,
    pub theta: ParamSummary,
    pub convergence: Vec<ConvergenceRow>,
    pub all_stationary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub iterations: usize,
    pub burn_in: usize,
    pub kept_draws: usize,
    pub acceptance_rate: f64,
    pub parameters: Vec<ParamSummary>,
    pub theta: ParamSummary,
    pub convergence: Vec<ConvergenceRow>,
    pub all_stationary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectRow {
    pub ate: f64,
    pub se: f64,
    pub p_value: f64,
    pub stars: String,
}

impl EffectRow {
    fn new(ate: f64, se: f64) -> Self {
        let p = p_value(ate / se);
        EffectRow {
            ate,
            se,
            p_value: p,
            stars: stars(p).into(),
        }
    }
}

impl From<Estimate> for EffectRow {
    fn from(e: Estimate) -> Self {
        EffectRow::new(e.ate, e.se)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlFunctionRow {
    #[serde(flatten)]
    pub effect: EffectRow,
    pub coefficients: Vec<CoefficientRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeBenchmarks {
    pub control_function_linear: ControlFunctionRow,
    pub control_function_cubic: ControlFunctionRow,
    pub ipw: IpwResult,
    pub regression_adjustment: EffectRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbitTable {
    pub n_used: usize,
    pub log_likelihood: Option<f64>,
    pub coefficients: Vec<CoefficientRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityReport {
    pub first_stage: ProbitTable,
    pub mean_propensity: f64,
    /// Keyed by outcome column.
    pub outcomes: BTreeMap<String, OutcomeBenchmarks>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveOutcome {
    pub probit: ProbitTable,
    pub average_marginal_effect: EffectRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveReport {
    pub outcomes: BTreeMap<String, NaiveOutcome>,
}

fn prepare_out(cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))
}

fn load_data(cfg: &RunConfig) -> Result<(Dataset, IngestionReport)> {
    let path = cfg.data_path();
    if !path.exists() {
        return Err(Error::Config(format!("data file {} does not exist", path.display())));
    }
    parse_dataset(&path, &cfg.model)
}

fn outcome_flags(ds: &Dataset) -> [(String, Vec<bool>); 2] {
    [
        (ds.spec.intermediate.clone(), ds.records.iter().map(|r| r.y_tau).collect()),
        (ds.spec.final_outcome.clone(), ds.records.iter().map(|r| r.y).collect()),
    ]
}

fn as_f64(v: &[bool]) -> Vec<f64> {
    v.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

fn probit_table(fit: &crate::propensity::FitResult) -> ProbitTable {
    ProbitTable {
        n_used: fit.n_used,
        log_likelihood: fit.log_likelihood,
        coefficients: coefficient_rows(fit),
    }
}

fn simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let covspec = cfg.covariate_spec()?;
    let truth_spec = &cfg.simulate.as_ref().expect("checked").truth;
    let layout = covspec.design()?.layout;
    let params = parameters_from_names(&layout, truth_spec)?;
    let ds = simulate_dataset(&params, &covspec)?;
    prepare_out(cfg)?;
    let data = cfg.out.join("data.csv");
    ds.write_csv(&data)?;
    let truth = TruthReport {
        n: ds.len(),
        seed: covspec.seed,
        parameters: names_from_parameters(&layout, &params),
        ate: ate(&ds.records, &params)?,
    };
    let t = emit_report(&cfg.out, "truth", &truth, ReportFormat::Json)?;
    Ok(vec![data, t])
}

fn fit(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let (ds, ingestion) = load_data(cfg)?;
    let prior = cfg.prior_spec(ds.design.instrument_index);
    let mala = cfg.mala_config();
    let posterior = Posterior::new(&ds.records, ds.layout(), &prior);
    let init = ParameterSet::initial(ds.layout()).to_vec();
    let chain = run_chain(&posterior, init, ds.layout().names(), &mala)?;
    let summary = posterior_summary(&chain, mala.burn_in_fraction)?;
    let convergence = convergence_table(&chain, mala.burn_in_fraction, cfg.diagnostics.alpha)?;
    prepare_out(cfg)?;
    let chain_path = cfg.out.join("chain.csv");
    write_chain_csv(&chain, &chain_path)?;
    let report = FitSummary {
        n: ds.len(),
        ingestion,
        instrument: ds.spec.instrument.clone(),
        iterations: chain.iterations(),
        burn_in: summary.burn_in,
        kept_draws: summary.kept_draws,
        acceptance_rate: chain.acceptance_rate_from(mala.adapt_until.min(chain.iterations() - 1)),
        final_step: *chain.step_sizes.last().expect("nonempty chain"),
        parameters: summary.parameters,
        theta: summary.theta,
        all_stationary: convergence.iter().all(|r| r.result.stationary),
        convergence,
    };
    let mut out = vec![chain_path, emit_report(&cfg.out, "summary", &report, ReportFormat::Json)?];
    if cfg.format == ReportFormat::Csv {
        out.push(emit_report(&cfg.out, "summary", &report, ReportFormat::Csv)?);
    }
    Ok(out)
}

/// Reads a summary written by `fit`.
pub fn read_fit_summary(path: &std::path::Path) -> Result<FitSummary> {
    read_json(path)
}

/// Reads a report written by `diagnose`.
pub fn read_diagnostics(path: &std::path::Path) -> Result<DiagnosticsReport> {
    read_json(path)
}

fn check_names(expected: &[String], got: &[String], source: &str) -> Result<()> {
    if expected != got {
        return Err(Error::Schema(format!(
            "{source} parameters do not match the model's design ({} vs {} names)",
            got.len(),
            expected.len()
        )));
    }
    Ok(())
}

/// Evenly spaced indices, at most `max` of them, covering `start..end`.
fn thin(start: usize, end: usize, max: usize) -> Vec<usize> {
    let len = end - start;
    if len <= max {
        return (start..end).collect();
    }
    (0..max).map(|k| start + k * len / max).collect()
}

fn counterfactual(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let (ds, _) = load_data(cfg)?;
    let summary_path = cfg.summary_path();
    if !summary_path.exists() {
        return Err(Error::Config(format!("summary file {} does not exist", summary_path.display())));
    }
    let summary = read_fit_summary(&summary_path)?;
    let names = ds.layout().names();
    let summary_names: Vec<String> = summary.parameters.iter().map(|p| p.name.clone()).collect();
    check_names(&names, &summary_names, "summary")?;
    let labels = cfg.counterfactual.group.as_deref().map(|g| ds.labels(g)).transpose()?;
    let price = cfg.counterfactual.price;
    let report = match cfg.counterfactual.mode {
        EvaluationMode::PosteriorMean => {
            let means: Vec<f64> = summary.parameters.iter().map(|p| p.mean).collect();
            let params = ParameterSet::from_slice(ds.layout(), &means)?;
            counterfactual_report(&ds.records, Evaluation::PosteriorMean(&params), labels.as_deref(), price)?
        }
        EvaluationMode::DrawAveraged => {
            let chain: PosteriorChain = read_chain_csv(&cfg.chain_path())?;
            check_names(&names, &chain.names, "chain")?;
            let draws = thin(summary.burn_in.min(chain.iterations()), chain.iterations(), cfg.counterfactual.max_draws)
                .into_iter()
                .map(|i| ParameterSet::from_slice(ds.layout(), &chain.draws[i]))
                .collect::<Result<Vec<_>>>()?;
            counterfactual_report(&ds.records, Evaluation::DrawAveraged(&draws), labels.as_deref(), price)?
        }
    };
    prepare_out(cfg)?;
    Ok(vec![emit_report(&cfg.out, "counterfactual", &report, cfg.format)?])
}

fn propensity(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let (ds, _) = load_data(cfg)?;
    let design = propensity_design(&ds)?;
    let d: Vec<bool> = ds.records.iter().map(|r| r.d).collect();
    let first = probit_fit(&design, &d)?;
    let p_hat = propensity_scores(&first, &design)?;
    let mut outcomes = BTreeMap::new();
    for (name, flags) in outcome_flags(&ds) {
        let y = as_f64(&flags);
        let cf = |degree| -> Result<ControlFunctionRow> {
            let (est, fit) = control_function_ate(&y, &d, &p_hat, degree)?;
            Ok(ControlFunctionRow {
                effect: est.into(),
                coefficients: coefficient_rows(&fit),
            })
        };
        outcomes.insert(
            name,
            OutcomeBenchmarks {
                control_function_linear: cf(1)?,
                control_function_cubic: cf(3)?,
                ipw: ipw_ate(&y, &d, &p_hat)?,
                regression_adjustment: regression_adjustment_ate(&design, &y, &d)?.into(),
            },
        );
    }
    let report = PropensityReport {
        first_stage: probit_table(&first),
        mean_propensity: p_hat.iter().sum::<f64>() / p_hat.len() as f64,
        outcomes,
    };
    prepare_out(cfg)?;
    Ok(vec![emit_report(&cfg.out, "propensity", &report, cfg.format)?])
}

fn naive(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let (ds, _) = load_data(cfg)?;
    let d: Vec<bool> = ds.records.iter().map(|r| r.d).collect();
    let treatment = ds.spec.treatment.clone();
    let design = propensity_design(&ds)?.with_column(&treatment, &as_f64(&d))?;
    let mut outcomes = BTreeMap::new();
    for (name, flags) in outcome_flags(&ds) {
        let eff = naive_probit_effect(&design, &flags, &treatment)?;
        outcomes.insert(
            name,
            NaiveOutcome {
                probit: probit_table(&eff.fit),
                average_marginal_effect: EffectRow::new(eff.average_marginal_effect, eff.ame_se),
            },
        );
    }
    prepare_out(cfg)?;
    Ok(vec![emit_report(&cfg.out, "naive", &NaiveReport { outcomes }, cfg.format)?])
}

fn diagnose(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let path = cfg.chain_path();
    if !path.exists() {
        return Err(Error::Config(format!("chain dump {} does not exist", path.display())));
    }
    let chain = read_chain_csv(&path)?;
    let fraction = cfg.mala.burn_in_fraction;
    let summary = posterior_summary(&chain, fraction)?;
    let convergence = convergence_table(&chain, fraction, cfg.diagnostics.alpha)?;
    let report = DiagnosticsReport {
        iterations: chain.iterations(),
        burn_in: summary.burn_in,
        kept_draws: summary.kept_draws,
        acceptance_rate: chain.acceptance_rate_from(summary.burn_in),
        parameters: summary.parameters,
        theta: summary.theta,
        all_stationary: convergence.iter().all(|r| r.result.stationary),
        convergence,
    };
    prepare_out(cfg)?;
    Ok(vec![emit_report(&cfg.out, "diagnostics", &report, cfg.format)?])
}

/// Runs one subcommand and returns the artifact paths it wrote.
pub fn run_command(command: Command, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    match command {
        Command::Simulate => simulate(cfg),
        Command::Fit => fit(cfg),
        Command::Counterfactual => counterfactual(cfg),
        Command::Propensity => propensity(cfg),
        Command::Naive => naive(cfg),
        Command::Diagnose => diagnose(cfg),
    }
}
