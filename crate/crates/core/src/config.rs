//! Run configuration, read from TOML.
//!
//! ```toml
//! seed = 7                # every random stream derives from this
//! out = "out"             # artifact directory
//! format = "json"         # or "csv"
//!
//! [input]                 # all optional; defaults live under `out`
//! data = "out/data.csv"
//! chain = "out/chain.csv"
//! summary = "out/summary.json"
//!
//! [model]                 # column roles
//! treatment = "incentivized"
//! intermediate = "click"
//! final = "install"
//! x1 = ["lang", "volume"]
//! x2 = ["lang", "volume"]
//! z = ["lang"]
//! instrument = "volume"
//! categorical = { lang = "EN" }
//! drop = []
//!
//! [prior]                 # default_sd, w1_mean, w1_sd, delta
//! [mala]                  # iterations, adapt_until, initial_step, target_accept,
//!                         # burn_in_fraction, metric, warm_start
//! [diagnostics]           # alpha
//! [counterfactual]        # price, group, mode, max_draws
//! [simulate]              # n, [[simulate.categorical]], [[simulate.continuous]],
//!                         # [simulate.truth]
//! ```
//!
//! Relative paths inside the file resolve against the file's directory.

use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::counterfactual::{EvaluationMode, DEFAULT_PRICE_PER_INSTALL};
use crate::design::ModelSpec;
use crate::error::{Error, Result};
use crate::mala::{MalaConfig, MetricAdaptation};
use crate::prior::PriorSpec;
use crate::report::ReportFormat;
use crate::scenario::Truth;
use crate::simulate::{CategoricalBlock, ContinuousBlock, CovariateGenSpec};

/// Named random streams derived from the top-level seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedStream {
    Simulate = 1,
    Mala = 2,
}

pub fn stream_seed(master: u64, stream: SeedStream) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream as u64);
    rng.next_u64()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputPaths {
    pub data: Option<PathBuf>,
    pub chain: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSection {
    pub default_sd: f64,
    pub w1_mean: f64,
    pub w1_sd: f64,
    pub delta: f64,
}

impl Default for PriorSection {
    fn default() -> Self {
        let d = PriorSpec::default();
        PriorSection {
            default_sd: d.default_sd,
            w1_mean: d.w1_mean,
            w1_sd: d.w1_sd,
            delta: d.delta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MalaSection {
    pub iterations: usize,
    /// Defaults to the burn-in length.
    pub adapt_until: Option<usize>,
    pub initial_step: f64,
    pub target_accept: f64,
    pub burn_in_fraction: f64,
    pub metric: MetricAdaptation,
    pub warm_start: bool,
}

impl Default for MalaSection {
    fn default() -> Self {
        let d = MalaConfig::default();
        MalaSection {
            iterations: d.iterations,
            adapt_until: None,
            initial_step: d.initial_step,
            target_accept: d.target_accept,
            burn_in_fraction: d.burn_in_fraction,
            metric: d.metric,
            warm_start: d.warm_start,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSection {
    pub alpha: f64,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        DiagnosticsSection { alpha: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterfactualSection {
    /// Dollars per install.
    pub price: f64,
    /// Column whose values define LATE groups.
    pub group: Option<String>,
    pub mode: EvaluationMode,
    /// Draws used in draw-averaged mode, evenly spaced over the kept draws.
    pub max_draws: usize,
}

impl Default for CounterfactualSection {
    fn default() -> Self {
        CounterfactualSection {
            price: DEFAULT_PRICE_PER_INSTALL,
            group: None,
            mode: EvaluationMode::PosteriorMean,
            max_draws: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub n: usize,
    #[serde(default)]
    pub categorical: Vec<CategoricalBlock>,
    #[serde(default)]
    pub continuous: Vec<ContinuousBlock>,
    pub truth: Truth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub format: ReportFormat,
    #[serde(default)]
    pub input: InputPaths,
    pub model: ModelSpec,
    #[serde(default)]
    pub prior: PriorSection,
    #[serde(default)]
    pub mala: MalaSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    #[serde(default)]
    pub counterfactual: CounterfactualSection,
    pub simulate: Option<SimulateSection>,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<ReportFormat>,
    pub iterations: Option<usize>,
    pub delta: Option<f64>,
    pub price: Option<f64>,
    pub data: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file and resolves its relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.out);
        for p in [&mut cfg.input.data, &mut cfg.input.chain, &mut cfg.input.summary]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(p) = &o.out {
            self.out = p.clone();
        }
        if let Some(f) = o.format {
            self.format = f;
        }
        if let Some(i) = o.iterations {
            self.mala.iterations = i;
        }
        if let Some(d) = o.delta {
            self.prior.delta = d;
        }
        if let Some(p) = o.price {
            self.counterfactual.price = p;
        }
        if let Some(p) = &o.data {
            self.input.data = Some(p.clone());
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.mala_config().validate()?;
        let a = self.diagnostics.alpha;
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::Config("diagnostics.alpha must lie in (0, 1)".into()));
        }
        if !(self.counterfactual.price >= 0.0 && self.counterfactual.price.is_finite()) {
            return Err(Error::Config("counterfactual.price must be non-negative".into()));
        }
        if self.counterfactual.max_draws == 0 {
            return Err(Error::Config("counterfactual.max_draws must be positive".into()));
        }
        if let Some(s) = &self.simulate {
            self.covariate_spec_for(s).validate()?;
        }
        Ok(())
    }

    pub fn data_path(&self) -> PathBuf {
        self.input.data.clone().unwrap_or_else(|| self.out.join("data.csv"))
    }

    pub fn chain_path(&self) -> PathBuf {
        self.input.chain.clone().unwrap_or_else(|| self.out.join("chain.csv"))
    }

    pub fn summary_path(&self) -> PathBuf {
        self.input.summary.clone().unwrap_or_else(|| self.out.join("summary.json"))
    }

    /// Prior with the instrument position filled in.
    pub fn prior_spec(&self, instrument_index: usize) -> PriorSpec {
        PriorSpec {
            default_sd: self.prior.default_sd,
            w1_mean: self.prior.w1_mean,
            w1_sd: self.prior.w1_sd,
            delta: self.prior.delta,
            instrument_index: Some(instrument_index),
        }
    }

    pub fn mala_config(&self) -> MalaConfig {
        let m = &self.mala;
        let burn = (m.burn_in_fraction * m.iterations as f64).floor() as usize;
        MalaConfig {
            iterations: m.iterations,
            initial_step: m.initial_step,
            target_accept: m.target_accept,
            adapt_until: m.adapt_until.unwrap_or(burn),
            seed: stream_seed(self.seed, SeedStream::Mala),
            burn_in_fraction: m.burn_in_fraction,
            metric: m.metric,
            warm_start: m.warm_start,
        }
    }

    fn covariate_spec_for(&self, s: &SimulateSection) -> CovariateGenSpec {
        CovariateGenSpec {
            n: s.n,
            seed: stream_seed(self.seed, SeedStream::Simulate),
            categorical: s.categorical.clone(),
            continuous: s.continuous.clone(),
            roles: self.model.clone(),
        }
    }

    pub fn covariate_spec(&self) -> Result<CovariateGenSpec> {
        let s = self
            .simulate
            .as_ref()
            .ok_or_else(|| Error::Config("the [simulate] section is required for simulation".into()))?;
        Ok(self.covariate_spec_for(s))
    }
}
