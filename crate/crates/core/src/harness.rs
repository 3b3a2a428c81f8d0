//! Experiment orchestration: configuration, the online loop, repetitions,
//! aggregation and result files.
//!
//! Each repetition `r` uses seed `base_seed + r`. From that seed the
//! environment and the policy draw from disjoint streams (see [`crate::rng`]),
//! so two policies run with the same seed face identical contexts.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environments::{
    instant_regret, preprocess_features, sample_feedback, Environment, RegretTrace, RuntimeTable,
    SyntheticScenario, DEFAULT_LAMBDA,
};
use crate::error::{Error, Result};
use crate::estimator::EstimatorConfig;
use crate::likelihood::{FeedbackMode, Observation};
use crate::policies::{
    CpplPolicy, EpsilonGreedyPolicy, MaxThetaPolicy, MmPolicy, Policy, PolicyKind,
};
use crate::rng::{feedback_rng, policy_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvironmentKind {
    Synthetic,
    AlgoSelect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Everything needed to reproduce one experiment. Loadable from TOML; every
/// field except `environment` has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvironmentKind,
    /// Number of arms (synthetic only; algorithm selection uses the solver count).
    #[serde(default = "defaults::n")]
    pub n: usize,
    /// Context dimension (synthetic only).
    #[serde(default = "defaults::d")]
    pub d: usize,
    #[serde(default = "defaults::k")]
    pub k: usize,
    /// Rounds per repetition.
    #[serde(default = "defaults::horizon", rename = "T", alias = "horizon")]
    pub horizon: usize,
    #[serde(default = "defaults::policy")]
    pub policy: PolicyKind,
    #[serde(default = "defaults::feedback")]
    pub feedback: FeedbackMode,
    #[serde(default = "defaults::gamma1")]
    pub gamma1: f64,
    #[serde(default = "defaults::alpha")]
    pub alpha: f64,
    #[serde(default = "defaults::omega")]
    pub omega: f64,
    #[serde(default = "defaults::epsilon")]
    pub epsilon: f64,
    /// Ridge applied to the averaged Hessian before inversion.
    #[serde(default = "defaults::ridge")]
    pub ridge: f64,
    #[serde(default = "defaults::lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub runtimes: Option<PathBuf>,
    #[serde(default)]
    pub instance_features: Option<PathBuf>,
    /// Defaults to the bundled SAPS parametrizations.
    #[serde(default)]
    pub solver_features: Option<PathBuf>,
    /// Apply min-max scaling, variance filtering and correlation pruning to instance features.
    #[serde(default = "defaults::preprocess")]
    pub preprocess: bool,
    #[serde(default = "defaults::reps")]
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "defaults::format")]
    pub format: OutputFormat,
}

mod defaults {
    use super::*;

    pub fn n() -> usize {
        20
    }
    pub fn d() -> usize {
        5
    }
    pub fn k() -> usize {
        5
    }
    pub fn horizon() -> usize {
        2000
    }
    pub fn policy() -> PolicyKind {
        PolicyKind::Cppl
    }
    pub fn feedback() -> FeedbackMode {
        FeedbackMode::Winner
    }
    pub fn gamma1() -> f64 {
        2.0
    }
    pub fn alpha() -> f64 {
        0.6
    }
    pub fn omega() -> f64 {
        1.0
    }
    pub fn epsilon() -> f64 {
        0.1
    }
    pub fn ridge() -> f64 {
        1e-6
    }
    pub fn lambda() -> f64 {
        DEFAULT_LAMBDA
    }
    pub fn preprocess() -> bool {
        true
    }
    pub fn reps() -> usize {
        20
    }
    pub fn format() -> OutputFormat {
        OutputFormat::Csv
    }
}

impl ExperimentConfig {
    /// Defaults for the given environment kind.
    pub fn new(environment: EnvironmentKind) -> Self {
        ExperimentConfig {
            environment,
            n: defaults::n(),
            d: defaults::d(),
            k: defaults::k(),
            horizon: defaults::horizon(),
            policy: defaults::policy(),
            feedback: defaults::feedback(),
            gamma1: defaults::gamma1(),
            alpha: defaults::alpha(),
            omega: defaults::omega(),
            epsilon: defaults::epsilon(),
            ridge: defaults::ridge(),
            lambda: defaults::lambda(),
            runtimes: None,
            instance_features: None,
            solver_features: None,
            preprocess: defaults::preprocess(),
            reps: defaults::reps(),
            seed: 0,
            out: None,
            format: defaults::format(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        ExperimentConfig::from_toml_str(&text)
    }

    pub fn estimator_config(&self) -> EstimatorConfig {
        EstimatorConfig {
            gamma1: self.gamma1,
            alpha: self.alpha,
            ridge: self.ridge,
        }
    }

    /// Checks the parameter ranges that do not depend on loaded data.
    pub fn validate(&self) -> Result<()> {
        self.estimator_config().validate()?;
        if !(self.omega.is_finite() && self.omega >= 0.0) {
            return Err(Error::Config(format!(
                "omega must be >= 0, got {}",
                self.omega
            )));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!(
                "epsilon must lie in [0, 1], got {}",
                self.epsilon
            )));
        }
        if self.reps == 0 {
            return Err(Error::Config("reps must be >= 1".to_string()));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be >= 1".to_string()));
        }
        match self.environment {
            EnvironmentKind::Synthetic => {
                if self.k >= self.n {
                    return Err(Error::Config(format!(
                        "need k < n, got k = {}, n = {}",
                        self.k, self.n
                    )));
                }
                if self.d == 0 {
                    return Err(Error::Config("d must be >= 1".to_string()));
                }
            }
            EnvironmentKind::AlgoSelect => {
                if self.runtimes.is_none() || self.instance_features.is_none() {
                    return Err(Error::Config(
                        "algorithm selection needs --runtimes and --instance-features".to_string(),
                    ));
                }
                if !(self.lambda.is_finite() && self.lambda >= 0.0) {
                    return Err(Error::Config(format!(
                        "lambda must be >= 0, got {}",
                        self.lambda
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A validated configuration with any input data loaded once and shared
/// across repetitions.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: ExperimentConfig,
    table: Option<Arc<RuntimeTable>>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let table = match config.environment {
            EnvironmentKind::Synthetic => None,
            EnvironmentKind::AlgoSelect => Some(Arc::new(load_table(&config)?)),
        };
        if let Some(table) = &table {
            if config.k >= table.n_solvers() {
                return Err(Error::Config(format!(
                    "need k < number of solvers ({}), got k = {}",
                    table.n_solvers(),
                    config.k
                )));
            }
            if config.horizon > table.n_instances() {
                return Err(Error::Config(format!(
                    "T = {} exceeds the {} available instances",
                    config.horizon,
                    table.n_instances()
                )));
            }
        }
        Ok(Experiment { config, table })
    }

    /// An algorithm-selection experiment over an already loaded table.
    pub fn with_table(config: ExperimentConfig, table: RuntimeTable) -> Result<Self> {
        let mut config = config;
        config.environment = EnvironmentKind::AlgoSelect;
        config
            .runtimes
            .get_or_insert_with(|| PathBuf::from("<in-memory>"));
        config
            .instance_features
            .get_or_insert_with(|| PathBuf::from("<in-memory>"));
        config.validate()?;
        if config.k >= table.n_solvers() || config.horizon > table.n_instances() {
            return Err(Error::Config("table too small for k / T".to_string()));
        }
        Ok(Experiment {
            config,
            table: Some(Arc::new(table)),
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn repetition_seed(&self, rep: usize) -> u64 {
        self.config.seed.wrapping_add(rep as u64)
    }

    pub fn environment(&self, rep: usize) -> Result<Environment> {
        let seed = self.repetition_seed(rep);
        match &self.table {
            None => {
                let c = &self.config;
                Ok(Environment::Synthetic(SyntheticScenario::new(
                    c.n, c.d, c.k, c.horizon, seed,
                )?))
            }
            Some(table) => Environment::algoselect(Arc::clone(table), self.config.lambda, seed),
        }
    }

    pub fn policy(&self, env: &Environment, rep: usize) -> Result<Box<dyn Policy>> {
        build_policy(
            &self.config,
            env.n_arms(),
            env.dim(),
            self.repetition_seed(rep),
        )
    }

    pub fn run_repetition(&self, rep: usize) -> Result<RegretTrace> {
        let env = self.environment(rep)?;
        let mut policy = self.policy(&env, rep)?;
        run_loop(
            &env,
            policy.as_mut(),
            self.config.k,
            self.config.horizon,
            self.config.feedback,
            self.repetition_seed(rep),
        )
    }

    /// Runs every repetition in parallel and aggregates cumulative regret.
    pub fn run(&self) -> Result<AggregatedResult> {
        let started = Instant::now();
        let traces = (0..self.config.reps)
            .into_par_iter()
            .map(|rep| {
                self.run_repetition(rep).map_err(|e| Error::Repetition {
                    rep,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut result = aggregate(&self.config, traces);
        result.wall_time_secs = started.elapsed().as_secs_f64();
        Ok(result)
    }
}

fn load_table(config: &ExperimentConfig) -> Result<RuntimeTable> {
    let runtimes = config.runtimes.as_deref().expect("validated");
    let features = config.instance_features.as_deref().expect("validated");
    let mut table = RuntimeTable::load(runtimes, features, config.solver_features.as_deref())?;
    if config.preprocess {
        let report = preprocess_features(&table.instance_features)?;
        table.instance_features = report.features;
    }
    Ok(table)
}

/// Instantiates the configured policy; its private stream comes from `seed`.
pub fn build_policy(
    config: &ExperimentConfig,
    n: usize,
    d: usize,
    seed: u64,
) -> Result<Box<dyn Policy>> {
    let est = config.estimator_config();
    let mut rng = policy_rng(seed);
    Ok(match config.policy {
        PolicyKind::Cppl => Box::new(CpplPolicy::new(d, est, config.omega, &mut rng)?),
        PolicyKind::MaxTheta => Box::new(MaxThetaPolicy::new(d, est, &mut rng)?),
        PolicyKind::EGreedy => Box::new(EpsilonGreedyPolicy::new(d, est, config.epsilon, rng)?),
        PolicyKind::Mm => Box::new(MmPolicy::new(n)?),
    })
}

/// The online protocol for `horizon` rounds: observe the context, let the
/// policy choose, sample feedback from the true utilities, update the policy
/// and record the regret of the chosen subset.
pub fn run_loop(
    env: &Environment,
    policy: &mut dyn Policy,
    k: usize,
    horizon: usize,
    mode: FeedbackMode,
    seed: u64,
) -> Result<RegretTrace> {
    if let Some(max) = env.max_rounds() {
        if horizon > max {
            return Err(Error::Config(format!(
                "T = {horizon} exceeds the {max} rounds the environment can serve"
            )));
        }
    }
    let mut trace = RegretTrace::with_capacity(horizon);
    for t in 1..=horizon {
        let (context, true_utils) = env.round(t)?;
        let decision = policy.choose(&context, k)?;
        if decision.subset.len() != k {
            return Err(Error::invalid(format!(
                "{} chose {} arms instead of {k}",
                policy.name(),
                decision.subset.len()
            )));
        }
        let feedback = sample_feedback(
            &true_utils,
            &decision.subset,
            mode,
            &mut feedback_rng(seed, t),
        )?;
        let regret = instant_regret(&true_utils, &decision.subset)?;
        let obs = Observation::new(feedback, decision.subset, context)?;
        policy.update(&obs)?;
        trace.push(regret);
    }
    Ok(trace)
}

pub fn run_repetition(config: &ExperimentConfig, rep: usize) -> Result<RegretTrace> {
    Experiment::new(config.clone())?.run_repetition(rep)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<AggregatedResult> {
    Experiment::new(config.clone())?.run()
}

/// Mean cumulative regret per round across repetitions with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregatedResult {
    pub policy: String,
    pub mean_cum_regret: Vec<f64>,
    /// Sample standard deviation over repetitions divided by `sqrt(reps)`; zero for one repetition.
    pub stderr: Vec<f64>,
    pub final_regrets: Vec<f64>,
    #[serde(skip)]
    pub traces: Vec<RegretTrace>,
    pub config: ExperimentConfig,
    pub wall_time_secs: f64,
}

impl AggregatedResult {
    pub fn rounds(&self) -> usize {
        self.mean_cum_regret.len()
    }

    pub fn final_mean(&self) -> f64 {
        self.mean_cum_regret.last().copied().unwrap_or(0.0)
    }
}

pub fn aggregate(config: &ExperimentConfig, traces: Vec<RegretTrace>) -> AggregatedResult {
    let rounds = traces.first().map_or(0, RegretTrace::len);
    let reps = traces.len() as f64;
    let mut mean = Vec::with_capacity(rounds);
    let mut stderr = Vec::with_capacity(rounds);
    for t in 0..rounds {
        let m = traces.iter().map(|tr| tr.cumulative[t]).sum::<f64>() / reps;
        let se = if traces.len() > 1 {
            let var = traces
                .iter()
                .map(|tr| (tr.cumulative[t] - m).powi(2))
                .sum::<f64>()
                / (reps - 1.0);
            (var / reps).sqrt()
        } else {
            0.0
        };
        mean.push(m);
        stderr.push(se);
    }
    AggregatedResult {
        policy: config.policy.name().to_string(),
        mean_cum_regret: mean,
        stderr,
        final_regrets: traces.iter().map(RegretTrace::total).collect(),
        traces,
        config: config.clone(),
        wall_time_secs: 0.0,
    }
}

/// Header of the per-round CSV.
pub const CSV_HEADER: &str = "round,mean_cum_regret,stderr";

/// Everything that accompanies the per-round CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub policy: String,
    pub final_regrets: Vec<f64>,
    pub config: ExperimentConfig,
    pub wall_time_secs: f64,
}

/// One JSON document holding the per-round aggregate and the sidecar fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonResult {
    pub policy: String,
    pub rounds: Vec<RoundRecord>,
    pub final_regrets: Vec<f64>,
    pub config: ExperimentConfig,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub mean_cum_regret: f64,
    pub stderr: f64,
}

fn round_records(result: &AggregatedResult) -> Vec<RoundRecord> {
    result
        .mean_cum_regret
        .iter()
        .zip(&result.stderr)
        .enumerate()
        .map(|(i, (&m, &s))| RoundRecord {
            round: i + 1,
            mean_cum_regret: m,
            stderr: s,
        })
        .collect()
}

/// Path of the metadata file written next to a CSV result.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes the result. CSV output gets a `.meta.json` sidecar with the
/// per-repetition final regrets, the config echo and the wall time; JSON
/// output carries all of it in one document.
pub fn emit_results(result: &AggregatedResult, path: &Path, format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut text = String::from(CSV_HEADER);
            text.push('\n');
            for r in round_records(result) {
                text.push_str(&format!("{},{},{}\n", r.round, r.mean_cum_regret, r.stderr));
            }
            fs::write(path, text).map_err(io_err(path))?;
            let sidecar = Sidecar {
                policy: result.policy.clone(),
                final_regrets: result.final_regrets.clone(),
                config: result.config.clone(),
                wall_time_secs: result.wall_time_secs,
            };
            let meta = sidecar_path(path);
            let body = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
            fs::write(&meta, body).map_err(io_err(&meta))
        }
        OutputFormat::Json => {
            let doc = JsonResult {
                policy: result.policy.clone(),
                rounds: round_records(result),
                final_regrets: result.final_regrets.clone(),
                config: result.config.clone(),
                wall_time_secs: result.wall_time_secs,
            };
            let body = serde_json::to_string_pretty(&doc).expect("result serializes");
            fs::write(path, body).map_err(io_err(path))
        }
    }
}

/// Parses a per-round CSV written by [`emit_results`].
pub fn read_results_csv(path: &Path) -> Result<Vec<RoundRecord>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::Load {
            path: path.to_path_buf(),
            message: format!("expected header {CSV_HEADER}"),
        });
    }
    lines
        .map(|line| {
            let bad = || Error::Load {
                path: path.to_path_buf(),
                message: format!("malformed row: {line}"),
            };
            let mut cells = line.split(',');
            let round = cells.next().and_then(|c| c.parse().ok()).ok_or_else(bad)?;
            let mean_cum_regret = cells.next().and_then(|c| c.parse().ok()).ok_or_else(bad)?;
            let stderr = cells.next().and_then(|c| c.parse().ok()).ok_or_else(bad)?;
            Ok(RoundRecord {
                round,
                mean_cum_regret,
                stderr,
            })
        })
        .collect()
}

pub fn read_results_json(path: &Path) -> Result<JsonResult> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| Error::Load {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
