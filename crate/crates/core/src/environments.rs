//! Ground-truth worlds: synthetic contextual PL draws and algorithm selection
//! from a precomputed runtime table, plus regret bookkeeping and the
//! instance-feature preprocessing pipeline.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::likelihood::{Feedback, FeedbackMode};
use crate::pl_core::{self, contextual_utilities, ContextMatrix, Subset, UtilityVector};
use crate::rng::{context_rng, setup_rng};

/// Minimum per-column variance kept by [`preprocess_features`].
pub const VARIANCE_THRESHOLD: f64 = 0.01;
/// Largest absolute Pearson correlation allowed between kept features.
pub const CORRELATION_THRESHOLD: f64 = 0.95;
/// Runtime-to-utility scale in `v = exp(-lambda * runtime)`.
pub const DEFAULT_LAMBDA: f64 = 10.0;

const SAPS_PARAMETRIZATIONS: &str = include_str!("../data/saps_parametrizations.csv");

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScenario {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub horizon: usize,
    pub theta_star: DVector<f64>,
    pub seed: u64,
}

impl SyntheticScenario {
    /// Draws the hidden parameter uniformly from `[0, 1]^d` out of the seed's setup stream.
    pub fn new(n: usize, d: usize, k: usize, horizon: usize, seed: u64) -> Result<Self> {
        if d == 0 || k == 0 || k >= n {
            return Err(Error::Config(format!(
                "synthetic scenario needs d >= 1 and 1 <= k < n, got n = {n}, d = {d}, k = {k}"
            )));
        }
        let mut rng = setup_rng(seed);
        let theta_star = DVector::from_fn(d, |_, _| rng.random::<f64>());
        Ok(SyntheticScenario {
            n,
            d,
            k,
            horizon,
            theta_star,
            seed,
        })
    }
}

/// Fresh `d x n` context for round `t`, every entry i.i.d. uniform on `[0, 1]`.
/// Depends only on `(seed, t)`.
pub fn synthetic_round(scenario: &SyntheticScenario, t: usize) -> Result<ContextMatrix> {
    let mut rng = context_rng(scenario.seed, t);
    let features = DMatrix::from_fn(scenario.d, scenario.n, |_, _| rng.random::<f64>());
    ContextMatrix::from_matrix(features, t)
}

pub fn true_utilities(theta_star: &DVector<f64>, context: &ContextMatrix) -> Result<UtilityVector> {
    contextual_utilities(theta_star, context)
}

/// `(v_best - max_{j in S} v_j) / v_best`: zero when the best arm is in `S`.
pub fn instant_regret(true_utils: &UtilityVector, subset: &Subset) -> Result<f64> {
    subset.check_within(true_utils.len())?;
    let logs = true_utils.log_values();
    let best = logs[true_utils.argmax()];
    let in_subset = subset
        .members()
        .iter()
        .map(|&j| logs[j])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((1.0 - (in_subset - best).exp()).clamp(0.0, 1.0))
}

/// Draws winner or ranking feedback on `subset` from the true utilities.
pub fn sample_feedback<R: Rng + ?Sized>(
    true_utils: &UtilityVector,
    subset: &Subset,
    mode: FeedbackMode,
    rng: &mut R,
) -> Result<Feedback> {
    Ok(match mode {
        FeedbackMode::Winner => Feedback::Winner(pl_core::sample_winner(true_utils, subset, rng)?),
        FeedbackMode::Ranking => {
            Feedback::Ranking(pl_core::sample_partial_ranking(true_utils, subset, rng)?)
        }
    })
}

/// Per-round regret of one repetition.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RegretTrace {
    pub instantaneous: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl RegretTrace {
    pub fn with_capacity(rounds: usize) -> Self {
        RegretTrace {
            instantaneous: Vec::with_capacity(rounds),
            cumulative: Vec::with_capacity(rounds),
        }
    }

    pub fn push(&mut self, regret: f64) {
        let prev = self.cumulative.last().copied().unwrap_or(0.0);
        self.instantaneous.push(regret);
        self.cumulative.push(prev + regret);
    }

    pub fn len(&self) -> usize {
        self.instantaneous.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instantaneous.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

/// Runtimes of every solver parametrization on every problem instance,
/// with features for both.
#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeTable {
    pub instance_ids: Vec<String>,
    /// Rows are instances, columns are solvers; seconds.
    pub runtimes: DMatrix<f64>,
    /// Rows are instances.
    pub instance_features: DMatrix<f64>,
    /// Rows are solvers (`alpha, rho, ps, wp` for SAPS).
    pub solver_features: DMatrix<f64>,
}

impl RuntimeTable {
    pub fn new(
        instance_ids: Vec<String>,
        runtimes: DMatrix<f64>,
        instance_features: DMatrix<f64>,
        solver_features: DMatrix<f64>,
    ) -> Result<Self> {
        let (rows, solvers) = runtimes.shape();
        if rows == 0 || solvers == 0 {
            return Err(Error::invalid("runtime table is empty"));
        }
        if instance_ids.len() != rows || instance_features.nrows() != rows {
            return Err(Error::invalid(
                "instance ids / features do not match runtime rows",
            ));
        }
        if solver_features.nrows() != solvers {
            return Err(Error::invalid(format!(
                "{} solver feature rows for {solvers} runtime columns",
                solver_features.nrows()
            )));
        }
        if runtimes.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::invalid("runtimes must be finite and >= 0"));
        }
        if instance_features
            .iter()
            .chain(solver_features.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("features must be finite"));
        }
        Ok(RuntimeTable {
            instance_ids,
            runtimes,
            instance_features,
            solver_features,
        })
    }

    /// Loads the CSV files. Instance features are matched to runtime rows by
    /// `instance_id`; any id present in one file but not the other is a load
    /// error. Without a solver feature file the bundled SAPS table is used.
    pub fn load(
        runtimes: &Path,
        instance_features: &Path,
        solver_features: Option<&Path>,
    ) -> Result<Self> {
        let (ids, runtime_rows) = read_id_table(runtimes, "solver_")?;
        let (feature_ids, feature_rows) = read_id_table(instance_features, "f")?;
        if feature_ids.len() != ids.len() {
            return Err(load_error(
                instance_features,
                format!(
                    "{} feature rows for {} runtime rows",
                    feature_ids.len(),
                    ids.len()
                ),
            ));
        }
        let by_id: HashMap<&str, usize> = feature_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut aligned = Vec::with_capacity(ids.len());
        for id in &ids {
            let row = by_id.get(id.as_str()).ok_or_else(|| {
                load_error(instance_features, format!("no features for instance {id}"))
            })?;
            aligned.push(feature_rows[*row].clone());
        }
        let solver = match solver_features {
            Some(path) => {
                read_solver_features(std::fs::read_to_string(path).map_err(|source| Error::Io {
                    path: path.to_path_buf(),
                    source,
                })?)
                .map_err(|m| load_error(path, m))?
            }
            None => saps_parametrizations(),
        };
        RuntimeTable::new(
            ids,
            rows_to_matrix(&runtime_rows),
            rows_to_matrix(&aligned),
            solver,
        )
        .map_err(|e| load_error(runtimes, e.to_string()))
    }

    pub fn n_instances(&self) -> usize {
        self.runtimes.nrows()
    }

    pub fn n_solvers(&self) -> usize {
        self.runtimes.ncols()
    }

    /// Joint feature dimension: instance features times solver features.
    pub fn joint_dim(&self) -> usize {
        self.instance_features.ncols() * self.solver_features.ncols()
    }

    /// Replaces the instance features by their preprocessed version.
    pub fn preprocess_instance_features(&mut self) -> Result<PreprocessReport> {
        let report = preprocess_features(&self.instance_features)?;
        self.instance_features = report.features.clone();
        Ok(report)
    }
}

fn load_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Load {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let cols = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c])
}

/// Reads `instance_id,<prefix>0,<prefix>1,...` tables.
fn read_id_table(path: &Path, prefix: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.get(0) != Some("instance_id") || headers.len() < 2 {
        return Err(load_error(
            path,
            "header must start with instance_id and name at least one column",
        ));
    }
    for (i, h) in headers.iter().skip(1).enumerate() {
        if h != format!("{prefix}{i}") {
            return Err(load_error(
                path,
                format!("expected column {prefix}{i}, found {h}"),
            ));
        }
    }
    let mut ids = vec![];
    let mut rows = vec![];
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        ids.push(record[0].to_string());
        let values = record
            .iter()
            .skip(1)
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| load_error(path, format!("row {}: {e}", line + 1)))?;
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(load_error(path, "no data rows"));
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
        return Err(load_error(path, format!("duplicate instance_id {dup}")));
    }
    Ok((ids, rows))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    load_error(path, e.to_string())
}

fn read_solver_features(text: String) -> std::result::Result<DMatrix<f64>, String> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| e.to_string())?;
    if headers.iter().collect::<Vec<_>>() != ["alpha", "rho", "ps", "wp"] {
        return Err("solver feature header must be alpha,rho,ps,wp".to_string());
    }
    let mut rows = vec![];
    for record in reader.records() {
        let record = record.map_err(|e| e.to_string())?;
        let row = record
            .iter()
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err("no solver rows".to_string());
    }
    Ok(rows_to_matrix(&rows))
}

/// The twenty SAPS parametrizations bundled with the crate (rows: `alpha, rho, ps, wp`).
pub fn saps_parametrizations() -> DMatrix<f64> {
    read_solver_features(SAPS_PARAMETRIZATIONS.to_string()).expect("bundled fixture parses")
}

/// Kronecker product of two vectors: entry `a * len(w) + b` is `u[a] * w[b]`.
pub fn kron(u: &[f64], w: &[f64]) -> Vec<f64> {
    u.iter()
        .flat_map(|a| w.iter().map(move |b| a * b))
        .collect()
}

/// Context and true utilities for round `t` (1-based) of an algorithm-selection
/// run visiting instances in `order`.
pub fn algoselect_round(
    table: &RuntimeTable,
    order: &[usize],
    t: usize,
    lambda: f64,
) -> Result<(ContextMatrix, UtilityVector)> {
    if t == 0 || t > order.len() {
        return Err(Error::Exhausted {
            round: t,
            available: order.len(),
        });
    }
    let row = order[t - 1];
    if row >= table.n_instances() {
        return Err(Error::invalid(format!("instance {row} out of range")));
    }
    let instance: Vec<f64> = table.instance_features.row(row).iter().copied().collect();
    let m = table.n_solvers();
    let columns: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let solver: Vec<f64> = table.solver_features.row(i).iter().copied().collect();
            kron(&instance, &solver)
        })
        .collect();
    let context = ContextMatrix::from_columns(&columns, t)?;
    let logs = (0..m).map(|i| -lambda * table.runtimes[(row, i)]).collect();
    Ok((context, UtilityVector::from_log_values(logs)?))
}

/// Output of the instance-feature preprocessing pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessReport {
    /// Min-max scaled surviving columns.
    pub features: DMatrix<f64>,
    /// Original indices of the surviving columns, ascending.
    pub kept: Vec<usize>,
    /// Columns dropped by the variance filter.
    pub low_variance: Vec<usize>,
    /// Columns dropped by correlation pruning, in removal order.
    pub correlated: Vec<usize>,
}

fn population_variance(col: &[f64]) -> f64 {
    let mean = col.iter().sum::<f64>() / col.len() as f64;
    col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / col.len() as f64
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

/// Min-max scaling to `[0, 1]`, a variance filter, then greedy correlation
/// pruning: while the most correlated remaining pair exceeds the threshold,
/// drop whichever member has the larger mean absolute correlation with the
/// other remaining features (the larger index on ties).
pub fn preprocess_features(raw: &DMatrix<f64>) -> Result<PreprocessReport> {
    let (rows, cols) = raw.shape();
    if rows < 2 {
        return Err(Error::invalid("preprocessing needs at least two rows"));
    }
    let scaled: Vec<Vec<f64>> = (0..cols)
        .map(|c| {
            let col = raw.column(c);
            let (lo, hi) = (col.min(), col.max());
            col.iter()
                .map(|v| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
                .collect()
        })
        .collect();

    let (mut kept, low_variance): (Vec<usize>, Vec<usize>) =
        (0..cols).partition(|&c| population_variance(&scaled[c]) >= VARIANCE_THRESHOLD);

    let mut corr = DMatrix::zeros(cols, cols);
    for (i, &a) in kept.iter().enumerate() {
        for &b in &kept[i + 1..] {
            let r = pearson(&scaled[a], &scaled[b]).abs();
            corr[(a, b)] = r;
            corr[(b, a)] = r;
        }
    }

    let mut correlated = vec![];
    while kept.len() > 1 {
        let mut worst: Option<(f64, usize, usize)> = None;
        for (i, &a) in kept.iter().enumerate() {
            for &b in &kept[i + 1..] {
                if worst.is_none_or(|(r, _, _)| corr[(a, b)] > r) {
                    worst = Some((corr[(a, b)], a, b));
                }
            }
        }
        let Some((r, a, b)) = worst else { break };
        if r <= CORRELATION_THRESHOLD {
            break;
        }
        let mean_corr = |x: usize| {
            kept.iter()
                .filter(|&&o| o != x)
                .map(|&o| corr[(x, o)])
                .sum::<f64>()
                / (kept.len() - 1) as f64
        };
        // a < b, so ties go to b
        let victim = if mean_corr(a) > mean_corr(b) { a } else { b };
        kept.retain(|&c| c != victim);
        correlated.push(victim);
    }

    let features = DMatrix::from_fn(rows, kept.len(), |r, c| scaled[kept[c]][r]);
    Ok(PreprocessReport {
        features,
        kept,
        low_variance,
        correlated,
    })
}

/// A per-repetition world that produces each round's context and true utilities.
#[derive(Debug, Clone)]
pub enum Environment {
    Synthetic(SyntheticScenario),
    AlgoSelect {
        table: Arc<RuntimeTable>,
        order: Vec<usize>,
        lambda: f64,
    },
}

impl Environment {
    /// Shuffles the instance order from the seed's setup stream; each
    /// instance is visited at most once.
    pub fn algoselect(table: Arc<RuntimeTable>, lambda: f64, seed: u64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be >= 0, got {lambda}")));
        }
        let mut order: Vec<usize> = (0..table.n_instances()).collect();
        order.shuffle(&mut setup_rng(seed));
        Ok(Environment::AlgoSelect {
            table,
            order,
            lambda,
        })
    }

    pub fn n_arms(&self) -> usize {
        match self {
            Environment::Synthetic(s) => s.n,
            Environment::AlgoSelect { table, .. } => table.n_solvers(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Environment::Synthetic(s) => s.d,
            Environment::AlgoSelect { table, .. } => table.joint_dim(),
        }
    }

    /// Most rounds the environment can serve, if bounded.
    pub fn max_rounds(&self) -> Option<usize> {
        match self {
            Environment::Synthetic(_) => None,
            Environment::AlgoSelect { order, .. } => Some(order.len()),
        }
    }

    /// Context and true utilities for round `t` (1-based).
    pub fn round(&self, t: usize) -> Result<(ContextMatrix, UtilityVector)> {
        match self {
            Environment::Synthetic(s) => {
                let ctx = synthetic_round(s, t)?;
                let utils = true_utilities(&s.theta_star, &ctx)?;
                Ok((ctx, utils))
            }
            Environment::AlgoSelect {
                table,
                order,
                lambda,
            } => algoselect_round(table, order, t, *lambda),
        }
    }
}
