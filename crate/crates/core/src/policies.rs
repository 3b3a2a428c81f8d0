//! Subset-selection policies: CPPL and the Max-Theta, epsilon-greedy and MM baselines.
//!
//! Every policy follows the same round protocol: it is shown the context,
//! asked for `k` arms, and then handed the resulting observation. Ties in
//! scores are always broken toward the lowest arm index, and chosen subsets
//! are reported sorted ascending.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{EstimatorConfig, EstimatorState};
use crate::likelihood::{Feedback, Observation};
use crate::pl_core::{ContextMatrix, Subset};
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDecision {
    pub subset: Subset,
    /// Per-arm scores the selection was based on.
    pub scores: Vec<f64>,
}

pub trait Policy: Send {
    fn name(&self) -> &'static str;

    fn choose(&mut self, context: &ContextMatrix, k: usize) -> Result<PolicyDecision>;

    fn update(&mut self, obs: &Observation) -> Result<()>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Cppl,
    MaxTheta,
    EGreedy,
    Mm,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Cppl => "cppl",
            PolicyKind::MaxTheta => "maxtheta",
            PolicyKind::EGreedy => "egreedy",
            PolicyKind::Mm => "mm",
        }
    }
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(Error::invalid(format!(
            "need 1 <= k < n, got k = {k}, n = {n}"
        )));
    }
    Ok(())
}

/// Indices of the `k` largest scores, lowest index first among equals,
/// returned sorted ascending. Equivalent to the argmax of the score sum over
/// all `k`-subsets.
pub fn top_k(scores: &[f64], k: usize) -> Result<Vec<usize>> {
    check_k(k, scores.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    Ok(order)
}

fn decide(scores: Vec<f64>, k: usize) -> Result<PolicyDecision> {
    let subset = Subset::new(top_k(&scores, k)?)?;
    Ok(PolicyDecision { subset, scores })
}

/// Top-`k` arms by `v_hat + c`. Before the first observation no covariance
/// exists yet, so the widths are taken as zero.
pub fn cppl_choose(
    state: &EstimatorState,
    context: &ContextMatrix,
    k: usize,
    omega: f64,
) -> Result<PolicyDecision> {
    check_k(k, context.n_arms())?;
    if state.t() == 0 {
        return max_theta_choose(state, context, k);
    }
    let widths = state.confidence_widths(context, omega)?;
    decide(widths.upper_bounds()?, k)
}

/// Top-`k` arms by the point estimate `v_hat` alone.
pub fn max_theta_choose(
    state: &EstimatorState,
    context: &ContextMatrix,
    k: usize,
) -> Result<PolicyDecision> {
    check_k(k, context.n_arms())?;
    // log-utilities rank identically to utilities and cannot overflow
    let scores = state.estimated_utilities(context)?.log_values().to_vec();
    decide(scores, k)
}

/// Max-Theta with probability `1 - epsilon`, otherwise a uniformly random `k`-subset.
pub fn epsilon_greedy_choose<R: Rng + ?Sized>(
    state: &EstimatorState,
    context: &ContextMatrix,
    k: usize,
    epsilon: f64,
    rng: &mut R,
) -> Result<PolicyDecision> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::invalid(format!(
            "epsilon must lie in [0, 1], got {epsilon}"
        )));
    }
    let greedy = max_theta_choose(state, context, k)?;
    if rng.random::<f64>() < epsilon {
        let subset = Subset::new(sample(rng, context.n_arms(), k).into_vec())?;
        Ok(PolicyDecision {
            subset,
            scores: greedy.scores,
        })
    } else {
        Ok(greedy)
    }
}

const MM_WEIGHT_FLOOR: f64 = 1e-12;

/// Context-free PL weights fitted by minorization-maximization.
///
/// Observations are reduced to sequential-choice stages: a winner observation
/// is one stage; a ranking of `m` arms gives `m - 1` stages. Stages are kept as
/// counts keyed by their remaining-arm set, so the fit does not depend on the
/// order in which observations arrived.
#[derive(Debug, Clone)]
pub struct MMState {
    weights: Vec<f64>,
    history: Vec<(Subset, Feedback)>,
    wins: Vec<f64>,
    stage_counts: BTreeMap<Vec<usize>, f64>,
    unseen: Vec<usize>,
    iterations: usize,
}

impl MMState {
    /// Uniform weights `1/n`, empty history.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("need at least one arm"));
        }
        Ok(MMState {
            weights: vec![1.0 / n as f64; n],
            history: Vec::new(),
            wins: vec![0.0; n],
            stage_counts: BTreeMap::new(),
            unseen: (0..n).collect(),
            iterations: 0,
        })
    }

    pub fn n_arms(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn history(&self) -> &[(Subset, Feedback)] {
        &self.history
    }

    /// Arms that never took part in an informative stage; their weight stays at `1/n`.
    pub fn unseen(&self) -> &[usize] {
        &self.unseen
    }

    /// Iterations used by the most recent fit.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn record(&mut self, subset: Subset, feedback: Feedback) -> Result<()> {
        subset.check_within(self.n_arms())?;
        let ordering: Vec<usize> = match &feedback {
            Feedback::Winner(k) => {
                if !subset.contains(*k) {
                    return Err(Error::invalid(format!("winner {k} not in subset")));
                }
                vec![*k]
            }
            Feedback::Ranking(r) => {
                if r.domain() != subset.members() {
                    return Err(Error::invalid("ranking domain differs from the subset"));
                }
                r.ordering().to_vec()
            }
        };
        let mut remaining = subset.members().to_vec();
        for &chosen in &ordering {
            if remaining.len() < 2 {
                break;
            }
            self.wins[chosen] += 1.0;
            *self.stage_counts.entry(remaining.clone()).or_default() += 1.0;
            remaining.retain(|&a| a != chosen);
        }
        self.history.push((subset, feedback));
        Ok(())
    }

    /// Runs MM from the current weights until the largest weight change drops
    /// below `tol` or `max_iters` iterations have run.
    pub fn fit(&mut self, max_iters: usize, tol: f64) -> Result<()> {
        if self.history.is_empty() {
            return Err(Error::invalid("MM fit needs a nonempty history"));
        }
        let n = self.n_arms();
        let mut seen = vec![false; n];
        for set in self.stage_counts.keys() {
            for &a in set {
                seen[a] = true;
            }
        }
        self.unseen = (0..n).filter(|&a| !seen[a]).collect();
        let seen_mass = (n - self.unseen.len()) as f64 / n as f64;
        for &a in &self.unseen {
            self.weights[a] = 1.0 / n as f64;
        }

        self.iterations = 0;
        while self.iterations < max_iters {
            self.iterations += 1;
            let mut denom = vec![0.0; n];
            for (set, count) in &self.stage_counts {
                let total: f64 = set.iter().map(|&a| self.weights[a]).sum();
                for &a in set {
                    denom[a] += count / total;
                }
            }
            let mut next = self.weights.clone();
            for a in (0..n).filter(|&a| seen[a]) {
                next[a] = self.wins[a] / denom[a];
            }
            normalize_seen(&mut next, &seen, seen_mass);
            for a in (0..n).filter(|&a| seen[a]) {
                next[a] = next[a].max(MM_WEIGHT_FLOOR);
            }
            normalize_seen(&mut next, &seen, seen_mass);
            let change = next
                .iter()
                .zip(&self.weights)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            self.weights = next;
            if change < tol {
                break;
            }
        }
        Ok(())
    }
}

fn normalize_seen(weights: &mut [f64], seen: &[bool], mass: f64) {
    let total: f64 = weights
        .iter()
        .zip(seen)
        .filter(|(_, s)| **s)
        .map(|(w, _)| *w)
        .sum();
    if total > 0.0 {
        for (w, _) in weights.iter_mut().zip(seen).filter(|(_, s)| **s) {
            *w *= mass / total;
        }
    }
}

pub fn mm_fit(mut state: MMState, max_iters: usize, tol: f64) -> Result<MMState> {
    state.fit(max_iters, tol)?;
    Ok(state)
}

/// Greedy top-`k` by MM weight.
pub fn mm_choose(state: &MMState, k: usize) -> Result<PolicyDecision> {
    decide(state.weights.clone(), k)
}

/// Upper-confidence preselection on the averaged-SGD estimate.
pub struct CpplPolicy {
    estimator: EstimatorState,
    omega: f64,
}

impl CpplPolicy {
    pub fn new(d: usize, config: EstimatorConfig, omega: f64, rng: &mut SimRng) -> Result<Self> {
        if !(omega.is_finite() && omega >= 0.0) {
            return Err(Error::Config(format!("omega must be >= 0, got {omega}")));
        }
        Ok(CpplPolicy {
            estimator: EstimatorState::random_init(d, config, rng)?,
            omega,
        })
    }

    pub fn from_state(estimator: EstimatorState, omega: f64) -> Self {
        CpplPolicy { estimator, omega }
    }

    pub fn estimator(&self) -> &EstimatorState {
        &self.estimator
    }
}

impl Policy for CpplPolicy {
    fn name(&self) -> &'static str {
        "cppl"
    }

    fn choose(&mut self, context: &ContextMatrix, k: usize) -> Result<PolicyDecision> {
        cppl_choose(&self.estimator, context, k, self.omega)
    }

    fn update(&mut self, obs: &Observation) -> Result<()> {
        self.estimator.update(obs).map(|_| ())
    }
}

pub struct MaxThetaPolicy {
    estimator: EstimatorState,
}

impl MaxThetaPolicy {
    pub fn new(d: usize, config: EstimatorConfig, rng: &mut SimRng) -> Result<Self> {
        Ok(MaxThetaPolicy {
            estimator: EstimatorState::random_init(d, config, rng)?,
        })
    }
}

impl Policy for MaxThetaPolicy {
    fn name(&self) -> &'static str {
        "maxtheta"
    }

    fn choose(&mut self, context: &ContextMatrix, k: usize) -> Result<PolicyDecision> {
        max_theta_choose(&self.estimator, context, k)
    }

    fn update(&mut self, obs: &Observation) -> Result<()> {
        self.estimator.update(obs).map(|_| ())
    }
}

pub struct EpsilonGreedyPolicy {
    estimator: EstimatorState,
    epsilon: f64,
    rng: SimRng,
}

impl EpsilonGreedyPolicy {
    /// Draws the initial parameter from `rng`, then keeps it for exploration.
    pub fn new(d: usize, config: EstimatorConfig, epsilon: f64, mut rng: SimRng) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::Config(format!(
                "epsilon must lie in [0, 1], got {epsilon}"
            )));
        }
        let estimator = EstimatorState::random_init(d, config, &mut rng)?;
        Ok(EpsilonGreedyPolicy {
            estimator,
            epsilon,
            rng,
        })
    }
}

impl Policy for EpsilonGreedyPolicy {
    fn name(&self) -> &'static str {
        "egreedy"
    }

    fn choose(&mut self, context: &ContextMatrix, k: usize) -> Result<PolicyDecision> {
        epsilon_greedy_choose(&self.estimator, context, k, self.epsilon, &mut self.rng)
    }

    fn update(&mut self, obs: &Observation) -> Result<()> {
        self.estimator.update(obs).map(|_| ())
    }
}

/// Refits MM on the full history after every observation, warm-started.
pub struct MmPolicy {
    state: MMState,
    max_iters: usize,
    tol: f64,
}

impl MmPolicy {
    pub const DEFAULT_MAX_ITERS: usize = 100;
    pub const DEFAULT_TOL: f64 = 1e-8;

    pub fn new(n: usize) -> Result<Self> {
        Ok(MmPolicy {
            state: MMState::new(n)?,
            max_iters: Self::DEFAULT_MAX_ITERS,
            tol: Self::DEFAULT_TOL,
        })
    }

    pub fn state(&self) -> &MMState {
        &self.state
    }
}

impl Policy for MmPolicy {
    fn name(&self) -> &'static str {
        "mm"
    }

    fn choose(&mut self, context: &ContextMatrix, k: usize) -> Result<PolicyDecision> {
        if context.n_arms() != self.state.n_arms() {
            return Err(Error::invalid(
                "context arm count differs from the MM state",
            ));
        }
        mm_choose(&self.state, k)
    }

    fn update(&mut self, obs: &Observation) -> Result<()> {
        self.state
            .record(obs.subset().clone(), obs.feedback().clone())?;
        self.state.fit(self.max_iters, self.tol)
    }
}
