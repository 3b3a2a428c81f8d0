//! Rankings, Plackett-Luce probabilities and exact samplers.
//!
//! Arms are 0-based indices. Utilities are stored as logarithms so that
//! contextual utilities `exp(theta' x)` never overflow; every probability is
//! evaluated with a max-shifted log-sum-exp over the remaining arms of each
//! sequential-choice stage.

use nalgebra::{DMatrix, DVector, DVectorView};
use rand::Rng;

use crate::error::{Error, Result};

/// A nonempty set of distinct arm indices, kept sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Subset {
    members: Vec<usize>,
}

impl Subset {
    pub fn new(mut members: Vec<usize>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::invalid("subset must be nonempty"));
        }
        members.sort_unstable();
        if members.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!(
                "subset has repeated arms: {members:?}"
            )));
        }
        Ok(Subset { members })
    }

    /// All arms `0..n`.
    pub fn full(n: usize) -> Result<Self> {
        Subset::new((0..n).collect())
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, arm: usize) -> bool {
        self.members.binary_search(&arm).is_ok()
    }

    pub(crate) fn check_within(&self, n: usize) -> Result<()> {
        match self.members.last() {
            Some(&max) if max >= n => Err(Error::invalid(format!(
                "arm {max} out of range for {n} arms"
            ))),
            _ => Ok(()),
        }
    }
}

/// A bijection from a set of arms onto positions `0..m` (0 is the top rank).
///
/// Stored as the sorted domain plus a dense position array aligned with it;
/// the induced ordering (arms listed best first) is cached.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ranking {
    members: Vec<usize>,
    positions: Vec<usize>,
    ordering: Vec<usize>,
}

impl Ranking {
    /// Builds the ranking whose induced ordering is `ordering` (best first).
    pub fn from_ordering(ordering: Vec<usize>) -> Result<Self> {
        let domain = Subset::new(ordering.clone())?;
        let members = domain.members;
        let mut positions = vec![0; members.len()];
        for (pos, arm) in ordering.iter().enumerate() {
            // domain is sorted and duplicate-free, so the search always hits
            let slot = members.binary_search(arm).expect("arm in domain");
            positions[slot] = pos;
        }
        Ok(Ranking {
            members,
            positions,
            ordering,
        })
    }

    /// Builds a ranking from arms and their positions (`positions[i]` is the rank of `arms[i]`).
    pub fn from_positions(arms: &[usize], positions: &[usize]) -> Result<Self> {
        if arms.len() != positions.len() {
            return Err(Error::invalid("arms and positions differ in length"));
        }
        let m = arms.len();
        let mut ordering = vec![usize::MAX; m];
        for (&arm, &pos) in arms.iter().zip(positions) {
            if pos >= m || ordering[pos] != usize::MAX {
                return Err(Error::invalid(format!(
                    "positions {positions:?} are not a bijection onto 0..{m}"
                )));
            }
            ordering[pos] = arm;
        }
        Ranking::from_ordering(ordering)
    }

    /// Sorted domain of the ranking.
    pub fn domain(&self) -> &[usize] {
        &self.members
    }

    /// Arms listed from top rank to bottom rank.
    pub fn ordering(&self) -> &[usize] {
        &self.ordering
    }

    pub fn position_of(&self, arm: usize) -> Option<usize> {
        self.members
            .binary_search(&arm)
            .ok()
            .map(|slot| self.positions[slot])
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn top(&self) -> usize {
        self.ordering[0]
    }
}

/// Per-round joint context/arm features: a `d x n` matrix whose column `i`
/// is the feature vector of arm `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextMatrix {
    features: DMatrix<f64>,
    round: usize,
}

impl ContextMatrix {
    pub fn from_matrix(features: DMatrix<f64>, round: usize) -> Result<Self> {
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(Error::invalid("context needs d >= 1 and n >= 1"));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("context entries must be finite"));
        }
        Ok(ContextMatrix { features, round })
    }

    /// One inner vector per arm.
    pub fn from_columns(columns: &[Vec<f64>], round: usize) -> Result<Self> {
        let d = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != d) {
            return Err(Error::invalid("context columns differ in dimension"));
        }
        let features = DMatrix::from_fn(d, columns.len(), |r, c| columns[c][r]);
        ContextMatrix::from_matrix(features, round)
    }

    pub fn dim(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_arms(&self) -> usize {
        self.features.ncols()
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn column(&self, arm: usize) -> DVectorView<'_, f64> {
        self.features.column(arm)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.features
    }

    /// `theta' x_i` for every arm.
    pub fn logits(&self, theta: &DVector<f64>) -> Result<Vec<f64>> {
        if theta.len() != self.dim() {
            return Err(Error::invalid(format!(
                "theta has dimension {} but context has {}",
                theta.len(),
                self.dim()
            )));
        }
        Ok(self.features.tr_mul(theta).iter().copied().collect())
    }
}

/// Positive PL weights, held as natural logarithms.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityVector {
    log_values: Vec<f64>,
}

impl UtilityVector {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("utility vector must be nonempty"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("utilities must be positive and finite"));
        }
        Ok(UtilityVector {
            log_values: values.iter().map(|v| v.ln()).collect(),
        })
    }

    pub fn from_log_values(log_values: Vec<f64>) -> Result<Self> {
        if log_values.is_empty() {
            return Err(Error::invalid("utility vector must be nonempty"));
        }
        if log_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow(
                "log-utility is not finite".to_string(),
            ));
        }
        Ok(UtilityVector { log_values })
    }

    pub fn log_values(&self) -> &[f64] {
        &self.log_values
    }

    /// Utilities on the natural scale; may saturate to infinity for huge logits.
    pub fn values(&self) -> Vec<f64> {
        self.log_values.iter().map(|l| l.exp()).collect()
    }

    pub fn len(&self) -> usize {
        self.log_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_values.is_empty()
    }

    /// Lowest-index arm with the largest utility.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &l) in self.log_values.iter().enumerate() {
            if l > self.log_values[best] {
                best = i;
            }
        }
        best
    }

    fn check_subset(&self, subset: &Subset) -> Result<()> {
        subset.check_within(self.len())
    }
}

/// `ln(sum_i exp(x_i))` with the maximum factored out.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.into_iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `v_i = exp(theta' x_i)` for every column of the context.
pub fn contextual_utilities(
    theta: &DVector<f64>,
    context: &ContextMatrix,
) -> Result<UtilityVector> {
    UtilityVector::from_log_values(context.logits(theta)?)
}

/// Log-probability of observing `ordering` (best first) under sequential choice.
pub fn log_prob_ordering(utilities: &UtilityVector, ordering: &[usize]) -> f64 {
    let logs = utilities.log_values();
    let mut tail = f64::NEG_INFINITY;
    let mut total = 0.0;
    for &arm in ordering.iter().rev() {
        let l = logs[arm];
        tail = log_add_exp(tail, l);
        total += l - tail;
    }
    total
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

/// Probability of a full ranking over all `n` arms.
pub fn prob_full_ranking(utilities: &UtilityVector, ranking: &Ranking) -> Result<f64> {
    let n = utilities.len();
    let covers_all =
        ranking.len() == n && ranking.domain().iter().enumerate().all(|(i, &a)| i == a);
    if !covers_all {
        return Err(Error::invalid(format!(
            "full ranking must cover all {n} arms"
        )));
    }
    Ok(log_prob_ordering(utilities, ranking.ordering()).exp())
}

/// Probability of a partial ranking on `subset` (the marginal of the full model).
pub fn prob_partial_ranking(
    utilities: &UtilityVector,
    subset: &Subset,
    ranking: &Ranking,
) -> Result<f64> {
    utilities.check_subset(subset)?;
    if ranking.domain() != subset.members() {
        return Err(Error::invalid("ranking domain differs from the subset"));
    }
    Ok(log_prob_ordering(utilities, ranking.ordering()).exp())
}

/// Probability that `arm` is ranked first among `subset`.
pub fn prob_top_rank(utilities: &UtilityVector, subset: &Subset, arm: usize) -> Result<f64> {
    utilities.check_subset(subset)?;
    if !subset.contains(arm) {
        return Err(Error::invalid(format!("arm {arm} not in subset")));
    }
    let logs = utilities.log_values();
    let lse = log_sum_exp(subset.members().iter().map(|&i| logs[i]));
    Ok((logs[arm] - lse).exp())
}

/// One categorical draw over `arms` with weights `exp(log_weights[arm])`.
/// Returns the position within `arms`.
fn categorical<R: Rng + ?Sized>(log_weights: &[f64], arms: &[usize], rng: &mut R) -> usize {
    let max = arms
        .iter()
        .map(|&a| log_weights[a])
        .fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = arms.iter().map(|&a| (log_weights[a] - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (pos, w) in weights.iter().enumerate() {
        if u < *w {
            return pos;
        }
        u -= w;
    }
    arms.len() - 1
}

/// Draws the winner of `subset`.
pub fn sample_winner<R: Rng + ?Sized>(
    utilities: &UtilityVector,
    subset: &Subset,
    rng: &mut R,
) -> Result<usize> {
    utilities.check_subset(subset)?;
    let members = subset.members();
    if members.len() == 1 {
        return Ok(members[0]);
    }
    Ok(members[categorical(utilities.log_values(), members, rng)])
}

/// Draws a ranking of `subset` by repeatedly picking the next-best arm from
/// those remaining, with probability proportional to utility.
pub fn sample_partial_ranking<R: Rng + ?Sized>(
    utilities: &UtilityVector,
    subset: &Subset,
    rng: &mut R,
) -> Result<Ranking> {
    utilities.check_subset(subset)?;
    let mut remaining = subset.members().to_vec();
    let mut ordering = Vec::with_capacity(remaining.len());
    while remaining.len() > 1 {
        let pos = categorical(utilities.log_values(), &remaining, rng);
        ordering.push(remaining.remove(pos));
    }
    ordering.extend(remaining);
    Ranking::from_ordering(ordering)
}
