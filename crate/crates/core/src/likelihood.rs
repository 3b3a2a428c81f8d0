//! Log-likelihood, gradient and Hessian of the contextual PL model.
//!
//! Both feedback kinds decompose into sequential-choice stages: a stage picks
//! one `chosen` arm out of the arms still `remaining`. Winner feedback is a
//! single stage over the whole subset; a ranking of `m` arms has `m` stages,
//! the last of which has one remaining arm and contributes nothing.
//!
//! Per stage, with `w_l = exp(theta' x_l - max)` over the remaining arms,
//! `a = sum w_l x_l`, `b = sum w_l`, `c = sum w_l x_l x_l'`:
//!
//! - log-likelihood term: `theta' x_chosen - log sum exp(theta' x_l)`
//! - gradient term: `x_chosen - a / b`
//! - Hessian term: `a a' / b^2 - c / b`
//!
//! The max shift cancels in `a / b` and `c / b`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pl_core::{ContextMatrix, Ranking, Subset};

/// Which kind of feedback a run reveals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeedbackMode {
    Winner,
    Ranking,
}

/// What the environment revealed about the chosen subset.
#[derive(Debug, Clone, PartialEq)]
pub enum Feedback {
    Winner(usize),
    Ranking(Ranking),
}

impl Feedback {
    pub fn mode(&self) -> FeedbackMode {
        match self {
            Feedback::Winner(_) => FeedbackMode::Winner,
            Feedback::Ranking(_) => FeedbackMode::Ranking,
        }
    }
}

/// One round's `(feedback, subset, context)` triple.
#[derive(Debug, Clone)]
pub struct Observation {
    feedback: Feedback,
    subset: Subset,
    context: ContextMatrix,
}

impl Observation {
    pub fn new(feedback: Feedback, subset: Subset, context: ContextMatrix) -> Result<Self> {
        subset.check_within(context.n_arms())?;
        match &feedback {
            Feedback::Winner(k) if !subset.contains(*k) => {
                return Err(Error::invalid(format!("winner {k} not in subset")));
            }
            Feedback::Ranking(r) if r.domain() != subset.members() => {
                return Err(Error::invalid("ranking domain differs from the subset"));
            }
            _ => {}
        }
        Ok(Observation {
            feedback,
            subset,
            context,
        })
    }

    pub fn feedback(&self) -> &Feedback {
        &self.feedback
    }

    pub fn subset(&self) -> &Subset {
        &self.subset
    }

    pub fn context(&self) -> &ContextMatrix {
        &self.context
    }

    pub fn dim(&self) -> usize {
        self.context.dim()
    }

    /// Sequential-choice stages as `(chosen, remaining)` pairs; `remaining` includes `chosen`.
    pub fn stages(&self) -> Vec<(usize, &[usize])> {
        match &self.feedback {
            Feedback::Winner(k) => vec![(*k, self.subset.members())],
            Feedback::Ranking(r) => {
                let ordering = r.ordering();
                (0..ordering.len())
                    .map(|i| (ordering[i], &ordering[i..]))
                    .collect()
            }
        }
    }
}

struct Stage {
    shift: f64,
    b: f64,
    a: DVector<f64>,
}

fn stage_moments(
    logits: &[f64],
    context: &ContextMatrix,
    remaining: &[usize],
) -> (Stage, Vec<f64>) {
    let shift = remaining
        .iter()
        .map(|&l| logits[l])
        .fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = remaining
        .iter()
        .map(|&l| (logits[l] - shift).exp())
        .collect();
    let mut a = DVector::zeros(context.dim());
    for (&l, &w) in remaining.iter().zip(&weights) {
        a.axpy(w, &context.column(l), 1.0);
    }
    let b = weights.iter().sum();
    (Stage { shift, b, a }, weights)
}

pub fn loglik(theta: &DVector<f64>, obs: &Observation) -> Result<f64> {
    let logits = obs.context.logits(theta)?;
    let mut total = 0.0;
    for (chosen, remaining) in obs.stages() {
        let shift = remaining
            .iter()
            .map(|&l| logits[l])
            .fold(f64::NEG_INFINITY, f64::max);
        let b: f64 = remaining.iter().map(|&l| (logits[l] - shift).exp()).sum();
        total += logits[chosen] - shift - b.ln();
    }
    Ok(total)
}

pub fn grad_loglik(theta: &DVector<f64>, obs: &Observation) -> Result<DVector<f64>> {
    let logits = obs.context.logits(theta)?;
    let mut grad = DVector::zeros(obs.dim());
    for (chosen, remaining) in obs.stages() {
        let (stage, _) = stage_moments(&logits, &obs.context, remaining);
        grad += obs.context.column(chosen);
        grad.axpy(-1.0 / stage.b, &stage.a, 1.0);
    }
    Ok(grad)
}

pub fn hessian_loglik(theta: &DVector<f64>, obs: &Observation) -> Result<DMatrix<f64>> {
    Ok(grad_and_hessian(theta, obs)?.1)
}

/// Gradient and Hessian in one pass over the stages.
pub fn grad_and_hessian(
    theta: &DVector<f64>,
    obs: &Observation,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let logits = obs.context.logits(theta)?;
    let d = obs.dim();
    let mut grad = DVector::zeros(d);
    let mut hess = DMatrix::zeros(d, d);
    for (chosen, remaining) in obs.stages() {
        let (stage, weights) = stage_moments(&logits, &obs.context, remaining);
        debug_assert!(stage.shift.is_finite());
        let mean = &stage.a / stage.b;
        grad += obs.context.column(chosen);
        grad -= &mean;
        // a a'/b^2 - c/b == -(weighted covariance of the remaining columns)
        for (&l, &w) in remaining.iter().zip(&weights) {
            let centered = obs.context.column(l) - &mean;
            hess.ger(-w / stage.b, &centered, &centered, 1.0);
        }
    }
    symmetrize(&mut hess);
    Ok((grad, hess))
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}
