//! Fast numerical self-checks for an installed build.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::environments::{preprocess_features, RegretTrace};
use crate::error::Result;
use crate::estimator::{EstimatorConfig, EstimatorState};
use crate::harness::{EnvironmentKind, Experiment, ExperimentConfig};
use crate::likelihood::{grad_loglik, hessian_loglik, loglik, Feedback, Observation};
use crate::pl_core::{
    prob_full_ranking, prob_top_rank, ContextMatrix, Ranking, Subset, UtilityVector,
};
use crate::policies::{top_k, PolicyKind};
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        name,
        passed,
        detail,
    }
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = vec![];
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let first = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, first);
            out.push(tail);
        }
    }
    out
}

fn random_observation(seed: u64, ranking: bool) -> Result<(DVector<f64>, Observation)> {
    let mut rng = stream_rng(seed, 0);
    let (d, n, k) = (4, 8, 4);
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let theta = DVector::from_fn(d, |_, _| rng.random_range(-1.5..1.5));
    let mut arms: Vec<usize> = (0..n).collect();
    arms.shuffle(&mut rng);
    arms.truncate(k);
    let feedback = if ranking {
        Feedback::Ranking(Ranking::from_ordering(arms.clone())?)
    } else {
        Feedback::Winner(arms[0])
    };
    let obs = Observation::new(
        feedback,
        Subset::new(arms)?,
        ContextMatrix::from_columns(&cols, 1)?,
    )?;
    Ok((theta, obs))
}

fn check_probabilities() -> Result<CheckOutcome> {
    let mut rng = stream_rng(11, 0);
    let mut worst: f64 = 0.0;
    for n in 1..=5 {
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..3.0)).collect();
        let utils = UtilityVector::from_values(&values)?;
        let arms: Vec<usize> = (0..n).collect();
        let mut total = 0.0;
        for ordering in permutations(&arms) {
            total += prob_full_ranking(&utils, &Ranking::from_ordering(ordering)?)?;
        }
        let subset = Subset::full(n)?;
        let top: f64 = arms
            .iter()
            .map(|&a| prob_top_rank(&utils, &subset, a))
            .sum::<Result<f64>>()?;
        worst = worst.max((total - 1.0).abs()).max((top - 1.0).abs());
    }
    Ok(outcome(
        "ranking probabilities sum to one",
        worst < 1e-12,
        format!("max deviation {worst:.2e}"),
    ))
}

fn check_derivatives() -> Result<CheckOutcome> {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let (theta, obs) = random_observation(seed, seed % 2 == 1)?;
        let grad = grad_loglik(&theta, &obs)?;
        let hess = hessian_loglik(&theta, &obs)?;
        for j in 0..theta.len() {
            let mut plus = theta.clone();
            let mut minus = theta.clone();
            plus[j] += h;
            minus[j] -= h;
            let fd = (loglik(&plus, &obs)? - loglik(&minus, &obs)?) / (2.0 * h);
            worst = worst.max((fd - grad[j]).abs() / fd.abs().max(grad[j].abs()).max(1e-8));
            let col = (grad_loglik(&plus, &obs)? - grad_loglik(&minus, &obs)?) / (2.0 * h);
            for i in 0..theta.len() {
                let (a, b) = (col[i], hess[(i, j)]);
                worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(1e-8));
            }
        }
    }
    Ok(outcome(
        "gradient and Hessian match finite differences",
        worst < 1e-4,
        format!("max relative error {worst:.2e}"),
    ))
}

fn check_covariance() -> Result<CheckOutcome> {
    let mut rng = stream_rng(5, 0);
    let mut state = EstimatorState::random_init(4, EstimatorConfig::default(), &mut rng)?;
    for seed in 0..50 {
        state.update(&random_observation(100 + seed, false)?.1)?;
    }
    let cov = state.covariance()?;
    let asym = (&cov - cov.transpose()).abs().max();
    let min_eig = cov.clone().symmetric_eigenvalues().min();
    Ok(outcome(
        "sandwich covariance is symmetric PSD",
        asym < 1e-10 && min_eig > -1e-10,
        format!("asymmetry {asym:.1e}, smallest eigenvalue {min_eig:.2e}"),
    ))
}

fn check_top_k() -> Result<CheckOutcome> {
    let mut rng = stream_rng(3, 0);
    let mut mismatches = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..=8);
        let k = rng.random_range(1..n);
        let scores: Vec<f64> = (0..n)
            .map(|_| f64::from(rng.random_range(0..4u8)))
            .collect();
        let chosen = top_k(&scores, k)?;
        let sum: f64 = chosen.iter().map(|&i| scores[i]).sum();
        let mut sorted = scores.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        if (sum - sorted[..k].iter().sum::<f64>()).abs() > 1e-12 {
            mismatches += 1;
        }
    }
    Ok(outcome(
        "top-k selection maximises the score sum",
        mismatches == 0,
        format!("{mismatches} mismatches in 100"),
    ))
}

fn check_preprocessing() -> Result<CheckOutcome> {
    let raw = nalgebra::DMatrix::from_fn(30, 3, |r, c| match c {
        0 => r as f64,
        1 => 2.0 * r as f64 + 1.0,
        _ => 4.0,
    });
    let report = preprocess_features(&raw)?;
    Ok(outcome(
        "feature preprocessing drops constant and duplicate columns",
        report.kept == [0] && report.low_variance == [2] && report.correlated == [1],
        format!("kept {:?}", report.kept),
    ))
}

fn check_determinism() -> Result<CheckOutcome> {
    let config = ExperimentConfig {
        n: 8,
        d: 3,
        k: 3,
        horizon: 100,
        reps: 2,
        seed: 42,
        policy: PolicyKind::Cppl,
        ..ExperimentConfig::new(EnvironmentKind::Synthetic)
    };
    let exp = Experiment::new(config)?;
    let a: Vec<RegretTrace> = (0..2)
        .map(|r| exp.run_repetition(r))
        .collect::<Result<_>>()?;
    let b: Vec<RegretTrace> = (0..2)
        .map(|r| exp.run_repetition(r))
        .collect::<Result<_>>()?;
    Ok(outcome(
        "seeded runs replay identically",
        a == b,
        format!(
            "final regrets {:?}",
            a.iter().map(RegretTrace::total).collect::<Vec<_>>()
        ),
    ))
}

type Check = fn() -> Result<CheckOutcome>;

/// Runs every self-check. Errors raised while checking are reported as failures.
pub fn run_checks() -> Vec<CheckOutcome> {
    let checks: [(&'static str, Check); 6] = [
        ("ranking probabilities", check_probabilities),
        ("derivatives", check_derivatives),
        ("covariance", check_covariance),
        ("top-k", check_top_k),
        ("preprocessing", check_preprocessing),
        ("determinism", check_determinism),
    ];
    checks
        .iter()
        .map(|(name, check)| check().unwrap_or_else(|e| outcome(name, false, e.to_string())))
        .collect()
}
