//! Polyak-Ruppert averaged SGD on the PL log-likelihood, the sandwich
//! covariance estimate, UCB confidence widths, and the tail bounds behind them.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{grad_and_hessian, grad_loglik, symmetrize, Observation};
use crate::pl_core::{ContextMatrix, UtilityVector};

/// Step-size schedule `gamma1 * t^-alpha` and the ridge used when inverting
/// the averaged Hessian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub gamma1: f64,
    pub alpha: f64,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
}

fn default_ridge() -> f64 {
    1e-6
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            gamma1: 2.0,
            alpha: 0.6,
            ridge: default_ridge(),
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma1.is_finite() && self.gamma1 > 0.0) {
            return Err(Error::Config(format!(
                "gamma1 must be > 0, got {}",
                self.gamma1
            )));
        }
        if !(self.alpha > 0.5 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (1/2, 1), got {}",
                self.alpha
            )));
        }
        if !(self.ridge.is_finite() && self.ridge >= 0.0) {
            return Err(Error::Config(format!(
                "ridge must be >= 0, got {}",
                self.ridge
            )));
        }
        Ok(())
    }

    /// Learning rate of update number `t` (1-based).
    pub fn step_size(&self, t: usize) -> f64 {
        self.gamma1 * (t as f64).powf(-self.alpha)
    }
}

/// Online estimate of the PL weight vector.
///
/// `s_accum` sums Hessians and `v_accum` sums gradient outer products, both
/// evaluated at the running average right after it absorbs each observation.
/// Past terms are never re-evaluated.
#[derive(Debug, Clone)]
pub struct EstimatorState {
    theta_hat: DVector<f64>,
    theta_bar: DVector<f64>,
    t: usize,
    s_accum: DMatrix<f64>,
    v_accum: DMatrix<f64>,
    config: EstimatorConfig,
}

impl EstimatorState {
    pub fn new(theta0: DVector<f64>, config: EstimatorConfig) -> Result<Self> {
        config.validate()?;
        let d = theta0.len();
        if d == 0 {
            return Err(Error::invalid("parameter dimension must be >= 1"));
        }
        Ok(EstimatorState {
            theta_bar: theta0.clone(),
            theta_hat: theta0,
            t: 0,
            s_accum: DMatrix::zeros(d, d),
            v_accum: DMatrix::zeros(d, d),
            config,
        })
    }

    /// Starts from i.i.d. uniform draws on `[0, 1]^d`.
    pub fn random_init<R: Rng + ?Sized>(
        d: usize,
        config: EstimatorConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let theta0 = DVector::from_fn(d, |_, _| rng.random::<f64>());
        EstimatorState::new(theta0, config)
    }

    pub fn dim(&self) -> usize {
        self.theta_hat.len()
    }

    /// Number of observations absorbed so far.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn theta_hat(&self) -> &DVector<f64> {
        &self.theta_hat
    }

    pub fn theta_bar(&self) -> &DVector<f64> {
        &self.theta_bar
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    pub fn hessian_sum(&self) -> &DMatrix<f64> {
        &self.s_accum
    }

    pub fn gradient_outer_sum(&self) -> &DMatrix<f64> {
        &self.v_accum
    }

    /// One gradient-ascent step on the log-likelihood followed by the
    /// running-average update. Returns the step size that was applied.
    pub fn update(&mut self, obs: &Observation) -> Result<f64> {
        if obs.dim() != self.dim() {
            return Err(Error::invalid(format!(
                "observation dimension {} != estimator dimension {}",
                obs.dim(),
                self.dim()
            )));
        }
        let grad = grad_loglik(&self.theta_hat, obs)?;
        let t = self.t + 1;
        let step = self.config.step_size(t);
        self.theta_hat.axpy(step, &grad, 1.0);
        let tf = t as f64;
        self.theta_bar *= (tf - 1.0) / tf;
        self.theta_bar.axpy(1.0 / tf, &self.theta_hat, 1.0);

        let (g_bar, h_bar) = grad_and_hessian(&self.theta_bar, obs)?;
        self.s_accum += h_bar;
        self.v_accum.ger(1.0, &g_bar, &g_bar, 1.0);
        self.t = t;

        if self.theta_hat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow("SGD iterate diverged".to_string()));
        }
        Ok(step)
    }

    /// `v_hat_i = exp(x_i' theta_bar)`.
    pub fn estimated_utilities(&self, context: &ContextMatrix) -> Result<UtilityVector> {
        crate::pl_core::contextual_utilities(&self.theta_bar, context)
    }

    /// Sandwich estimate `t^-1 S^-1 V S^-1` with `S`, `V` the averaged
    /// Hessian and gradient outer products.
    ///
    /// When the smallest-magnitude eigenvalue of `S` is below the ridge, `S`
    /// is shifted to `S - ridge * I` before inversion (`S` is negative
    /// semi-definite, so this moves it away from singularity).
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        if self.t == 0 {
            return Err(Error::State(
                "covariance needs at least one observation".to_string(),
            ));
        }
        let tf = self.t as f64;
        let d = self.dim();
        let mut s = &self.s_accum / tf;
        symmetrize(&mut s);
        let v = &self.v_accum / tf;

        let eig = s.symmetric_eigen();
        let min_abs = eig
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |m, l| m.min(l.abs()));
        let shift = if min_abs < self.config.ridge {
            self.config.ridge
        } else {
            0.0
        };
        let mut inv_diag = DVector::zeros(d);
        for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
            let shifted = lambda - shift;
            if shifted == 0.0 {
                return Err(Error::NumericOverflow(
                    "averaged Hessian is singular and no ridge is configured".to_string(),
                ));
            }
            inv_diag[i] = 1.0 / shifted;
        }
        let q = &eig.eigenvectors;
        let s_inv = q * DMatrix::from_diagonal(&inv_diag) * q.transpose();
        let mut sigma = &s_inv * v * &s_inv / tf;
        symmetrize(&mut sigma);
        if sigma.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericOverflow(
                "covariance is not finite".to_string(),
            ));
        }
        Ok(sigma)
    }

    /// Estimated utilities and their UCB widths
    /// `c_i = omega * sqrt((2 log t + d + 2 sqrt(d log t)) * I_i)` with
    /// `I_i = exp(2 x_i' theta_bar) * x_i' Sigma x_i` (the operator norm of the
    /// rank-one `Sigma^1/2 M_i Sigma^1/2`).
    pub fn confidence_widths(
        &self,
        context: &ContextMatrix,
        omega: f64,
    ) -> Result<ConfidenceWidths> {
        if !(omega.is_finite() && omega >= 0.0) {
            return Err(Error::invalid(format!("omega must be >= 0, got {omega}")));
        }
        let sigma = self.covariance()?;
        let utilities = self.estimated_utilities(context)?;
        let bracket = width_bracket(self.t, self.dim());
        let mut widths = Vec::with_capacity(context.n_arms());
        for (i, &logit) in utilities.log_values().iter().enumerate() {
            let x = context.column(i);
            // Sigma is PSD up to rounding
            let quad = (x.transpose() * &sigma * x)[(0, 0)].max(0.0);
            let width = omega * (bracket * quad).sqrt() * logit.exp();
            if !width.is_finite() {
                return Err(Error::NumericOverflow(format!(
                    "confidence width of arm {i} overflowed"
                )));
            }
            widths.push(width);
        }
        Ok(ConfidenceWidths { widths, utilities })
    }
}

/// `2 log t + d + 2 sqrt(d log t)`.
pub fn width_bracket(t: usize, d: usize) -> f64 {
    let log_t = (t as f64).ln();
    let d = d as f64;
    2.0 * log_t + d + 2.0 * (d * log_t).sqrt()
}

/// Per-arm estimated utilities and confidence widths.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceWidths {
    pub widths: Vec<f64>,
    pub utilities: UtilityVector,
}

impl ConfidenceWidths {
    /// Upper confidence bounds `v_hat_i + c_i`.
    pub fn upper_bounds(&self) -> Result<Vec<f64>> {
        let ucb: Vec<f64> = self
            .utilities
            .values()
            .iter()
            .zip(&self.widths)
            .map(|(v, c)| v + c)
            .collect();
        if ucb.iter().any(|u| !u.is_finite()) {
            return Err(Error::NumericOverflow(
                "upper confidence bound overflowed".to_string(),
            ));
        }
        Ok(ucb)
    }
}

/// Threshold `s = 4 (d1 + 2 sqrt(d1 x) + 2x) / (3 d1)` whose exceedance
/// probability by an F(d1, d2) variable is bounded by [`f_tail_bound`].
pub fn f_tail_threshold(d1: usize, x: f64) -> f64 {
    let d1 = d1 as f64;
    4.0 * (d1 + 2.0 * (d1 * x).sqrt() + 2.0 * x) / (3.0 * d1)
}

/// `exp(-x) + exp(-3 d2 / 256)`.
pub fn f_tail_bound(d2: usize, x: f64) -> f64 {
    (-x).exp() + (-3.0 * d2 as f64 / 256.0).exp()
}

/// `d + 2 sqrt(d x) + 2x`: the deviation level in the first chi-square bound.
pub fn chi2_upper_threshold(d: usize, x: f64) -> f64 {
    let d = d as f64;
    d + 2.0 * (d * x).sqrt() + 2.0 * x
}

/// Bound on `P(Y - d >= 2 sqrt(d x) + 2x)` for `Y ~ chi2(d)`, valid for `x >= 0`.
pub fn chi2_upper_tail_bound(x: f64) -> f64 {
    (-x).exp()
}

/// Bound on `P(|Y - d| >= d x)` for `Y ~ chi2(d)`, valid for `x in [0, 1/2)`.
pub fn chi2_two_sided_bound(d: usize, x: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&x) {
        return Err(Error::Domain(format!(
            "two-sided chi-square bound needs x in [0, 1/2), got {x}"
        )));
    }
    Ok((-3.0 * d as f64 * x * x / 16.0).exp())
}

/// Both chi-square tail bounds at `(d, x)`.
pub fn chi2_tail_bounds(d: usize, x: f64) -> Result<(f64, f64)> {
    Ok((chi2_upper_tail_bound(x), chi2_two_sided_bound(d, x)?))
}
