//! Contextual preselection bandits under the Plackett-Luce model.
//!
//! A learner observes one joint feature vector per arm, preselects `k` of the
//! `n` arms, and receives either the winner or a full ranking of its subset,
//! drawn from a contextual Plackett-Luce model with an unknown weight vector.
//!
//! The crate is organized bottom-up:
//!
//! - [`pl_core`]: rankings, Plackett-Luce probabilities and exact samplers.
//! - [`likelihood`]: log-likelihood, gradient and Hessian for both feedback kinds.
//! - [`estimator`]: averaged SGD, the plug-in covariance, confidence widths and
//!   the F / chi-square tail bounds backing them.
//! - [`policies`]: CPPL and the Max-Theta, epsilon-greedy and MM baselines.
//! - [`environments`]: synthetic and runtime-table worlds, feature preprocessing, regret.
//! - [`harness`]: configuration, the online loop, aggregation and output files.
//! - [`rng`]: seeded per-purpose random streams.
//! - [`verify`]: quick self-checks used by the `verify` CLI subcommand.

pub mod environments;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod likelihood;
pub mod pl_core;
pub mod policies;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
pub use estimator::{ConfidenceWidths, EstimatorConfig, EstimatorState};
pub use likelihood::{Feedback, Observation};
pub use pl_core::{ContextMatrix, Ranking, Subset, UtilityVector};
pub use policies::{Policy, PolicyDecision};
