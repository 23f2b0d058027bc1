//! Nonparametric contextual bandits built on tie-inclusive k-NN regression.
//!
//! Per-arm k-NN estimates drive uniform-sampling top-arm identification and
//! the kNN-UCB regret minimizer; [`topology`] recovers the regions where an
//! arm is top, and [`policy::infinite`] handles continuum action spaces.
//! Ridge regression and LinUCB live in [`baselines`] for comparison.

pub mod baselines;
pub mod environments;
pub mod error;
pub mod experiment;
pub mod knn;
pub mod metrics;
pub mod policy;
pub mod rng;
pub mod topology;
pub mod types;

pub use error::{Error, Result};
pub use knn::{default_k, KRule, KnnEstimate, SpatialIndex};
pub use policy::{Policy, PolicyState};
pub use types::{ArmHistory, BanditConfig, ContextPoint, ExperimentTrace, Observation, TraceStep};
