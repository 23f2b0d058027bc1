//! Reward-generating worlds.

mod classification;
pub mod idx;
mod joint;
mod scenario;

pub use classification::ClassificationEnv;
pub use joint::{JointEnvironment, QuadraticJoint};
pub use scenario::{manifold_point, Scenario, ScenarioEnv, ScenarioKind, DEFAULT_NOISE};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::types::ContextPoint;

/// A context together with the true mean reward of every arm at it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub context: ContextPoint,
    pub means: Vec<f64>,
}

impl Round {
    pub fn best_mean(&self) -> f64 {
        self.means.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// The true top arm, lowest index on ties.
    pub fn top_arm(&self) -> usize {
        crate::policy::argmax(&self.means)
    }
}

/// A finite-armed contextual world. Each round reveals a context; pulling an
/// arm returns its mean at that context plus the environment's noise.
pub trait Environment {
    fn num_arms(&self) -> usize;
    fn context_dim(&self) -> usize;
    fn next_round(&mut self) -> Result<Round>;
    fn observe(&mut self, round: &Round, arm: usize) -> Result<f64>;
    /// Fresh rounds that are not part of the training stream.
    fn holdout(&mut self, count: usize) -> Result<Vec<Round>>;
}
