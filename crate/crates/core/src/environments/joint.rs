use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{stream, Stream};
use crate::types::ContextPoint;

/// A world whose arms form a continuum: the reward depends jointly on the
/// context and a real-valued action vector.
pub trait JointEnvironment {
    fn context_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn next_context(&mut self) -> Result<ContextPoint>;
    fn mean_reward(&self, x: &ContextPoint, a: &[f64]) -> Result<f64>;
    fn observe(&mut self, x: &ContextPoint, a: &[f64]) -> Result<f64>;
    /// An action attaining the best mean at `x`.
    fn maximizer(&self, x: &ContextPoint) -> Vec<f64>;
}

/// `f(x, a) = -|a - 0.5|^2` with uniform contexts on `[0,1]^D`.
#[derive(Debug, Clone)]
pub struct QuadraticJoint {
    context_dim: usize,
    action_dim: usize,
    noise_sigma: f64,
    contexts: ChaCha8Rng,
    noise: ChaCha8Rng,
}

impl QuadraticJoint {
    pub const CENTER: f64 = 0.5;

    pub fn new(context_dim: usize, action_dim: usize, noise_sigma: f64, seed: u64) -> Self {
        Self {
            context_dim,
            action_dim,
            noise_sigma,
            contexts: stream(seed, Stream::Contexts),
            noise: stream(seed, Stream::Noise),
        }
    }
}

impl JointEnvironment for QuadraticJoint {
    fn context_dim(&self) -> usize {
        self.context_dim
    }

    fn action_dim(&self) -> usize {
        self.action_dim
    }

    fn next_context(&mut self) -> Result<ContextPoint> {
        ContextPoint::new(
            (0..self.context_dim)
                .map(|_| self.contexts.random::<f64>())
                .collect(),
        )
    }

    fn mean_reward(&self, x: &ContextPoint, a: &[f64]) -> Result<f64> {
        x.check_dim(self.context_dim)?;
        if a.len() != self.action_dim {
            return Err(Error::DimensionMismatch {
                expected: self.action_dim,
                got: a.len(),
            });
        }
        Ok(-a.iter().map(|v| (v - Self::CENTER).powi(2)).sum::<f64>())
    }

    fn observe(&mut self, x: &ContextPoint, a: &[f64]) -> Result<f64> {
        let mean = self.mean_reward(x, a)?;
        let z: f64 = StandardNormal.sample(&mut self.noise);
        Ok(mean + self.noise_sigma * z)
    }

    fn maximizer(&self, _x: &ContextPoint) -> Vec<f64> {
        vec![Self::CENTER; self.action_dim]
    }
}
