//! Continuum-armed variants: one k-NN regressor over concatenated
//! (context, action) points, maximized over a fixed candidate lattice.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::argmax;
use crate::environments::JointEnvironment;
use crate::error::{Error, Result};
use crate::knn::{default_k, SpatialIndex};
use crate::rng::{stream, Stream};
use crate::types::ContextPoint;

/// Overflow fraction that triggers a joint-index rebuild. Every decision
/// runs one query per candidate, so the buffer is kept short.
const JOINT_REBUILD_RATIO: f64 = 0.05;

/// The box `[lo, hi]^D'` with a lattice of `candidate_count` points per axis
/// (endpoints included; a single point sits at the center).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpace {
    pub dim: usize,
    pub lo: f64,
    pub hi: f64,
    pub candidate_count: usize,
}

impl ActionSpace {
    pub fn new(dim: usize, lo: f64, hi: f64, candidate_count: usize) -> Result<Self> {
        if dim == 0 || !(lo < hi) || candidate_count == 0 {
            return Err(Error::InvalidConfig(format!(
                "action space needs dim >= 1, lo < hi and candidate_count >= 1 \
                 (got dim {dim}, [{lo}, {hi}], {candidate_count})"
            )));
        }
        Ok(Self {
            dim,
            lo,
            hi,
            candidate_count,
        })
    }

    fn axis(&self) -> Vec<f64> {
        let m = self.candidate_count;
        if m == 1 {
            return vec![0.5 * (self.lo + self.hi)];
        }
        (0..m)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (m - 1) as f64)
            .collect()
    }

    /// All lattice points, first axis varying slowest.
    pub fn candidates(&self) -> Vec<Vec<f64>> {
        let axis = self.axis();
        let mut out: Vec<Vec<f64>> = vec![Vec::new()];
        for _ in 0..self.dim {
            out = out
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        out
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim).map(|_| rng.random_range(self.lo..=self.hi)).collect()
    }
}

fn joined(x: &[f64], a: &[f64]) -> Vec<f64> {
    let mut z = Vec::with_capacity(x.len() + a.len());
    z.extend_from_slice(x);
    z.extend_from_slice(a);
    z
}

fn best_candidate(
    index: &SpatialIndex,
    candidates: &[Vec<f64>],
    x: &[f64],
    k: usize,
) -> Result<usize> {
    let scores = candidates
        .iter()
        .map(|a| Ok(index.knn_regress(&joined(x, a), k)?.value))
        .collect::<Result<Vec<f64>>>()?;
    Ok(argmax(&scores))
}

/// One step of a continuum-armed run.
#[derive(Debug, Clone, PartialEq)]
pub struct JointStep {
    pub context: ContextPoint,
    pub action: Vec<f64>,
    pub reward: f64,
    pub mean: f64,
    pub best_mean: f64,
}

/// Exploitation over the lattice with `k = default_k(n, D + D')`.
#[derive(Debug, Clone)]
pub struct JointPolicy {
    index: SpatialIndex,
    candidates: Vec<Vec<f64>>,
    context_dim: usize,
}

impl JointPolicy {
    pub fn choose(&self, x: &ContextPoint) -> Result<Vec<f64>> {
        x.check_dim(self.context_dim)?;
        let k = default_k(self.index.len(), self.index.dim());
        let i = best_candidate(&self.index, &self.candidates, x.coords(), k)?;
        Ok(self.candidates[i].clone())
    }

    pub fn sample_size(&self) -> usize {
        self.index.len()
    }
}

/// Uniformly random actions for `horizon` steps, then the fitted policy.
pub fn infinite_uniform_run<E: JointEnvironment + ?Sized>(
    env: &mut E,
    space: &ActionSpace,
    horizon: usize,
    seed: u64,
) -> Result<(JointPolicy, Vec<JointStep>)> {
    if space.dim != env.action_dim() {
        return Err(Error::DimensionMismatch {
            expected: env.action_dim(),
            got: space.dim,
        });
    }
    let mut rng = stream(seed, Stream::Actions);
    let mut index = SpatialIndex::new(env.context_dim() + space.dim);
    let mut steps = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let x = env.next_context()?;
        let a = space.sample(&mut rng);
        steps.push(observe_step(env, x, a, &mut index)?);
    }
    let policy = JointPolicy {
        index,
        candidates: space.candidates(),
        context_dim: env.context_dim(),
    };
    Ok((policy, steps))
}

fn observe_step<E: JointEnvironment + ?Sized>(
    env: &mut E,
    x: ContextPoint,
    a: Vec<f64>,
    index: &mut SpatialIndex,
) -> Result<JointStep> {
    let reward = env.observe(&x, &a)?;
    let mean = env.mean_reward(&x, &a)?;
    let best_mean = env.mean_reward(&x, &env.maximizer(&x))?;
    index.push(&joined(x.coords(), &a), reward)?;
    Ok(JointStep {
        context: x,
        action: a,
        reward,
        mean,
        best_mean,
    })
}

/// State of the continuum-armed UCB policy.
#[derive(Debug, Clone)]
pub struct JointPolicyState {
    pub space: ActionSpace,
    pub warmup: usize,
    pub width_scale: f64,
    context_dim: usize,
    index: SpatialIndex,
    candidates: Vec<Vec<f64>>,
}

impl JointPolicyState {
    pub fn new(context_dim: usize, space: ActionSpace, warmup: usize, width_scale: f64) -> Self {
        Self {
            index: SpatialIndex::new(context_dim + space.dim)
                .with_rebuild_ratio(JOINT_REBUILD_RATIO),
            candidates: space.candidates(),
            space,
            warmup,
            width_scale,
            context_dim,
        }
    }

    /// Number of observations so far (the global time t).
    pub fn time(&self) -> usize {
        self.index.len()
    }

    /// `M1 * t^(-1/(2 + D + D'))`, identical for every candidate.
    pub fn width(&self) -> f64 {
        let t = self.time().max(1) as f64;
        self.width_scale * t.powf(-1.0 / (2.0 + self.index.dim() as f64))
    }

    pub fn record(&mut self, x: &ContextPoint, a: &[f64], reward: f64) -> Result<()> {
        x.check_dim(self.context_dim)?;
        self.index.push(&joined(x.coords(), a), reward)
    }
}

/// The UCB choice at `x`. The width depends only on global time, so it
/// shifts every candidate equally.
pub fn infinite_ucb_step(state: &JointPolicyState, x: &ContextPoint) -> Result<Vec<f64>> {
    if state.time() < state.warmup.max(1) {
        return Err(Error::WarmupIncomplete {
            arm: 0,
            have: state.time(),
            need: state.warmup.max(1),
        });
    }
    x.check_dim(state.context_dim)?;
    let n = state.time();
    let k = default_k(n, state.index.dim());
    let width = state.width();
    let scores = state
        .candidates
        .iter()
        .map(|a| Ok(state.index.knn_regress(&joined(x.coords(), a), k)?.value + width))
        .collect::<Result<Vec<f64>>>()?;
    Ok(state.candidates[argmax(&scores)].clone())
}

/// `warmup` uniformly random actions, then UCB over the lattice.
pub fn run_infinite_ucb<E: JointEnvironment + ?Sized>(
    env: &mut E,
    mut state: JointPolicyState,
    horizon: usize,
    seed: u64,
) -> Result<(JointPolicyState, Vec<JointStep>)> {
    if state.space.dim != env.action_dim() || state.context_dim != env.context_dim() {
        return Err(Error::DimensionMismatch {
            expected: env.context_dim() + env.action_dim(),
            got: state.context_dim + state.space.dim,
        });
    }
    let mut rng = stream(seed, Stream::Actions);
    let mut steps = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let x = env.next_context()?;
        let a = if t < state.warmup {
            state.space.sample(&mut rng)
        } else {
            infinite_ucb_step(&state, &x)?
        };
        steps.push(observe_step(env, x, a, &mut state.index)?);
    }
    Ok((state, steps))
}
