//! Sampling strategies: uniform sampling, kNN-UCB, LinUCB and a uniformly
//! random reference, plus the infinite-armed variants in [`infinite`].

pub mod infinite;

use log::info;
use rand::Rng;
use rayon::prelude::*;

use crate::baselines::{linucb_decide, RidgeModel, RidgePolicy};
use crate::environments::{Environment, Round};
use crate::error::{Error, Result};
use crate::knn::{KRule, SpatialIndex};
use crate::rng::{stream, Stream};
use crate::types::{
    ArmHistory, BanditConfig, ContextPoint, ExperimentTrace, Observation, TraceStep,
};

/// Index of the largest score; the lowest index wins ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// A frozen context-to-arm rule.
pub trait Policy: Sync {
    fn num_arms(&self) -> usize;

    /// Estimated mean reward of every arm at `x`.
    fn estimates(&self, x: &ContextPoint) -> Result<Vec<f64>>;

    fn choose(&self, x: &ContextPoint) -> Result<usize> {
        Ok(argmax(&self.estimates(x)?))
    }

    /// Decisions for many contexts, evaluated in parallel.
    fn choose_all(&self, xs: &[ContextPoint]) -> Result<Vec<usize>> {
        xs.par_iter().map(|x| self.choose(x)).collect()
    }
}

/// Always the same arm.
#[derive(Debug, Clone, Copy)]
pub struct ConstantPolicy {
    pub arm: usize,
    pub num_arms: usize,
}

impl Policy for ConstantPolicy {
    fn num_arms(&self) -> usize {
        self.num_arms
    }

    fn estimates(&self, _x: &ContextPoint) -> Result<Vec<f64>> {
        Ok((0..self.num_arms)
            .map(|a| if a == self.arm { 1.0 } else { 0.0 })
            .collect())
    }
}

/// Exploitation with per-arm k-NN estimates: `x -> argmax_i f_i(x)`.
#[derive(Debug, Clone)]
pub struct KnnPolicy {
    indexes: Vec<SpatialIndex>,
    k_rule: KRule,
}

impl KnnPolicy {
    pub fn new(indexes: Vec<SpatialIndex>, k_rule: KRule) -> Result<Self> {
        if indexes.iter().any(|ix| ix.is_empty()) {
            return Err(Error::InsufficientData { k: 1, n: 0 });
        }
        Ok(Self { indexes, k_rule })
    }

    pub fn from_histories(histories: &[ArmHistory], k_rule: KRule) -> Result<Self> {
        let indexes = histories
            .iter()
            .map(|h| {
                let (xs, ys): (Vec<ContextPoint>, Vec<f64>) = h
                    .observations()
                    .iter()
                    .map(|o| (o.context.clone(), o.reward))
                    .unzip();
                SpatialIndex::from_points(&xs, &ys)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(indexes, k_rule)
    }

    pub fn k_rule(&self) -> KRule {
        self.k_rule
    }

    pub fn indexes(&self) -> &[SpatialIndex] {
        &self.indexes
    }
}

impl Policy for KnnPolicy {
    fn num_arms(&self) -> usize {
        self.indexes.len()
    }

    fn estimates(&self, x: &ContextPoint) -> Result<Vec<f64>> {
        self.indexes
            .iter()
            .map(|ix| Ok(ix.knn_regress(x.coords(), self.k_rule.k_for(ix.len()))?.value))
            .collect()
    }
}

/// Per-arm histories with their spatial indexes and the step counter.
#[derive(Debug, Clone)]
pub struct PolicyState {
    pub config: BanditConfig,
    k_rule: KRule,
    histories: Vec<ArmHistory>,
    indexes: Vec<SpatialIndex>,
    step: u64,
}

impl PolicyState {
    pub fn new(config: BanditConfig) -> Self {
        let k_rule = KRule::Rate {
            dim: config.intrinsic_dim,
        };
        Self {
            histories: (0..config.num_arms).map(ArmHistory::new).collect(),
            indexes: (0..config.num_arms)
                .map(|_| SpatialIndex::new(config.context_dim))
                .collect(),
            config,
            k_rule,
            step: 0,
        }
    }

    /// Replaces the default `default_k(T_i, d)` rule.
    pub fn with_k_rule(mut self, k_rule: KRule) -> Self {
        self.k_rule = k_rule;
        self
    }

    pub fn k_rule(&self) -> KRule {
        self.k_rule
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn histories(&self) -> &[ArmHistory] {
        &self.histories
    }

    pub fn indexes(&self) -> &[SpatialIndex] {
        &self.indexes
    }

    pub fn pull_counts(&self) -> Vec<usize> {
        self.histories.iter().map(|h| h.pull_count()).collect()
    }

    /// Appends one observed reward; advances the step counter.
    pub fn record(&mut self, arm: usize, context: &ContextPoint, reward: f64) -> Result<()> {
        let num_arms = self.histories.len();
        let history = self
            .histories
            .get_mut(arm)
            .ok_or(Error::ArmOutOfRange { arm, num_arms })?;
        context.check_dim(self.config.context_dim)?;
        history.append_observation(Observation::new(context.clone(), reward, self.step)?)?;
        self.indexes[arm].push(context.coords(), reward)?;
        self.step += 1;
        Ok(())
    }

    /// Frozen exploitation policy over the current histories.
    pub fn frozen_policy(&self) -> Result<KnnPolicy> {
        KnnPolicy::from_histories(&self.histories, self.k_rule)
    }
}

fn trace_step(t: u64, round: &Round, arm: usize, reward: f64) -> TraceStep {
    TraceStep {
        t,
        context: round.context.clone(),
        arm,
        reward,
        mean_chosen: round.means[arm],
        mean_best: round.best_mean(),
    }
}

fn check_env<E: Environment + ?Sized>(env: &E, config: &BanditConfig) -> Result<()> {
    if env.num_arms() != config.num_arms {
        return Err(Error::InvalidConfig(format!(
            "environment has {} arms, config says {}",
            env.num_arms(),
            config.num_arms
        )));
    }
    if env.context_dim() != config.context_dim {
        return Err(Error::DimensionMismatch {
            expected: config.context_dim,
            got: env.context_dim(),
        });
    }
    Ok(())
}

/// Output of a uniform-sampling run.
#[derive(Debug, Clone)]
pub struct UniformRun {
    pub state: PolicyState,
    pub trace: ExperimentTrace,
}

impl UniformRun {
    /// k-NN exploitation policy, with `k = default_k(T_i, d)` unless fixed.
    pub fn knn_policy(&self, k: Option<usize>) -> Result<KnnPolicy> {
        let rule = match k {
            Some(k) => KRule::Fixed(k),
            None => self.state.k_rule,
        };
        KnnPolicy::from_histories(&self.state.histories, rule)
    }

    pub fn ridge_policy(&self, l2_alpha: f64) -> Result<RidgePolicy> {
        RidgePolicy::fit(&self.state.histories, l2_alpha)
    }
}

/// Block schedule: arm `i` is pulled at steps `i*m + 1 ..= (i+1)*m` with
/// `m = floor(T / K)`.
pub fn uniform_sampling_run<E: Environment + ?Sized>(
    env: &mut E,
    config: &BanditConfig,
) -> Result<UniformRun> {
    let (k, horizon) = (config.num_arms, config.horizon);
    if k == 0 || horizon < k {
        return Err(Error::InvalidConfig(format!(
            "uniform sampling needs T >= K, got T = {horizon}, K = {k}"
        )));
    }
    check_env(env, config)?;
    let per_arm = horizon / k;
    if per_arm * k != horizon {
        info!(
            "horizon {horizon} is not divisible by {k} arms; running {} steps",
            per_arm * k
        );
    }
    let mut state = PolicyState::new(config.clone());
    let mut trace = ExperimentTrace::new();
    for arm in 0..k {
        for _ in 0..per_arm {
            let round = env.next_round()?;
            let reward = env.observe(&round, arm)?;
            state.record(arm, &round.context, reward)?;
            trace.push(trace_step(state.step, &round, arm, reward))?;
        }
    }
    Ok(UniformRun { state, trace })
}

/// The exploration bonus for an arm with `n` observations:
/// `M1 * sqrt(ln n' * ln(n' K / delta)) * n^(-1/(2+d))`, `n' = max(n, 2)`.
pub fn ucb_width(n: usize, config: &BanditConfig) -> f64 {
    let n = n.max(1) as f64;
    let nl = n.max(2.0);
    let k = config.num_arms as f64;
    config.width_scale
        * (nl.ln() * (nl * k / config.delta).ln()).sqrt()
        * n.powf(-1.0 / (2.0 + config.intrinsic_dim as f64))
}

/// Estimate plus width for every arm at `x`.
pub fn ucb_scores(state: &PolicyState, x: &ContextPoint) -> Result<Vec<f64>> {
    let need = state.config.warmup;
    for (arm, h) in state.histories.iter().enumerate() {
        if h.pull_count() < need {
            return Err(Error::WarmupIncomplete {
                arm,
                have: h.pull_count(),
                need,
            });
        }
    }
    x.check_dim(state.config.context_dim)?;
    state
        .indexes
        .iter()
        .map(|ix| {
            let n = ix.len();
            let est = ix.knn_regress(x.coords(), state.k_rule.k_for(n))?;
            Ok(est.value + ucb_width(n, &state.config))
        })
        .collect()
}

/// One kNN-UCB decision at `x`. Does not modify the state.
pub fn knn_ucb_step(state: &PolicyState, x: &ContextPoint) -> Result<usize> {
    Ok(argmax(&ucb_scores(state, x)?))
}

/// Output of an online run.
#[derive(Debug, Clone)]
pub struct UcbRun {
    pub state: PolicyState,
    pub trace: ExperimentTrace,
}

/// Round-robin warmup of `M0` pulls per arm, then kNN-UCB.
pub fn run_knn_ucb<E: Environment + ?Sized>(env: &mut E, config: &BanditConfig) -> Result<UcbRun> {
    run_knn_ucb_with(env, PolicyState::new(config.clone()))
}

/// As [`run_knn_ucb`], starting from a prepared (empty) state, e.g. one
/// with a fixed k.
pub fn run_knn_ucb_with<E: Environment + ?Sized>(
    env: &mut E,
    mut state: PolicyState,
) -> Result<UcbRun> {
    let config = state.config.clone();
    config.validate()?;
    check_env(env, &config)?;
    let warm = (config.warmup * config.num_arms) as u64;
    let mut trace = ExperimentTrace::new();
    for t in 0..config.horizon as u64 {
        let round = env.next_round()?;
        let arm = if t < warm {
            (t % config.num_arms as u64) as usize
        } else {
            knn_ucb_step(&state, &round.context)?
        };
        let reward = env.observe(&round, arm)?;
        state.record(arm, &round.context, reward)?;
        trace.push(trace_step(t + 1, &round, arm, reward))?;
    }
    Ok(UcbRun { state, trace })
}

/// LinUCB run output.
#[derive(Debug, Clone)]
pub struct LinUcbRun {
    pub models: Vec<RidgeModel>,
    pub trace: ExperimentTrace,
}

impl LinUcbRun {
    pub fn policy(&self) -> RidgePolicy {
        RidgePolicy {
            models: self.models.clone(),
        }
    }
}

/// Disjoint LinUCB with the same round-robin warmup as kNN-UCB.
pub fn run_linucb<E: Environment + ?Sized>(
    env: &mut E,
    config: &BanditConfig,
    l2_alpha: f64,
    confidence: f64,
) -> Result<LinUcbRun> {
    config.validate()?;
    check_env(env, config)?;
    let mut models = (0..config.num_arms)
        .map(|_| RidgeModel::linucb_arm(config.context_dim, l2_alpha))
        .collect::<Result<Vec<_>>>()?;
    let warm = (config.warmup * config.num_arms) as u64;
    let mut trace = ExperimentTrace::new();
    for t in 0..config.horizon as u64 {
        let round = env.next_round()?;
        let arm = if t < warm {
            (t % config.num_arms as u64) as usize
        } else {
            linucb_decide(&models, &round.context, confidence)?
        };
        let reward = env.observe(&round, arm)?;
        models[arm].update(round.context.coords(), reward)?;
        trace.push(trace_step(t + 1, &round, arm, reward))?;
    }
    Ok(LinUcbRun { models, trace })
}

/// Arms drawn uniformly at random, independent of the context.
pub fn run_uniform_random<E: Environment + ?Sized>(
    env: &mut E,
    horizon: usize,
    seed: u64,
) -> Result<ExperimentTrace> {
    let k = env.num_arms();
    let mut rng = stream(seed, Stream::Policy);
    let mut trace = ExperimentTrace::new();
    for t in 0..horizon as u64 {
        let round = env.next_round()?;
        let arm = rng.random_range(0..k);
        let reward = env.observe(&round, arm)?;
        trace.push(trace_step(t + 1, &round, arm, reward))?;
    }
    Ok(trace)
}
