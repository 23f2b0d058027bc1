//! Shared domain types: contexts, observations, per-arm histories, run
//! configuration and the experiment trace.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the context space. Always non-empty and finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ContextPoint(Vec<f64>);

impl ContextPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidValue("context must have at least one coordinate".into()));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidValue(format!("non-finite context coordinate {bad}")));
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: self.dim(),
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for ContextPoint {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ContextPoint> for Vec<f64> {
    fn from(p: ContextPoint) -> Self {
        p.0
    }
}

impl AsRef<[f64]> for ContextPoint {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub context: ContextPoint,
    pub reward: f64,
    pub time: u64,
}

impl Observation {
    pub fn new(context: ContextPoint, reward: f64, time: u64) -> Result<Self> {
        if !reward.is_finite() {
            return Err(Error::InvalidValue(format!("non-finite reward {reward}")));
        }
        Ok(Self {
            context,
            reward,
            time,
        })
    }
}

/// Append-only record of everything observed for one arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmHistory {
    pub arm: usize,
    observations: Vec<Observation>,
}

impl ArmHistory {
    pub fn new(arm: usize) -> Self {
        Self {
            arm,
            observations: Vec::new(),
        }
    }

    /// Appends `obs`, rejecting a context whose dimension differs from the
    /// entries already stored or a time that does not move forward.
    pub fn append_observation(&mut self, obs: Observation) -> Result<()> {
        if let Some(last) = self.observations.last() {
            obs.context.check_dim(last.context.dim())?;
            if obs.time <= last.time {
                return Err(Error::InvalidValue(format!(
                    "observation time {} does not follow {}",
                    obs.time, last.time
                )));
            }
        }
        self.observations.push(obs);
        Ok(())
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    /// T_i(t): the number of pulls recorded so far.
    pub fn pull_count(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.observations.first().map(|o| o.context.dim())
    }
}

/// Parameters shared by every sampling strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditConfig {
    pub num_arms: usize,
    pub context_dim: usize,
    /// Dimension used by the k rule and the confidence width; defaults to
    /// `context_dim`.
    pub intrinsic_dim: usize,
    /// M0: round-robin pulls per arm before the UCB rule takes over.
    pub warmup: usize,
    /// M1: scale of the confidence width.
    pub width_scale: f64,
    pub delta: f64,
    pub horizon: usize,
    pub rng_seed: u64,
}

impl BanditConfig {
    pub const DEFAULT_WARMUP: usize = 25;
    pub const DEFAULT_WIDTH_SCALE: f64 = 1.0;
    pub const DEFAULT_DELTA: f64 = 0.1;

    pub fn new(num_arms: usize, context_dim: usize, horizon: usize) -> Self {
        Self {
            num_arms,
            context_dim,
            intrinsic_dim: context_dim,
            warmup: Self::DEFAULT_WARMUP,
            width_scale: Self::DEFAULT_WIDTH_SCALE,
            delta: Self::DEFAULT_DELTA,
            horizon,
            rng_seed: 0,
        }
    }

    pub fn with_intrinsic_dim(mut self, d: usize) -> Self {
        self.intrinsic_dim = d;
        self
    }

    pub fn with_warmup(mut self, m0: usize) -> Self {
        self.warmup = m0;
        self
    }

    pub fn with_width_scale(mut self, m1: f64) -> Self {
        self.width_scale = m1;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_arms == 0 {
            return bad("num_arms must be positive".into());
        }
        if self.context_dim == 0 {
            return bad("context_dim must be positive".into());
        }
        if self.intrinsic_dim == 0 || self.intrinsic_dim > self.context_dim {
            return bad(format!(
                "intrinsic_dim {} must lie in [1, {}]",
                self.intrinsic_dim, self.context_dim
            ));
        }
        if self.warmup == 0 {
            return bad("warmup must be positive".into());
        }
        if !(self.width_scale > 0.0 && self.width_scale.is_finite()) {
            return bad(format!("width_scale {} must be positive", self.width_scale));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta {} must lie in (0, 1)", self.delta));
        }
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        if self.warmup * self.num_arms > self.horizon {
            return bad(format!(
                "warmup {} x {} arms exceeds horizon {}",
                self.warmup, self.num_arms, self.horizon
            ));
        }
        Ok(())
    }
}

/// One decision of a run. `t` counts from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub t: u64,
    pub context: ContextPoint,
    pub arm: usize,
    pub reward: f64,
    pub mean_chosen: f64,
    pub mean_best: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTrace {
    pub steps: Vec<TraceStep>,
}

impl ExperimentTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, step: TraceStep) -> Result<()> {
        if step.mean_best < step.mean_chosen {
            return Err(Error::InvalidValue(format!(
                "step {}: best mean {} below chosen mean {}",
                step.t, step.mean_best, step.mean_chosen
            )));
        }
        if let Some(last) = self.steps.last() {
            if step.t <= last.t {
                return Err(Error::InvalidValue(format!(
                    "trace time {} does not follow {}",
                    step.t, last.t
                )));
            }
        }
        self.steps.push(step);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn context_dim(&self) -> Option<usize> {
        self.steps.first().map(|s| s.context.dim())
    }

    /// Writes `t,x1..xD,arm,reward,mean_chosen,mean_best`; arms are printed
    /// 1-indexed.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let dim = self.context_dim().unwrap_or(0);
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=dim).map(|j| format!("x{j}")));
        header.extend(["arm", "reward", "mean_chosen", "mean_best"].map(String::from));
        w.write_record(&header)?;
        for s in &self.steps {
            let mut rec = Vec::with_capacity(dim + 5);
            rec.push(s.t.to_string());
            rec.extend(s.context.coords().iter().map(|c| c.to_string()));
            rec.push((s.arm + 1).to_string());
            rec.push(s.reward.to_string());
            rec.push(s.mean_chosen.to_string());
            rec.push(s.mean_best.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let cols: Vec<&str> = header.iter().collect();
        let find = |name: &str| cols.iter().position(|c| *c == name);
        let parse_err = |what: &str, row: usize| {
            Error::InvalidValue(format!("trace row {row}: cannot parse {what}"))
        };
        let t_col = find("t").ok_or_else(|| Error::InvalidValue("trace missing `t` column".into()))?;
        let arm_col =
            find("arm").ok_or_else(|| Error::InvalidValue("trace missing `arm` column".into()))?;
        let reward_col = find("reward")
            .ok_or_else(|| Error::InvalidValue("trace missing `reward` column".into()))?;
        let chosen_col = find("mean_chosen");
        let best_col = find("mean_best");
        let ctx_cols: Vec<usize> = (0..cols.len())
            .filter(|&i| cols[i].starts_with('x') && cols[i][1..].parse::<usize>().is_ok())
            .collect();

        let mut trace = Self::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let num = |i: usize, what: &str| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| parse_err(what, row))
            };
            let t: u64 = rec
                .get(t_col)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| parse_err("t", row))?;
            let arm: usize = rec
                .get(arm_col)
                .and_then(|s| s.parse().ok())
                .filter(|&a: &usize| a >= 1)
                .ok_or_else(|| parse_err("arm", row))?;
            let mean = |col: Option<usize>| -> Result<f64> {
                col.and_then(|i| rec.get(i))
                    .filter(|s| !s.is_empty())
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or(Error::MissingMeans(t))
            };
            let coords = ctx_cols
                .iter()
                .map(|&i| num(i, "context"))
                .collect::<Result<Vec<_>>>()?;
            trace.push(TraceStep {
                t,
                context: ContextPoint::new(coords)?,
                arm: arm - 1,
                reward: num(reward_col, "reward")?,
                mean_chosen: mean(chosen_col)?,
                mean_best: mean(best_col)?,
            })?;
        }
        Ok(trace)
    }
}
