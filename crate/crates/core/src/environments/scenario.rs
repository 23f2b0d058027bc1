use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Environment, Round};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};
use crate::types::ContextPoint;

const CENTER: [f64; 2] = [0.5, 0.5];
const BULLSEYE_RADII: [f64; 4] = [0.1, 0.2, 0.3, 0.4];
const EYES: [[f64; 2]; 2] = [[0.3, 0.7], [0.7, 0.7]];
const EYE_RADIUS: f64 = 0.1;
const MOUTH_CENTER: [f64; 2] = [0.5, 0.55];
const MOUTH_RADII: (f64, f64) = (0.35, 0.45);
const MOUTH_CUT_Y: f64 = 0.45;
const CURVE_AMPLITUDE: f64 = 0.05;
/// Default noise: equal to the gap between an arm's in-region and
/// out-of-region mean.
pub const DEFAULT_NOISE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioKind {
    Quintic,
    Smiley,
    Bullseye,
    /// A closed 1-d curve embedded in `[0,1]^D`.
    ManifoldCurve,
    /// Means linear in the context; a sanity case where LinUCB is well
    /// specified.
    Linear,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Quintic => "quintic",
            ScenarioKind::Smiley => "smiley",
            ScenarioKind::Bullseye => "bullseye",
            ScenarioKind::ManifoldCurve => "manifold-curve",
            ScenarioKind::Linear => "linear",
        }
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "quintic" => ScenarioKind::Quintic,
            "smiley" => ScenarioKind::Smiley,
            "bullseye" => ScenarioKind::Bullseye,
            "manifold-curve" | "manifold" => ScenarioKind::ManifoldCurve,
            "linear" => ScenarioKind::Linear,
            other => return Err(Error::InvalidConfig(format!("unknown scenario `{other}`"))),
        })
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A two-armed simulated world on the unit cube.
///
/// Region scenarios pay 1.0 for the arm whose region contains the context
/// and 0.5 for the other. Boundaries belong to arm 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub context_dim: usize,
    pub noise_sigma: f64,
    pub rng_seed: u64,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn quintic_boundary(x: f64) -> f64 {
    (0.5 + 1.8 * (x - 0.5).powi(5) * 16.0).clamp(0.0, 1.0)
}

/// Point of the embedded closed curve at parameter `s` in `[0, 1)`.
pub fn manifold_point(s: f64, ambient_dim: usize) -> Vec<f64> {
    let angle = 2.0 * PI * s;
    let mut x = Vec::with_capacity(ambient_dim);
    x.push(0.5 + 0.5 * angle.cos());
    x.push(0.5 + 0.5 * angle.sin());
    for j in 2..ambient_dim {
        let freq = (1 + (j - 2) % 3) as f64;
        let phase = 0.7 * j as f64;
        x.push(0.5 + CURVE_AMPLITUDE * (freq * angle + phase).sin());
    }
    x
}

impl Scenario {
    pub fn new(kind: ScenarioKind, noise_sigma: f64, rng_seed: u64) -> Self {
        let context_dim = match kind {
            ScenarioKind::ManifoldCurve => 10,
            _ => 2,
        };
        Self {
            kind,
            context_dim,
            noise_sigma,
            rng_seed,
        }
    }

    /// The curve scenario in an ambient space of `ambient_dim >= 2`.
    pub fn manifold(ambient_dim: usize, noise_sigma: f64, rng_seed: u64) -> Result<Self> {
        if ambient_dim < 2 {
            return Err(Error::InvalidConfig(format!(
                "manifold scenario needs ambient dimension >= 2, got {ambient_dim}"
            )));
        }
        Ok(Self {
            kind: ScenarioKind::ManifoldCurve,
            context_dim: ambient_dim,
            noise_sigma,
            rng_seed,
        })
    }

    pub fn num_arms(&self) -> usize {
        2
    }

    fn check_support(&self, x: &ContextPoint) -> Result<()> {
        x.check_dim(self.context_dim)?;
        if x.coords().iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::OutOfSupport(x.coords().to_vec()));
        }
        Ok(())
    }

    /// The arm whose region contains `x`.
    pub fn top_arm(&self, x: &ContextPoint) -> Result<usize> {
        self.check_support(x)?;
        let c = x.coords();
        let arm0 = match self.kind {
            ScenarioKind::Quintic => c[1] >= quintic_boundary(c[0]),
            ScenarioKind::Smiley => {
                let in_eye = EYES.iter().any(|e| dist(c, e) <= EYE_RADIUS);
                let r = dist(c, &MOUTH_CENTER);
                let in_mouth = (MOUTH_RADII.0..=MOUTH_RADII.1).contains(&r) && c[1] < MOUTH_CUT_Y;
                in_eye || in_mouth
            }
            ScenarioKind::Bullseye => {
                let r = dist(c, &CENTER);
                let [r1, r2, r3, r4] = BULLSEYE_RADII;
                !((r > r1 && r < r2) || (r > r3 && r < r4))
            }
            ScenarioKind::ManifoldCurve => {
                let s = (c[1] - 0.5).atan2(c[0] - 0.5).rem_euclid(2.0 * PI) / (2.0 * PI);
                ((4.0 * s).floor() as i64) % 2 == 0
            }
            ScenarioKind::Linear => c[0] >= 0.5,
        };
        Ok(if arm0 { 0 } else { 1 })
    }

    pub fn means(&self, x: &ContextPoint) -> Result<Vec<f64>> {
        if self.kind == ScenarioKind::Linear {
            self.check_support(x)?;
            let u = x.coords()[0];
            return Ok(vec![0.5 + 0.5 * u, 1.0 - 0.5 * u]);
        }
        let top = self.top_arm(x)?;
        Ok((0..2).map(|a| if a == top { 1.0 } else { 0.5 }).collect())
    }

    pub fn mean_reward(&self, arm: usize, x: &ContextPoint) -> Result<f64> {
        if arm >= self.num_arms() {
            return Err(Error::ArmOutOfRange { arm, num_arms: 2 });
        }
        Ok(self.means(x)?[arm])
    }

    pub fn round(&self, x: ContextPoint) -> Result<Round> {
        let means = self.means(&x)?;
        Ok(Round { context: x, means })
    }

    fn draw_context(&self, rng: &mut ChaCha8Rng) -> ContextPoint {
        let coords = match self.kind {
            ScenarioKind::ManifoldCurve => manifold_point(rng.random::<f64>(), self.context_dim),
            _ => (0..self.context_dim).map(|_| rng.random::<f64>()).collect(),
        };
        ContextPoint::new(coords).expect("sampled contexts are finite")
    }

    /// Number of maximal connected regions where `arm` is top.
    pub fn num_components(&self, arm: usize) -> Option<usize> {
        match (self.kind, arm) {
            (ScenarioKind::Bullseye, 0) => Some(3),
            (ScenarioKind::Bullseye, 1) => Some(2),
            (ScenarioKind::Smiley, 0) => Some(3),
            (ScenarioKind::Smiley, 1) => Some(1),
            (ScenarioKind::Quintic | ScenarioKind::Linear, 0 | 1) => Some(1),
            (ScenarioKind::ManifoldCurve, 0 | 1) => Some(2),
            _ => None,
        }
    }

    /// Which true component of arm `arm`'s region contains `x`, if any.
    pub fn component_of(&self, arm: usize, x: &ContextPoint) -> Option<usize> {
        if self.top_arm(x).ok()? != arm {
            return None;
        }
        let c = x.coords();
        Some(match self.kind {
            ScenarioKind::Bullseye => {
                let r = dist(c, &CENTER);
                let [r1, _, r3, _] = BULLSEYE_RADII;
                match arm {
                    0 if r <= r1 => 0,
                    0 if r <= r3 => 1,
                    0 => 2,
                    _ if r < r3 => 0,
                    _ => 1,
                }
            }
            ScenarioKind::Smiley if arm == 0 => {
                EYES.iter().position(|e| dist(c, e) <= EYE_RADIUS).unwrap_or(2)
            }
            ScenarioKind::ManifoldCurve => {
                let s = (c[1] - 0.5).atan2(c[0] - 0.5).rem_euclid(2.0 * PI) / (2.0 * PI);
                ((4.0 * s).floor() as usize / 2).min(1)
            }
            _ => 0,
        })
    }

    /// Smallest distance between two distinct components of the same arm,
    /// where known in closed form.
    pub fn component_gap(&self) -> Option<f64> {
        match self.kind {
            ScenarioKind::Bullseye => Some(BULLSEYE_RADII[1] - BULLSEYE_RADII[0]),
            _ => None,
        }
    }

    /// Dense grid samples (spacing `step`) of each true component of `arm`.
    /// Planar scenarios only.
    pub fn component_samples(&self, arm: usize, step: f64) -> Result<Vec<Vec<ContextPoint>>> {
        if self.context_dim != 2 || self.kind == ScenarioKind::ManifoldCurve {
            return Err(Error::InvalidConfig(
                "component samples exist only for planar scenarios".into(),
            ));
        }
        let count = self
            .num_components(arm)
            .ok_or(Error::ArmOutOfRange { arm, num_arms: 2 })?;
        if !(step > 0.0) {
            return Err(Error::InvalidValue(format!("grid step {step} must be positive")));
        }
        let n = (1.0 / step).ceil() as usize + 1;
        let mut out = vec![Vec::new(); count];
        for i in 0..n {
            for j in 0..n {
                let x = ContextPoint::new(vec![
                    (i as f64 * step).min(1.0),
                    (j as f64 * step).min(1.0),
                ])?;
                if let Some(c) = self.component_of(arm, &x) {
                    out[c].push(x);
                }
            }
        }
        Ok(out)
    }

    pub fn env(&self) -> ScenarioEnv {
        ScenarioEnv::new(self.clone())
    }
}

/// A scenario bound to its seeded context, noise and holdout streams.
#[derive(Debug, Clone)]
pub struct ScenarioEnv {
    scenario: Scenario,
    contexts: ChaCha8Rng,
    noise: ChaCha8Rng,
    test: ChaCha8Rng,
}

impl ScenarioEnv {
    pub fn new(scenario: Scenario) -> Self {
        let seed = scenario.rng_seed;
        Self {
            scenario,
            contexts: stream(seed, Stream::Contexts),
            noise: stream(seed, Stream::Noise),
            test: stream(seed, Stream::Test),
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// Draws a context and a noisy reward for `arm` at it.
    pub fn sample_step(&mut self, arm: usize) -> Result<(ContextPoint, f64)> {
        let round = self.next_round()?;
        let reward = self.observe(&round, arm)?;
        Ok((round.context, reward))
    }

    /// Next context from the context stream alone.
    pub fn next_context(&mut self) -> ContextPoint {
        self.scenario.draw_context(&mut self.contexts)
    }
}

impl Environment for ScenarioEnv {
    fn num_arms(&self) -> usize {
        self.scenario.num_arms()
    }

    fn context_dim(&self) -> usize {
        self.scenario.context_dim
    }

    fn next_round(&mut self) -> Result<Round> {
        let x = self.scenario.draw_context(&mut self.contexts);
        self.scenario.round(x)
    }

    fn observe(&mut self, round: &Round, arm: usize) -> Result<f64> {
        let mean = *round.means.get(arm).ok_or(Error::ArmOutOfRange {
            arm,
            num_arms: round.means.len(),
        })?;
        let z: f64 = StandardNormal.sample(&mut self.noise);
        Ok(mean + self.scenario.noise_sigma * z)
    }

    fn holdout(&mut self, count: usize) -> Result<Vec<Round>> {
        (0..count)
            .map(|_| {
                let x = self.scenario.draw_context(&mut self.test);
                self.scenario.round(x)
            })
            .collect()
    }
}
