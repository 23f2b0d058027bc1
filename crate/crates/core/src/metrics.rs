//! Regret, top-arm error and ε-optimality.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environments::{Round, Scenario};
use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::types::{ContextPoint, ExperimentTrace};

/// `(t, R_t)` pairs starting at `(0, 0)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegretCurve {
    pub checkpoints: Vec<(u64, f64)>,
}

impl RegretCurve {
    pub fn final_regret(&self) -> f64 {
        self.checkpoints.last().map_or(0.0, |c| c.1)
    }

    /// Regret at the last checkpoint not after `t`.
    pub fn at(&self, t: u64) -> f64 {
        let i = self.checkpoints.partition_point(|c| c.0 <= t);
        if i == 0 {
            0.0
        } else {
            self.checkpoints[i - 1].1
        }
    }

    /// The curve restricted to the given times.
    pub fn sampled(&self, times: &[u64]) -> RegretCurve {
        RegretCurve {
            checkpoints: times.iter().map(|&t| (t, self.at(t))).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "cumulative_regret"])?;
        for (t, r) in &self.checkpoints {
            w.write_record([t.to_string(), r.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `R_T = sum_t (mean_best - mean_chosen)` at every step.
pub fn cumulative_regret(trace: &ExperimentTrace) -> Result<RegretCurve> {
    let mut checkpoints = Vec::with_capacity(trace.len() + 1);
    checkpoints.push((0, 0.0));
    let mut total = 0.0;
    for s in &trace.steps {
        if !(s.mean_best.is_finite() && s.mean_chosen.is_finite()) {
            return Err(Error::MissingMeans(s.t));
        }
        total += s.mean_best - s.mean_chosen;
        checkpoints.push((s.t, total));
    }
    Ok(RegretCurve { checkpoints })
}

fn decisions<P: Policy + ?Sized>(policy: &P, rounds: &[Round]) -> Result<Vec<usize>> {
    if rounds.is_empty() {
        return Err(Error::EmptySet);
    }
    rounds.par_iter().map(|r| policy.choose(&r.context)).collect()
}

/// Fraction of rounds where the policy's arm is not the true top arm.
pub fn top_arm_error<P: Policy + ?Sized>(policy: &P, rounds: &[Round]) -> Result<f64> {
    let chosen = decisions(policy, rounds)?;
    let wrong = rounds
        .iter()
        .zip(&chosen)
        .filter(|(r, &a)| a != r.top_arm())
        .count();
    Ok(wrong as f64 / rounds.len() as f64)
}

/// Largest true-mean gap of the policy's choice over the rounds.
pub fn epsilon_optimality_gap<P: Policy + ?Sized>(policy: &P, rounds: &[Round]) -> Result<f64> {
    let chosen = decisions(policy, rounds)?;
    Ok(rounds
        .iter()
        .zip(&chosen)
        .map(|(r, &a)| r.best_mean() - r.means[a])
        .fold(0.0, f64::max))
}

/// Mean per-step regret of a frozen policy over held-out rounds.
pub fn average_regret<P: Policy + ?Sized>(policy: &P, rounds: &[Round]) -> Result<f64> {
    let chosen = decisions(policy, rounds)?;
    let total: f64 = rounds
        .iter()
        .zip(&chosen)
        .map(|(r, &a)| r.best_mean() - r.means[a])
        .sum();
    Ok(total / rounds.len() as f64)
}

/// Rounds of a scenario at the given contexts.
pub fn scenario_rounds(scenario: &Scenario, contexts: &[ContextPoint]) -> Result<Vec<Round>> {
    contexts.iter().map(|x| scenario.round(x.clone())).collect()
}

/// Least-squares slope of `log R_t` against `log t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentFit {
    pub slope: f64,
    /// Checkpoints with positive regret that entered the fit.
    pub used: usize,
    /// Fewer than two usable checkpoints; `slope` is 0.
    pub degenerate: bool,
}

pub fn regret_exponent(curve: &RegretCurve) -> Result<ExponentFit> {
    let pts: Vec<(f64, f64)> = curve
        .checkpoints
        .iter()
        .filter(|c| c.0 > 0)
        .map(|&(t, r)| (t as f64, r))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InvalidValue(format!(
            "regret exponent needs at least 3 checkpoints, got {}",
            pts.len()
        )));
    }
    let logs: Vec<(f64, f64)> = pts
        .iter()
        .filter(|p| p.1 > 0.0)
        .map(|&(t, r)| (t.ln(), r.ln()))
        .collect();
    if logs.len() < 2 {
        return Ok(ExponentFit {
            slope: 0.0,
            used: logs.len(),
            degenerate: true,
        });
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(ExponentFit {
        slope: sxy / sxx,
        used: logs.len(),
        degenerate: false,
    })
}

/// One row of a metrics report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: String,
    pub scenario: String,
    pub method: String,
    #[serde(rename = "T")]
    pub horizon: u64,
    pub value: f64,
    pub seed: u64,
}

pub fn write_metrics_csv<W: Write>(rows: &[MetricRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv<R: std::io::Read>(input: R) -> Result<Vec<MetricRow>> {
    let mut rd = csv::Reader::from_reader(input);
    Ok(rd.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::{Environment, ScenarioKind};
    use crate::policy::ConstantPolicy;
    use crate::types::TraceStep;
    use approx::assert_abs_diff_eq;

    fn step(t: u64, chosen: f64, best: f64) -> TraceStep {
        TraceStep {
            t,
            context: ContextPoint::new(vec![0.0]).unwrap(),
            arm: 0,
            reward: chosen,
            mean_chosen: chosen,
            mean_best: best,
        }
    }

    #[test]
    fn regret_counts_gaps() {
        let mut tr = ExperimentTrace::new();
        for t in 1..=10 {
            let chosen = if t % 3 == 0 { 0.5 } else { 1.0 };
            tr.push(step(t, chosen, 1.0)).unwrap();
        }
        let c = cumulative_regret(&tr).unwrap();
        assert_eq!(c.final_regret(), 0.5 * 3.0);
        assert_eq!(c.checkpoints[0], (0, 0.0));
        assert!(c.checkpoints.windows(2).all(|w| w[1].1 >= w[0].1));
        assert_eq!(c.at(5), 0.5);
    }

    #[test]
    fn exponent_of_power_laws() {
        let lin = RegretCurve {
            checkpoints: (1..=6).map(|i| (i * 1000, (i * 1000) as f64)).collect(),
        };
        assert_abs_diff_eq!(regret_exponent(&lin).unwrap().slope, 1.0, epsilon = 1e-9);
        let p = RegretCurve {
            checkpoints: [5000u64, 10000, 20000, 40000]
                .iter()
                .map(|&t| (t, (t as f64).powf(0.75)))
                .collect(),
        };
        assert_abs_diff_eq!(regret_exponent(&p).unwrap().slope, 0.75, epsilon = 1e-6);
    }

    #[test]
    fn exponent_edge_cases() {
        let zero = RegretCurve {
            checkpoints: vec![(1, 0.0), (2, 0.0), (3, 0.0)],
        };
        let fit = regret_exponent(&zero).unwrap();
        assert!(fit.degenerate && fit.slope == 0.0);
        let mixed = RegretCurve {
            checkpoints: vec![(1, 0.0), (10, 10.0), (100, 100.0)],
        };
        let fit = regret_exponent(&mixed).unwrap();
        assert_eq!(fit.used, 2);
        assert_abs_diff_eq!(fit.slope, 1.0, epsilon = 1e-12);
        let short = RegretCurve {
            checkpoints: vec![(1, 1.0), (2, 2.0)],
        };
        assert!(regret_exponent(&short).is_err());
    }

    #[test]
    fn error_and_gap_for_fixed_policies() {
        let s = Scenario::new(ScenarioKind::Bullseye, 0.5, 2);
        let rounds = s.env().holdout(2000).unwrap();
        let always0 = ConstantPolicy { arm: 0, num_arms: 2 };
        let err = top_arm_error(&always0, &rounds).unwrap();
        let frac1 = rounds.iter().filter(|r| r.top_arm() == 1).count() as f64 / 2000.0;
        assert_eq!(err, frac1);
        assert_eq!(epsilon_optimality_gap(&always0, &rounds).unwrap(), 0.5);
        assert_abs_diff_eq!(average_regret(&always0, &rounds).unwrap(), 0.5 * frac1, epsilon = 1e-12);
        assert!(top_arm_error(&always0, &[]).is_err());
    }

    #[test]
    fn metrics_csv_round_trip() {
        let rows = vec![MetricRow {
            metric: "regret".into(),
            scenario: "bullseye".into(),
            method: "knn-ucb".into(),
            horizon: 50000,
            value: 12.5,
            seed: 7,
        }];
        let mut buf = Vec::new();
        write_metrics_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text, "metric,scenario,method,T,value,seed\nregret,bullseye,knn-ucb,50000,12.5,7\n");
        assert_eq!(read_metrics_csv(&buf[..]).unwrap(), rows);
    }
}
