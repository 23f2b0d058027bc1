use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;

use super::config::{ExperimentConfig, Method, Source};
use crate::environments::{ClassificationEnv, Environment, Round, Scenario};
use crate::error::{Error, Result};
use crate::metrics::{
    average_regret, cumulative_regret, epsilon_optimality_gap, regret_exponent, top_arm_error,
    write_metrics_csv, MetricRow, RegretCurve,
};
use crate::policy::{
    run_knn_ucb_with, run_linucb, uniform_sampling_run, Policy, PolicyState,
};
use crate::topology::{hausdorff_distance, match_components, recover_regions, RegionEstimate};
use crate::types::{ContextPoint, ExperimentTrace};
use crate::KRule;

/// Everything produced by one seed.
pub struct SeedRun {
    pub seed: u64,
    pub trace: ExperimentTrace,
    pub curve: RegretCurve,
    pub metrics: Vec<MetricRow>,
    pub regions: Vec<RegionEstimate>,
}

enum Built {
    Scenario(Scenario),
    Dataset(ClassificationEnv),
}

impl Built {
    fn new(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        Ok(match &cfg.source {
            Source::Scenario { kind, context_dim } => {
                let s = if *context_dim == 2 {
                    Scenario::new(*kind, cfg.noise_sigma, seed)
                } else {
                    Scenario::manifold(*context_dim, cfg.noise_sigma, seed)?
                };
                Built::Scenario(s)
            }
            Source::Dataset {
                images,
                labels,
                limit,
            } => {
                let env = ClassificationEnv::load_idx(images, labels)?.shuffled(seed);
                Built::Dataset(match limit {
                    Some(n) => env.truncated(*n),
                    None => env,
                })
            }
        })
    }

    fn env(&self) -> Box<dyn Environment + Send> {
        match self {
            Built::Scenario(s) => Box::new(s.env()),
            Built::Dataset(d) => Box::new(d.clone()),
        }
    }
}

fn row(cfg: &ExperimentConfig, metric: &str, steps: usize, value: f64, seed: u64) -> MetricRow {
    MetricRow {
        metric: metric.to_string(),
        scenario: cfg.source.label(),
        method: cfg.method.name().to_string(),
        horizon: steps as u64,
        value,
        seed,
    }
}

/// Checkpoints `T/8, T/4, T/2, T` for the growth-exponent fit.
fn exponent_checkpoints(steps: usize) -> Vec<u64> {
    let t = steps as u64;
    [t / 8, t / 4, t / 2, t].into_iter().filter(|&c| c > 0).collect()
}

/// Runs one seed of the configured method and computes its metrics.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedRun> {
    let built = Built::new(cfg, seed)?;
    let mut env = built.env();
    let bandit = cfg.bandit(env.num_arms(), env.context_dim(), seed);
    bandit.validate()?;
    let k_rule = cfg.k.map(KRule::Fixed);
    let (trace, policy): (ExperimentTrace, Box<dyn Policy>) = match cfg.method {
        Method::KnnUniform | Method::RidgeUniform => {
            let run = uniform_sampling_run(env.as_mut(), &bandit)?;
            let policy: Box<dyn Policy> = if cfg.method == Method::KnnUniform {
                Box::new(run.knn_policy(cfg.k)?)
            } else {
                Box::new(run.ridge_policy(cfg.l2_alpha)?)
            };
            (run.trace, policy)
        }
        Method::KnnUcb => {
            let mut state = PolicyState::new(bandit);
            if let Some(rule) = k_rule {
                state = state.with_k_rule(rule);
            }
            let run = run_knn_ucb_with(env.as_mut(), state)?;
            let policy = run.state.frozen_policy()?;
            (run.trace, Box::new(policy))
        }
        Method::LinUcb => {
            let run = run_linucb(env.as_mut(), &bandit, cfg.l2_alpha, cfg.confidence)?;
            let policy = run.policy();
            (run.trace, Box::new(policy))
        }
    };
    let steps = trace.len();
    let curve = cumulative_regret(&trace)?;
    let mut metrics = vec![
        row(cfg, "regret", steps, curve.final_regret(), seed),
        row(cfg, "average_regret", steps, curve.final_regret() / steps as f64, seed),
    ];
    let fit = regret_exponent(&curve.sampled(&exponent_checkpoints(steps)))?;
    if !fit.degenerate {
        metrics.push(row(cfg, "regret_exponent", steps, fit.slope, seed));
    }

    let holdout: Vec<Round> = match &built {
        Built::Scenario(_) => env.holdout(cfg.test_size)?,
        Built::Dataset(_) => {
            let mut rest = env.holdout(usize::MAX)?;
            rest.truncate(cfg.test_size);
            rest
        }
    };
    if holdout.is_empty() {
        info!("seed {seed}: no holdout rounds left; skipping test metrics");
    } else {
        metrics.push(row(cfg, "test_regret", steps, average_regret(policy.as_ref(), &holdout)?, seed));
        metrics.push(row(cfg, "top_arm_error", steps, top_arm_error(policy.as_ref(), &holdout)?, seed));
        metrics.push(row(
            cfg,
            "epsilon_gap",
            steps,
            epsilon_optimality_gap(policy.as_ref(), &holdout)?,
            seed,
        ));
    }

    let mut regions = Vec::new();
    if let Some(radius) = cfg.topology_radius {
        let contexts: Vec<ContextPoint> = trace.steps.iter().map(|s| s.context.clone()).collect();
        for arm in 0..policy.num_arms() {
            let est = recover_regions(policy.as_ref(), &contexts, arm, radius)?;
            metrics.push(row(cfg, &format!("components_arm{}", arm + 1), steps, est.len() as f64, seed));
            if let Built::Scenario(s) = &built {
                if s.num_components(arm).is_some() && s.context_dim == 2 {
                    let d = region_distance(s, arm, &est, radius)?;
                    metrics.push(row(cfg, &format!("hausdorff_arm{}", arm + 1), steps, d, seed));
                }
            }
            regions.push(est);
        }
    }
    Ok(SeedRun {
        seed,
        trace,
        curve,
        metrics,
        regions,
    })
}

/// Worst Hausdorff distance over greedily matched components; infinite
/// when a true component has no recovered partner.
fn region_distance(s: &Scenario, arm: usize, est: &RegionEstimate, radius: f64) -> Result<f64> {
    let truth = s.component_samples(arm, radius / 4.0)?;
    let pairs = match_components(&est.components, truth.len(), |x| s.component_of(arm, x));
    if pairs.len() < truth.len() {
        return Ok(f64::INFINITY);
    }
    pairs.into_iter().try_fold(0.0f64, |worst, (q, p)| {
        Ok(worst.max(hausdorff_distance(&est.components[q], &truth[p])?))
    })
}

/// All seeds of a configuration, in parallel; results in seed order.
pub fn run_all(cfg: &ExperimentConfig) -> Result<Vec<SeedRun>> {
    cfg.seeds.par_iter().map(|&s| run_seed(cfg, s)).collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?))
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("cannot create {}: {e}", dir.display())))
    })
}

/// Writes traces, curves, regions, `metrics.csv` and `manifest.txt`.
/// Returns the written paths.
pub fn write_run(cfg: &ExperimentConfig, runs: &[SeedRun]) -> Result<Vec<PathBuf>> {
    let dir = &cfg.out_dir;
    prepare_dir(dir)?;
    let mut written = Vec::new();
    for r in runs {
        let p = dir.join(format!("trace_seed{}.csv", r.seed));
        r.trace.write_csv(create(&p)?)?;
        written.push(p);
        let p = dir.join(format!("regret_curve_seed{}.csv", r.seed));
        r.curve.write_csv(create(&p)?)?;
        written.push(p);
        for est in &r.regions {
            let p = dir.join(format!("regions_arm{}_seed{}.csv", est.arm + 1, r.seed));
            est.write_csv(create(&p)?)?;
            written.push(p);
        }
    }
    let p = dir.join("metrics.csv");
    let rows: Vec<MetricRow> = runs.iter().flat_map(|r| r.metrics.clone()).collect();
    write_metrics_csv(&rows, create(&p)?)?;
    written.push(p);
    let p = dir.join("manifest.txt");
    fs::write(&p, cfg.manifest_text())?;
    written.push(p);
    Ok(written)
}

/// Metrics where smaller is better decide the winner; anything else ties.
fn lower_is_better(metric: &str) -> bool {
    !metric.starts_with("components_arm")
}

/// One side-by-side line of a comparison.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub seed: u64,
    pub a: f64,
    pub b: f64,
    /// `a`, `b` or `tie`.
    pub winner: String,
}

pub struct Comparison {
    pub a: Vec<SeedRun>,
    pub b: Vec<SeedRun>,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    /// `wins_a_<metric>`, `wins_b_<metric>` and `ties_<metric>` counts.
    pub fn summary(&self) -> Vec<(String, f64)> {
        let mut metrics: Vec<&str> = self.rows.iter().map(|r| r.metric.as_str()).collect();
        metrics.dedup();
        metrics.sort_unstable();
        metrics.dedup();
        let mut out = Vec::new();
        for m in metrics {
            for (label, who) in [("wins_a", "a"), ("wins_b", "b"), ("ties", "tie")] {
                let n = self.rows.iter().filter(|r| r.metric == m && r.winner == who).count();
                out.push((format!("{label}_{m}"), n as f64));
            }
        }
        out
    }
}

/// Runs two configurations on the same contexts and seeds.
pub fn compare(a: &ExperimentConfig, b: &ExperimentConfig) -> Result<Comparison> {
    if a.source != b.source {
        return Err(Error::InvalidConfig(
            "compared configs must use the same scenario or dataset".into(),
        ));
    }
    if a.horizon != b.horizon || a.seeds != b.seeds {
        return Err(Error::InvalidConfig(format!(
            "compared configs must share horizon and seeds (T {} vs {}, seeds {:?} vs {:?})",
            a.horizon, b.horizon, a.seeds, b.seeds
        )));
    }
    let (ra, rb) = rayon::join(|| run_all(a), || run_all(b));
    let (ra, rb) = (ra?, rb?);
    let mut rows = Vec::new();
    for (x, y) in ra.iter().zip(&rb) {
        for ma in &x.metrics {
            let Some(mb) = y.metrics.iter().find(|m| m.metric == ma.metric) else {
                continue;
            };
            let winner = if ma.value == mb.value || !lower_is_better(&ma.metric) {
                "tie"
            } else if ma.value < mb.value {
                "a"
            } else {
                "b"
            };
            rows.push(ComparisonRow {
                metric: ma.metric.clone(),
                seed: x.seed,
                a: ma.value,
                b: mb.value,
                winner: winner.into(),
            });
        }
    }
    Ok(Comparison { a: ra, b: rb, rows })
}

/// Writes `comparison.csv`, the combined `metrics.csv`, and one manifest
/// per side into `a`'s output directory.
pub fn write_comparison(a: &ExperimentConfig, b: &ExperimentConfig, cmp: &Comparison) -> Result<Vec<PathBuf>> {
    let dir = &a.out_dir;
    prepare_dir(dir)?;
    let p_cmp = dir.join("comparison.csv");
    let mut w = csv::Writer::from_writer(create(&p_cmp)?);
    for r in &cmp.rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let p_metrics = dir.join("metrics.csv");
    let rows: Vec<MetricRow> = cmp
        .a
        .iter()
        .chain(&cmp.b)
        .flat_map(|r| r.metrics.clone())
        .collect();
    write_metrics_csv(&rows, create(&p_metrics)?)?;
    let (pa, pb) = (dir.join("manifest_a.txt"), dir.join("manifest_b.txt"));
    fs::write(&pa, a.manifest_text())?;
    fs::write(&pb, b.manifest_text())?;
    Ok(vec![p_cmp, p_metrics, pa, pb])
}

/// `METRIC<=VALUE` style assertion over report values.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub metric: String,
    pub op: String,
    pub value: f64,
}

impl std::str::FromStr for Check {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        for op in ["<=", ">=", "==", "<", ">"] {
            if let Some((m, v)) = s.split_once(op) {
                let value = v.trim().parse::<f64>().map_err(|_| {
                    Error::InvalidConfig(format!("check `{s}`: `{v}` is not a number"))
                })?;
                return Ok(Check {
                    metric: m.trim().to_string(),
                    op: op.to_string(),
                    value,
                });
            }
        }
        Err(Error::InvalidConfig(format!(
            "check `{s}` must look like METRIC<=VALUE (operators <=, >=, ==, <, >)"
        )))
    }
}

impl Check {
    pub fn holds(&self, x: f64) -> bool {
        match self.op.as_str() {
            "<=" => x <= self.value,
            ">=" => x >= self.value,
            "==" => x == self.value,
            "<" => x < self.value,
            _ => x > self.value,
        }
    }

    /// Evaluates against every `(metric, value)` pair with a matching name;
    /// all must hold. Returns the failing values, or an error if the metric
    /// never appears.
    pub fn failures(&self, values: &[(String, f64)]) -> Result<Vec<f64>> {
        let matching: Vec<f64> = values
            .iter()
            .filter(|(m, _)| *m == self.metric)
            .map(|(_, v)| *v)
            .collect();
        if matching.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "check refers to metric `{}`, which this run does not report",
                self.metric
            )));
        }
        Ok(matching.into_iter().filter(|&v| !self.holds(v)).collect())
    }
}
