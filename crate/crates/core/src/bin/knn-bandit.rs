use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use knn_bandit::experiment::fetch::{fetch_idx, DEFAULT_MNIST_URL, MNIST_FILES};
use knn_bandit::experiment::{
    compare, read_pairs, run_all, write_comparison, write_run, Check, ExperimentConfig,
};
use knn_bandit::Error;

#[derive(Parser)]
#[command(name = "knn-bandit", version, about = "Nonparametric contextual bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method over one or more seeds and write reports.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        checks: Checks,
    },
    /// Run two methods on identical context streams and compare per seed.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Method of the first side.
        #[arg(long)]
        method_a: Option<String>,
        /// Method of the second side.
        #[arg(long)]
        method_b: Option<String>,
        /// Extra config file for the first side (overrides --config).
        #[arg(long)]
        config_a: Option<PathBuf>,
        /// Extra config file for the second side (overrides --config).
        #[arg(long)]
        config_b: Option<PathBuf>,
        #[command(flatten)]
        checks: Checks,
    },
    /// Uniform sampling followed by region recovery at radius R.
    Topology {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        checks: Checks,
    },
    /// Dataset utilities.
    Dataset {
        #[command(subcommand)]
        action: DatasetAction,
    },
}

#[derive(Subcommand)]
enum DatasetAction {
    /// Download MNIST IDX files and verify their lengths.
    Fetch {
        #[arg(long, default_value = DEFAULT_MNIST_URL)]
        url: String,
        #[arg(long, default_value = "data/mnist")]
        dest: PathBuf,
        /// Also fetch the 10k test split.
        #[arg(long)]
        with_test: bool,
    },
}

#[derive(Args)]
struct Checks {
    /// Assertion such as `regret<=2000`; exit status 3 if any fails.
    #[arg(long = "check", value_name = "METRIC<=VALUE")]
    checks: Vec<String>,
}

/// Flags mirror the config-file keys; any flag given wins over the file.
#[derive(Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
    /// Directory holding an IDX image/label pair.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    images: Option<String>,
    #[arg(long)]
    labels: Option<String>,
    #[arg(long)]
    dataset_limit: Option<String>,
    #[arg(long)]
    context_dim: Option<String>,
    #[arg(long)]
    method: Option<String>,
    /// Horizon.
    #[arg(long = "T")]
    horizon: Option<String>,
    #[arg(long)]
    warmup: Option<String>,
    /// Width scale of the exploration bonus.
    #[arg(long = "M1")]
    width_scale: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    /// Intrinsic dimension used in the width rate.
    #[arg(long = "d")]
    intrinsic_dim: Option<String>,
    /// Fixed neighbour count (default grows with the sample size).
    #[arg(long)]
    k: Option<String>,
    /// Region-recovery radius.
    #[arg(long = "R")]
    topology_radius: Option<String>,
    #[arg(long)]
    noise_sigma: Option<String>,
    #[arg(long)]
    l2_alpha: Option<String>,
    #[arg(long)]
    confidence: Option<String>,
    #[arg(long)]
    test_size: Option<String>,
    /// Seed; repeat or comma-separate for several.
    #[arg(long = "seed", alias = "seeds")]
    seeds: Vec<String>,
    /// Output directory (default: $KNN_BANDIT_OUT, else `out`).
    #[arg(long)]
    out: Option<String>,
}

impl Common {
    fn flag_pairs(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let fields = [
            ("scenario", &self.scenario),
            ("dataset", &self.dataset),
            ("images", &self.images),
            ("labels", &self.labels),
            ("dataset_limit", &self.dataset_limit),
            ("context_dim", &self.context_dim),
            ("method", &self.method),
            ("horizon", &self.horizon),
            ("warmup", &self.warmup),
            ("width_scale", &self.width_scale),
            ("delta", &self.delta),
            ("intrinsic_dim", &self.intrinsic_dim),
            ("k", &self.k),
            ("topology_radius", &self.topology_radius),
            ("noise_sigma", &self.noise_sigma),
            ("l2_alpha", &self.l2_alpha),
            ("confidence", &self.confidence),
            ("test_size", &self.test_size),
            ("out_dir", &self.out),
        ];
        for (key, v) in fields {
            if let Some(v) = v {
                m.insert(key.to_string(), v.clone());
            }
        }
        if !self.seeds.is_empty() {
            m.insert("seeds".into(), self.seeds.join(","));
        }
        m
    }

    fn file_pairs(&self) -> Result<BTreeMap<String, String>, Error> {
        self.config.as_deref().map_or(Ok(BTreeMap::new()), read_pairs)
    }
}

/// A flag naming the source replaces whatever source the file chose.
fn overlay(base: &mut BTreeMap<String, String>, top: BTreeMap<String, String>) {
    let sources = ["scenario", "dataset", "images", "labels"];
    if top.keys().any(|k| sources.contains(&k.as_str())) {
        base.retain(|k, _| !sources.contains(&k.as_str()) && k != "context_dim");
    }
    base.extend(top);
}

enum Failure {
    Config(String),
    Data(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) | Error::InvalidValue(_) => Failure::Config(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

fn parse_checks(checks: &Checks) -> Result<Vec<Check>, Failure> {
    Ok(checks
        .checks
        .iter()
        .map(|c| c.parse::<Check>())
        .collect::<Result<_, _>>()?)
}

fn evaluate(checks: &[Check], values: &[(String, f64)]) -> Result<(), Failure> {
    let mut failed = Vec::new();
    for c in checks {
        let bad = c.failures(values)?;
        if bad.is_empty() {
            println!("check {}{}{}: ok", c.metric, c.op, c.value);
        } else {
            failed.push(format!("{}{}{} (violating values {:?})", c.metric, c.op, c.value, bad));
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(failed.join("; ")))
    }
}

fn run_command(common: &Common, checks: &Checks, topology: bool) -> Result<(), Failure> {
    let checks = parse_checks(checks)?;
    let mut pairs = common.file_pairs()?;
    overlay(&mut pairs, common.flag_pairs());
    if topology {
        if !pairs.contains_key("topology_radius") {
            return Err(Failure::Config("topology needs a radius (--R)".into()));
        }
        pairs.entry("method".into()).or_insert_with(|| "knn-uniform".into());
    }
    let cfg = ExperimentConfig::from_pairs(&pairs)?;
    let runs = run_all(&cfg)?;
    for p in write_run(&cfg, &runs)? {
        println!("wrote {}", p.display());
    }
    for r in &runs {
        for m in &r.metrics {
            println!("seed {} {} = {}", r.seed, m.metric, m.value);
        }
    }
    let values: Vec<(String, f64)> = runs
        .iter()
        .flat_map(|r| r.metrics.iter().map(|m| (m.metric.clone(), m.value)))
        .collect();
    evaluate(&checks, &values)
}

#[allow(clippy::too_many_arguments)]
fn compare_command(
    common: &Common,
    method_a: &Option<String>,
    method_b: &Option<String>,
    config_a: &Option<PathBuf>,
    config_b: &Option<PathBuf>,
    checks: &Checks,
) -> Result<(), Failure> {
    let checks = parse_checks(checks)?;
    let side = |file: &Option<PathBuf>, method: &Option<String>| -> Result<ExperimentConfig, Failure> {
        let mut pairs = common.file_pairs()?;
        if let Some(f) = file {
            overlay(&mut pairs, read_pairs(f)?);
        }
        overlay(&mut pairs, common.flag_pairs());
        if let Some(m) = method {
            pairs.insert("method".into(), m.clone());
        }
        Ok(ExperimentConfig::from_pairs(&pairs)?)
    };
    let (a, b) = (side(config_a, method_a)?, side(config_b, method_b)?);
    let cmp = compare(&a, &b)?;
    for p in write_comparison(&a, &b, &cmp)? {
        println!("wrote {}", p.display());
    }
    println!("a = {}, b = {}", a.method, b.method);
    for r in &cmp.rows {
        println!("seed {} {}: a {} b {} -> {}", r.seed, r.metric, r.a, r.b, r.winner);
    }
    let summary = cmp.summary();
    for (name, v) in &summary {
        if name.ends_with("_regret") && !name.contains("exponent") {
            println!("{name} = {v}");
        }
    }
    evaluate(&checks, &summary)
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { common, checks } => run_command(&common, &checks, false),
        Command::Topology { common, checks } => run_command(&common, &checks, true),
        Command::Compare {
            common,
            method_a,
            method_b,
            config_a,
            config_b,
            checks,
        } => compare_command(&common, &method_a, &method_b, &config_a, &config_b, &checks),
        Command::Dataset {
            action: DatasetAction::Fetch {
                url,
                dest,
                with_test,
            },
        } => {
            let pairs = if with_test { &MNIST_FILES[..] } else { &MNIST_FILES[..1] };
            for (images, _, n) in fetch_idx(&url, &dest, pairs)? {
                println!("{}: {n} items verified", images.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Check(m)) => {
            eprintln!("check failed: {m}");
            ExitCode::from(3)
        }
    }
}
