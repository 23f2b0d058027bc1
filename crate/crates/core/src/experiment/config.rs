use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::environments::ScenarioKind;
use crate::error::{Error, Result};
use crate::types::BanditConfig;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "KNN_BANDIT_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    KnnUniform,
    KnnUcb,
    RidgeUniform,
    LinUcb,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::KnnUniform => "knn-uniform",
            Method::KnnUcb => "knn-ucb",
            Method::RidgeUniform => "ridge-uniform",
            Method::LinUcb => "linucb",
        }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, Method::KnnUniform | Method::RidgeUniform)
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "knn-uniform" => Method::KnnUniform,
            "knn-ucb" => Method::KnnUcb,
            "ridge-uniform" => Method::RidgeUniform,
            "linucb" => Method::LinUcb,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown method `{other}` (expected knn-uniform, knn-ucb, ridge-uniform or linucb)"
                )))
            }
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where contexts and rewards come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Scenario {
        kind: ScenarioKind,
        /// Ambient dimension; only the manifold scenario accepts a value other than 2.
        context_dim: usize,
    },
    Dataset {
        images: PathBuf,
        labels: PathBuf,
        limit: Option<usize>,
    },
}

impl Source {
    pub fn label(&self) -> String {
        match self {
            Source::Scenario { kind, .. } => kind.name().to_string(),
            Source::Dataset { images, .. } => images
                .file_name()
                .map_or("dataset".into(), |n| n.to_string_lossy().into_owned()),
        }
    }
}

/// Fully resolved experiment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: Source,
    pub method: Method,
    pub horizon: usize,
    pub warmup: usize,
    pub width_scale: f64,
    pub delta: f64,
    /// `None` means the context dimension.
    pub intrinsic_dim: Option<usize>,
    pub k: Option<usize>,
    pub topology_radius: Option<f64>,
    pub out_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub noise_sigma: f64,
    pub l2_alpha: f64,
    pub confidence: f64,
    pub test_size: usize,
}

/// Known keys, in manifest order.
pub const KEYS: &[&str] = &[
    "scenario",
    "context_dim",
    "images",
    "labels",
    "dataset_limit",
    "method",
    "horizon",
    "warmup",
    "width_scale",
    "delta",
    "intrinsic_dim",
    "k",
    "topology_radius",
    "noise_sigma",
    "l2_alpha",
    "confidence",
    "test_size",
    "seeds",
    "out_dir",
];

/// Keys that may appear in a manifest without affecting the run.
const INFORMATIONAL: &[&str] = &["version"];

/// Flat `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!("line {}: expected `key = value`, got `{line}`", no + 1))
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

pub fn read_pairs(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read config {}: {e}", path.display())))?;
    parse_pairs(&text)
}

fn get<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    map.get(key)
        .filter(|v| !v.is_empty())
        .map(|v| {
            v.parse::<T>()
                .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse `{v}`")))
        })
        .transpose()
}

fn parse_seeds(v: &str) -> Result<Vec<u64>> {
    let seeds = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<u64>()
                .map_err(|_| Error::InvalidConfig(format!("seeds: cannot parse `{s}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("seeds: at least one seed is required".into()));
    }
    Ok(seeds)
}

/// Resolves `dataset = DIR` to an IDX image/label pair inside it.
pub fn find_idx_pair(dir: &Path) -> Result<(PathBuf, PathBuf)> {
    for prefix in ["train", "subset", "t10k"] {
        for ext in ["", ".gz"] {
            let images = dir.join(format!("{prefix}-images-idx3-ubyte{ext}"));
            let labels = dir.join(format!("{prefix}-labels-idx1-ubyte{ext}"));
            if images.exists() && labels.exists() {
                return Ok((images, labels));
            }
        }
    }
    Err(Error::Io(std::io::Error::new(
        std::io::ErrorKind::NotFound,
        format!("no IDX image/label pair found in {}", dir.display()),
    )))
}

impl ExperimentConfig {
    /// Applies defaults to a key/value map and validates the result.
    pub fn from_pairs(map: &BTreeMap<String, String>) -> Result<Self> {
        if let Some(k) = map
            .keys()
            .find(|k| !KEYS.contains(&k.as_str()) && !INFORMATIONAL.contains(&k.as_str()) && k.as_str() != "dataset")
        {
            return Err(Error::InvalidConfig(format!("unknown key `{k}`")));
        }
        let scenario: Option<ScenarioKind> = get(map, "scenario")?;
        let has_dataset = map.contains_key("dataset") || map.contains_key("images");
        let source = match (scenario, has_dataset) {
            (Some(_), true) => {
                return Err(Error::InvalidConfig(
                    "set exactly one of scenario and dataset, not both".into(),
                ))
            }
            (None, false) => {
                return Err(Error::InvalidConfig("set one of scenario or dataset".into()))
            }
            (Some(kind), false) => {
                let default_dim = if kind == ScenarioKind::ManifoldCurve { 10 } else { 2 };
                let context_dim = get(map, "context_dim")?.unwrap_or(default_dim);
                if kind != ScenarioKind::ManifoldCurve && context_dim != 2 {
                    return Err(Error::InvalidConfig(format!(
                        "scenario {kind} is planar; context_dim must be 2"
                    )));
                }
                Source::Scenario { kind, context_dim }
            }
            (None, true) => {
                let (images, labels) = match (map.get("images"), map.get("labels")) {
                    (Some(i), Some(l)) => (PathBuf::from(i), PathBuf::from(l)),
                    (None, None) => find_idx_pair(Path::new(&map["dataset"]))?,
                    _ => {
                        return Err(Error::InvalidConfig(
                            "images and labels must be given together".into(),
                        ))
                    }
                };
                Source::Dataset {
                    images,
                    labels,
                    limit: get(map, "dataset_limit")?,
                }
            }
        };
        let out_dir = map
            .get("out_dir")
            .map(PathBuf::from)
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        let cfg = Self {
            source,
            method: get(map, "method")?.unwrap_or(Method::KnnUcb),
            horizon: get(map, "horizon")?.unwrap_or(10_000),
            warmup: get(map, "warmup")?.unwrap_or(BanditConfig::DEFAULT_WARMUP),
            width_scale: get(map, "width_scale")?.unwrap_or(BanditConfig::DEFAULT_WIDTH_SCALE),
            delta: get(map, "delta")?.unwrap_or(BanditConfig::DEFAULT_DELTA),
            intrinsic_dim: get(map, "intrinsic_dim")?,
            k: get(map, "k")?,
            topology_radius: get(map, "topology_radius")?,
            out_dir,
            seeds: map.get("seeds").map_or(Ok(vec![0]), |v| parse_seeds(v))?,
            noise_sigma: get(map, "noise_sigma")?.unwrap_or(0.5),
            l2_alpha: get(map, "l2_alpha")?.unwrap_or(1.0),
            confidence: get(map, "confidence")?.unwrap_or(0.1),
            test_size: get(map, "test_size")?.unwrap_or(10_000),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        if self.k == Some(0) {
            return bad("k must be positive".into());
        }
        if let Some(r) = self.topology_radius {
            if !(r > 0.0 && r.is_finite()) {
                return bad(format!("topology_radius {r} must be positive"));
            }
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma {} must be nonnegative", self.noise_sigma));
        }
        if !(self.l2_alpha >= 0.0) || !(self.confidence >= 0.0) {
            return bad("l2_alpha and confidence must be nonnegative".into());
        }
        if let Source::Scenario { context_dim, .. } = self.source {
            if context_dim < 2 {
                return bad("context_dim must be at least 2".into());
            }
        }
        Ok(())
    }

    /// The effective configuration as manifest lines, including `version`.
    pub fn to_pairs(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        match &self.source {
            Source::Scenario { kind, context_dim } => {
                put("scenario", kind.name().into());
                put("context_dim", context_dim.to_string());
            }
            Source::Dataset {
                images,
                labels,
                limit,
            } => {
                put("images", images.display().to_string());
                put("labels", labels.display().to_string());
                put("dataset_limit", limit.map_or(String::new(), |l| l.to_string()));
            }
        }
        put("method", self.method.name().into());
        put("horizon", self.horizon.to_string());
        put("warmup", self.warmup.to_string());
        put("width_scale", self.width_scale.to_string());
        put("delta", self.delta.to_string());
        put("intrinsic_dim", self.intrinsic_dim.map_or(String::new(), |d| d.to_string()));
        put("k", self.k.map_or(String::new(), |k| k.to_string()));
        put("topology_radius", self.topology_radius.map_or(String::new(), |r| r.to_string()));
        put("noise_sigma", self.noise_sigma.to_string());
        put("l2_alpha", self.l2_alpha.to_string());
        put("confidence", self.confidence.to_string());
        put("test_size", self.test_size.to_string());
        put(
            "seeds",
            self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
        );
        put("out_dir", self.out_dir.display().to_string());
        put("version", env!("CARGO_PKG_VERSION").into());
        m
    }

    pub fn manifest_text(&self) -> String {
        let pairs = self.to_pairs();
        let mut out = String::new();
        for key in KEYS.iter().chain(INFORMATIONAL) {
            if let Some(v) = pairs.get(*key) {
                out.push_str(&format!("{key}={v}\n"));
            }
        }
        out
    }

    /// Bandit settings for an environment with `num_arms` arms in `context_dim` dimensions.
    pub fn bandit(&self, num_arms: usize, context_dim: usize, seed: u64) -> BanditConfig {
        let mut b = BanditConfig::new(num_arms, context_dim, self.horizon)
            .with_warmup(self.warmup)
            .with_width_scale(self.width_scale)
            .with_intrinsic_dim(self.intrinsic_dim.unwrap_or(context_dim))
            .with_seed(seed);
        b.delta = self.delta;
        b
    }
}
