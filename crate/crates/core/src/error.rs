use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("insufficient data: k = {k} but only {n} points are stored")]
    InsufficientData { k: usize, n: usize },

    #[error("the index holds no points")]
    EmptyIndex,

    #[error("point set is empty")]
    EmptySet,

    #[error("arm {arm} out of range for {num_arms} arms")]
    ArmOutOfRange { arm: usize, num_arms: usize },

    #[error("design matrix is rank deficient; use l2_alpha > 0 or add data")]
    RankDeficient,

    #[error("warmup incomplete: arm {arm} has {have} observations, needs {need}; run the round-robin warmup first")]
    WarmupIncomplete { arm: usize, have: usize, need: usize },

    #[error("context {0:?} lies outside the environment's support")]
    OutOfSupport(Vec<f64>),

    #[error("environment exhausted after {0} rounds")]
    Exhausted(usize),

    #[error("trace is missing mean reward fields at step {0}")]
    MissingMeans(u64),

    #[error("{path}: {source}")]
    Idx { path: PathBuf, source: IdxError },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Failures while decoding an IDX file.
#[derive(Debug, Error)]
pub enum IdxError {
    #[error("bad magic number at offset 0: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { expected: u32, found: u32 },

    #[error("truncated header: needed {needed} bytes at offset {offset}")]
    TruncatedHeader { offset: usize, needed: usize },

    #[error("truncated payload at offset {offset}: header declares {expected} bytes, found {found}")]
    TruncatedPayload {
        offset: usize,
        expected: usize,
        found: usize,
    },

    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },

    #[error("label {label} at index {index} is not a digit class")]
    BadLabel { index: usize, label: u8 },
}
