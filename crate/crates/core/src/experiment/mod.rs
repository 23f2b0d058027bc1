//! Experiment orchestration: configuration, seeded runs, reports.

mod config;
pub mod fetch;
mod run;

pub use config::{find_idx_pair, parse_pairs, read_pairs, ExperimentConfig, Method, Source, KEYS, OUT_DIR_ENV};
pub use run::{compare, run_all, run_seed, write_comparison, write_run, Check, Comparison, ComparisonRow, SeedRun};
