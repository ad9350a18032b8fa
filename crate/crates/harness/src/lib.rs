//! Experiment orchestration, reporting and the `malibo` command line.
//!
//! An [`ExperimentConfig`] names a benchmark, a list of strategies, a budget
//! and a number of seeds. [`run_experiment`] derives every random stream
//! from the base seed (see [`experiment::SEED_SCHEME`]), meta-trains per seed
//! (or once with `shared_meta`), runs each strategy and collects normalized
//! regret into a [`RegretReport`], which exports `regret.csv`,
//! `summary.csv`, `plot.svg` and `manifest.json`.

pub mod cli;
pub mod config;
mod error;
pub mod experiment;
pub mod plot;
pub mod report;
pub mod selftest;

pub use config::{BenchmarkSpec, ExperimentConfig, MetaSpec, StrategyKind};
pub use error::{HarnessError, Result};
pub use experiment::run_experiment;
pub use report::{Cell, Manifest, RegretReport, SummaryRow, Trace};
