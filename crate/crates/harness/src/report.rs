use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use malibo::stats::mean_stderr;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::plot::{render_svg, PlotOptions};
use crate::{HarnessError, Result};

/// Per-iteration traces of one completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// Best observed (possibly noisy) value so far.
    pub incumbent_y: Vec<f64>,
    /// Normalized regret of the best noise-free value so far.
    pub regret: Vec<f64>,
}

/// One (strategy, seed) run; failures keep their error message.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub strategy: String,
    pub seed: usize,
    pub outcome: std::result::Result<Trace, String>,
}

/// Sub-seeds and target of one seed index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub index: usize,
    pub meta_data: u64,
    pub meta_train: u64,
    pub target: u64,
    /// `strategy → (bo stream seed, noise stream seed)`.
    pub streams: BTreeMap<String, (u64, u64)>,
    pub target_description: serde_json::Value,
    pub f_min: f64,
    pub f_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaRecord {
    pub key: usize,
    pub n_tasks: usize,
    pub n_observations: usize,
    pub error: Option<String>,
    pub epochs_run: Option<usize>,
    pub best_epoch: Option<usize>,
    pub final_train_loss: Option<f64>,
    pub degenerate_tasks: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub strategy: String,
    pub seed: usize,
    pub error: String,
}

/// Everything needed to reproduce a benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub versions: BTreeMap<String, String>,
    pub config: ExperimentConfig,
    pub base_seed: u64,
    pub seed_scheme: String,
    /// True when `f_min`/`f_max` are numerical estimates.
    pub extrema_estimated: bool,
    pub seeds: Vec<SeedRecord>,
    pub meta_models: Vec<MetaRecord>,
    pub failures: Vec<Failure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretReport {
    pub strategies: Vec<String>,
    pub n_seeds: usize,
    pub budget: usize,
    /// Ordered by seed, then strategy.
    pub cells: Vec<Cell>,
    pub manifest: Option<Manifest>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub iteration: usize,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Serialize, Deserialize)]
struct RegretRow {
    strategy: String,
    seed: usize,
    iteration: usize,
    incumbent_y: f64,
    normalized_regret: f64,
}

#[derive(Serialize)]
struct SummaryCsvRow<'a> {
    strategy: &'a str,
    iteration: usize,
    mean: f64,
    stderr: f64,
}

impl RegretReport {
    /// Completed runs of `strategy` in seed order.
    pub fn runs(&self, strategy: &str) -> Vec<(usize, &Trace)> {
        self.cells
            .iter()
            .filter(|c| c.strategy == strategy)
            .filter_map(|c| c.outcome.as_ref().ok().map(|t| (c.seed, t)))
            .collect()
    }

    /// Seeds × iterations regret matrix over completed runs.
    pub fn regret_matrix(&self, strategy: &str) -> Vec<Vec<f64>> {
        self.runs(strategy).into_iter().map(|(_, t)| t.regret.clone()).collect()
    }

    /// Mean and standard error of normalized regret per iteration.
    pub fn summary(&self, strategy: &str) -> Vec<SummaryRow> {
        let m = self.regret_matrix(strategy);
        (0..self.budget)
            .map(|i| {
                let col: Vec<f64> = m.iter().filter_map(|r| r.get(i).copied()).collect();
                let (mean, stderr) = mean_stderr(&col);
                SummaryRow { iteration: i + 1, mean, stderr }
            })
            .collect()
    }

    /// Mean normalized regret at a 1-based iteration.
    pub fn mean_at(&self, strategy: &str, iteration: usize) -> f64 {
        self.summary(strategy).get(iteration.wrapping_sub(1)).map_or(f64::NAN, |r| r.mean)
    }

    pub fn failures(&self) -> Vec<Failure> {
        self.cells
            .iter()
            .filter_map(|c| c.outcome.as_ref().err().map(|e| Failure { strategy: c.strategy.clone(), seed: c.seed, error: e.clone() }))
            .collect()
    }

    pub fn write_regret_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
        for c in &self.cells {
            let Ok(t) = &c.outcome else { continue };
            for (i, (y, r)) in t.incumbent_y.iter().zip(&t.regret).enumerate() {
                let row = RegretRow { strategy: c.strategy.clone(), seed: c.seed, iteration: i + 1, incumbent_y: *y, normalized_regret: *r };
                w.serialize(row).map_err(|e| HarnessError::csv(path, e))?;
            }
        }
        w.flush().map_err(|e| HarnessError::io(path, e))
    }

    /// Rebuilds the completed cells from `regret.csv`. Strategy order follows
    /// first appearance.
    pub fn read_regret_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
        let mut strategies: Vec<String> = Vec::new();
        let mut runs: BTreeMap<(usize, usize), Trace> = BTreeMap::new();
        for (line, row) in r.deserialize::<RegretRow>().enumerate() {
            let row = row.map_err(|e| HarnessError::csv(path, e))?;
            let s = match strategies.iter().position(|s| *s == row.strategy) {
                Some(s) => s,
                None => {
                    strategies.push(row.strategy.clone());
                    strategies.len() - 1
                }
            };
            let t = runs.entry((row.seed, s)).or_insert_with(|| Trace { incumbent_y: Vec::new(), regret: Vec::new() });
            if row.iteration != t.regret.len() + 1 {
                return Err(HarnessError::Validation(format!(
                    "{}: row {} has iteration {}, expected {}",
                    path.display(),
                    line + 2,
                    row.iteration,
                    t.regret.len() + 1
                )));
            }
            t.incumbent_y.push(row.incumbent_y);
            t.regret.push(row.normalized_regret);
        }
        let budget = runs.values().map(|t| t.regret.len()).max().unwrap_or(0);
        let n_seeds = runs.keys().map(|k| k.0 + 1).max().unwrap_or(0);
        let cells = runs
            .into_iter()
            .map(|((seed, s), t)| Cell { strategy: strategies[s].clone(), seed, outcome: Ok(t) })
            .collect();
        Ok(RegretReport { strategies, n_seeds, budget, cells, manifest: None })
    }

    pub fn write_summary_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
        for s in &self.strategies {
            for row in self.summary(s) {
                w.serialize(SummaryCsvRow { strategy: s, iteration: row.iteration, mean: row.mean, stderr: row.stderr })
                    .map_err(|e| HarnessError::csv(path, e))?;
            }
        }
        w.flush().map_err(|e| HarnessError::io(path, e))
    }

    pub fn plot(&self, log_x: bool) -> String {
        let estimated = self.manifest.as_ref().is_none_or(|m| m.extrema_estimated);
        let series: Vec<(String, Vec<SummaryRow>)> = self.strategies.iter().map(|s| (s.clone(), self.summary(s))).collect();
        let opts = PlotOptions {
            log_x,
            title: format!("normalized regret, mean ± standard error ({} seeds)", self.n_seeds),
            y_label: if estimated { "normalized regret (estimated extrema)".into() } else { "normalized regret".into() },
        };
        render_svg(&series, &opts)
    }

    /// Writes `regret.csv`, `summary.csv`, `plot.svg` and, when known,
    /// `manifest.json` into `dir`, returning the paths written.
    pub fn export(&self, dir: impl AsRef<Path>, log_x: bool) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        let regret = dir.join("regret.csv");
        let summary = dir.join("summary.csv");
        let plot = dir.join("plot.svg");
        self.write_regret_csv(&regret)?;
        self.write_summary_csv(&summary)?;
        std::fs::write(&plot, self.plot(log_x)).map_err(|e| HarnessError::io(&plot, e))?;
        let mut written = vec![regret, summary, plot];
        if let Some(m) = &self.manifest {
            let path = dir.join("manifest.json");
            let text = serde_json::to_string_pretty(m)?;
            std::fs::write(&path, text + "\n").map_err(|e| HarnessError::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}
