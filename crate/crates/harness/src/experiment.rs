use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use malibo::bench::{apply_noise, sample_meta_dataset, sample_task, SampledTask, TabularBenchmark};
use malibo::bo::{run_bo, Strategy};
use malibo::data::{bounding_box, incumbent_trace, normalized_regret, BoundingBox, MetaDataset, Observation, SearchSpace, TaskDataset};
use malibo::meta::{meta_train, MetaModel, TrainReport};
use malibo::rng::{derive_seed, stream};
use rand::seq::index::sample;
use rayon::prelude::*;

use crate::config::{BenchmarkSpec, ExperimentConfig, StrategyKind};
use crate::report::{Cell, Manifest, MetaRecord, RegretReport, SeedRecord, Trace};
use crate::{HarnessError, Result};

/// How sub-seeds are derived, as recorded in every manifest.
pub const SEED_SCHEME: &str = "sub_seed(base, role, index) = splitmix64(fnv1a(le_bytes(base) || utf8(role) || 0xff || le_bytes(index))); \
roles: meta-data and meta-train (index = meta key), target (index = seed), bo/<strategy> and noise/<strategy> (index = seed)";

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "MALIBO_THREADS";

enum Target {
    Synthetic(SampledTask),
    Tabular(Arc<TabularBenchmark>),
}

impl Target {
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Target::Synthetic(t) => t.function.eval(x),
            Target::Tabular(t) => t.lookup(x),
        }
    }

    fn extrema(&self) -> (f64, f64) {
        match self {
            Target::Synthetic(t) => (t.f_min, t.f_max),
            Target::Tabular(t) => (t.f_min, t.f_max),
        }
    }
}

/// Meta-dataset and what was derived from it for one meta key.
struct MetaContext {
    n_tasks: usize,
    n_observations: usize,
    model: Option<(Arc<MetaModel>, TrainReport)>,
    bbox: Option<BoundingBox>,
}

/// Worker threads: `MALIBO_THREADS` when set to a positive integer, else
/// one per core.
pub fn worker_threads() -> usize {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|n| *n > 0).unwrap_or(0)
}

fn tabular_meta(tables: &[Arc<TabularBenchmark>], target: usize, n_obs: usize, cfg: &ExperimentConfig, seed: u64) -> Result<MetaDataset> {
    let mut rng = stream(seed, "tables", 0);
    let tasks = tables
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != target)
        .map(|(i, t)| {
            let entries = t.entries();
            let take = n_obs.min(entries.len());
            let mut picked: Vec<usize> = sample(&mut rng, entries.len(), take).into_vec();
            picked.sort_unstable();
            let obs = picked
                .into_iter()
                .map(|k| Observation::new(entries[k].0.clone(), apply_noise(entries[k].1, cfg.noise, &mut rng)))
                .collect();
            TaskDataset::new(i as u64, obs)
        })
        .collect();
    Ok(MetaDataset::new(tasks)?)
}

fn build_meta(cfg: &ExperimentConfig, tables: &[Arc<TabularBenchmark>], key: usize) -> Result<MetaContext> {
    let base = cfg.base_seed;
    let data_seed = derive_seed(base, "meta-data", key as u64);
    let meta = match &cfg.benchmark {
        BenchmarkSpec::Synthetic { family } => {
            sample_meta_dataset(*family, cfg.meta.n_tasks, cfg.meta.n_obs, cfg.noise, &mut stream(data_seed, "sample", 0))?
        }
        BenchmarkSpec::Tabular { .. } => tabular_meta(tables, key % tables.len(), cfg.meta.n_obs, cfg, data_seed)?,
    };
    let model = if cfg.strategies.contains(&StrategyKind::Malibo) {
        let mut mcfg = cfg.meta.model.clone();
        mcfg.seed = derive_seed(base, "meta-train", key as u64);
        let (m, report) = meta_train(&meta, &mcfg)?;
        Some((Arc::new(m), report))
    } else {
        None
    };
    let bbox = if cfg.strategies.contains(&StrategyKind::LfboBb) { Some(bounding_box(&meta, cfg.meta.bb_top_m)?) } else { None };
    Ok(MetaContext { n_tasks: meta.n_tasks(), n_observations: meta.n_observations(), model, bbox })
}

fn run_cell(
    cfg: &ExperimentConfig,
    kind: StrategyKind,
    seed: &SeedRecord,
    target: &Target,
    space: &SearchSpace,
    meta: Option<&std::result::Result<MetaContext, String>>,
) -> std::result::Result<Trace, String> {
    let context = || match meta {
        Some(Ok(m)) => Ok(m),
        Some(Err(e)) => Err(format!("meta-learning setup failed: {e}")),
        None => Err("meta-learning context missing".to_string()),
    };
    let strategy = match kind {
        StrategyKind::Random => Strategy::RandomSearch,
        StrategyKind::Lfbo => Strategy::Lfbo(cfg.lfbo.clone()),
        StrategyKind::LfboBb => Strategy::LfboBb(cfg.lfbo.clone(), context()?.bbox.clone().ok_or("bounding box missing")?),
        StrategyKind::Malibo => Strategy::Malibo(context()?.model.as_ref().ok_or("meta-model missing")?.0.clone(), cfg.malibo.clone()),
    };
    let (bo_seed, noise_seed) = seed.streams[kind.as_str()];
    let mut noise_rng = stream(noise_seed, "noise", 0);
    let mut truth = Vec::with_capacity(cfg.budget);
    let history = run_bo(
        |x| {
            let f = target.eval(x);
            truth.push(f);
            apply_noise(f, cfg.noise, &mut noise_rng)
        },
        space,
        &strategy,
        cfg.budget,
        bo_seed,
    )
    .map_err(|e| e.to_string())?;
    let (f_min, f_max) = target.extrema();
    let regret = normalized_regret(&truth, f_min, f_max).map_err(|e| e.to_string())?;
    Ok(Trace { incumbent_y: incumbent_trace(&history.ys()), regret })
}

/// Runs every strategy on every seed and aggregates normalized regret.
///
/// Component failures are recorded in their cell rather than aborting the
/// run; only invalid configurations and unreadable tables are errors.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RegretReport> {
    let cfg = cfg.effective();
    cfg.validate()?;
    let base = cfg.base_seed;

    let tables: Vec<Arc<TabularBenchmark>> = match &cfg.benchmark {
        BenchmarkSpec::Synthetic { .. } => Vec::new(),
        BenchmarkSpec::Tabular { paths } => paths.iter().map(|p| TabularBenchmark::load(p).map(Arc::new)).collect::<malibo::Result<_>>()?,
    };
    if let Some(first) = tables.first() {
        if tables.iter().any(|t| t.space != first.space) {
            return Err(HarnessError::Validation("all tables must share one search space".into()));
        }
        if !(first.f_min < first.f_max) || tables.iter().any(|t| !(t.f_min < t.f_max)) {
            return Err(HarnessError::Validation("every table needs f_min < f_max".into()));
        }
    }
    let space = match &cfg.benchmark {
        BenchmarkSpec::Synthetic { family } => family.space(),
        BenchmarkSpec::Tabular { .. } => tables[0].space.clone(),
    };

    let meta_key = |idx: usize| match (&cfg.benchmark, cfg.shared_meta) {
        (BenchmarkSpec::Synthetic { .. }, true) => 0,
        (BenchmarkSpec::Tabular { .. }, true) => idx % tables.len(),
        (_, false) => idx,
    };
    let mut targets = Vec::with_capacity(cfg.n_seeds);
    let mut seeds = Vec::with_capacity(cfg.n_seeds);
    for idx in 0..cfg.n_seeds {
        let key = meta_key(idx) as u64;
        let target_seed = derive_seed(base, "target", idx as u64);
        let (target, description) = match &cfg.benchmark {
            BenchmarkSpec::Synthetic { family } => {
                let t = sample_task(*family, &mut stream(target_seed, "sample", 0));
                let d = serde_json::to_value(&t.function)?;
                (Target::Synthetic(t), d)
            }
            BenchmarkSpec::Tabular { paths } => {
                let k = idx % tables.len();
                (Target::Tabular(tables[k].clone()), serde_json::json!({ "table": paths[k] }))
            }
        };
        let (f_min, f_max) = target.extrema();
        let streams = cfg
            .strategies
            .iter()
            .map(|s| {
                let name = s.as_str();
                let pair = (derive_seed(base, &format!("bo/{name}"), idx as u64), derive_seed(base, &format!("noise/{name}"), idx as u64));
                (name.to_string(), pair)
            })
            .collect();
        seeds.push(SeedRecord {
            index: idx,
            meta_data: derive_seed(base, "meta-data", key),
            meta_train: derive_seed(base, "meta-train", key),
            target: target_seed,
            streams,
            target_description: description,
            f_min,
            f_max,
        });
        targets.push(target);
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_threads())
        .build()
        .map_err(|e| HarnessError::Validation(format!("cannot build worker pool: {e}")))?;

    let (metas, cells) = pool.install(|| {
        let keys: Vec<usize> = if cfg.strategies.iter().any(|s| s.needs_meta_data()) {
            (0..cfg.n_seeds).map(meta_key).collect::<BTreeSet<_>>().into_iter().collect()
        } else {
            Vec::new()
        };
        let metas: BTreeMap<usize, std::result::Result<MetaContext, String>> =
            keys.par_iter().map(|&k| (k, build_meta(&cfg, &tables, k).map_err(|e| e.to_string()))).collect();
        let jobs: Vec<(usize, StrategyKind)> = (0..cfg.n_seeds).flat_map(|i| cfg.strategies.iter().map(move |s| (i, *s))).collect();
        let cells: Vec<Cell> = jobs
            .par_iter()
            .map(|&(i, kind)| {
                let meta = if kind.needs_meta_data() { metas.get(&meta_key(i)) } else { None };
                Cell { strategy: kind.as_str().to_string(), seed: i, outcome: run_cell(&cfg, kind, &seeds[i], &targets[i], &space, meta) }
            })
            .collect();
        (metas, cells)
    });

    let meta_models = metas
        .iter()
        .map(|(&key, m)| match m {
            Ok(m) => MetaRecord {
                key,
                n_tasks: m.n_tasks,
                n_observations: m.n_observations,
                error: None,
                epochs_run: m.model.as_ref().map(|(_, r)| r.adam.epochs_run),
                best_epoch: m.model.as_ref().map(|(_, r)| r.adam.best_epoch),
                final_train_loss: m.model.as_ref().map(|(_, r)| r.final_train_loss),
                degenerate_tasks: m.model.as_ref().map(|(_, r)| r.degenerate_tasks.clone()).unwrap_or_default(),
            },
            Err(e) => MetaRecord {
                key,
                n_tasks: 0,
                n_observations: 0,
                error: Some(e.clone()),
                epochs_run: None,
                best_epoch: None,
                final_train_loss: None,
                degenerate_tasks: Vec::new(),
            },
        })
        .collect();
    let versions = BTreeMap::from([
        ("malibo-core".to_string(), malibo::VERSION.to_string()),
        ("malibo-harness".to_string(), env!("CARGO_PKG_VERSION").to_string()),
    ]);
    let mut report = RegretReport {
        strategies: cfg.strategies.iter().map(|s| s.as_str().to_string()).collect(),
        n_seeds: cfg.n_seeds,
        budget: cfg.budget,
        cells,
        manifest: None,
    };
    report.manifest = Some(Manifest {
        versions,
        base_seed: base,
        seed_scheme: SEED_SCHEME.to_string(),
        extrema_estimated: matches!(cfg.benchmark, BenchmarkSpec::Synthetic { .. }),
        seeds,
        meta_models,
        failures: report.failures(),
        config: cfg,
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_only(seeds: usize, budget: usize) -> ExperimentConfig {
        ExperimentConfig::from_json(&format!(
            r#"{{"benchmark": {{"kind": "synthetic", "family": "branin"}}, "strategies": ["random"], "budget": {budget}, "n_seeds": {seeds}, "base_seed": 11}}"#
        ))
        .unwrap()
    }

    #[test]
    fn random_search_matrix_is_reproducible() {
        let cfg = random_only(3, 5);
        let a = run_experiment(&cfg).unwrap();
        let m = a.regret_matrix("random");
        assert_eq!(m.len(), 3);
        assert!(m.iter().all(|r| r.len() == 5));
        assert!(m.iter().all(|r| r.windows(2).all(|w| w[1] <= w[0]) && r.iter().all(|v| *v >= -1e-9)));
        assert_eq!(a, run_experiment(&cfg).unwrap());
        assert_eq!(a.manifest.as_ref().unwrap().base_seed, 11);
    }

    #[test]
    fn adding_a_strategy_keeps_other_streams() {
        let cfg = random_only(2, 12);
        let mut both = cfg.clone();
        both.strategies.push(StrategyKind::Lfbo);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&both).unwrap();
        assert_eq!(a.regret_matrix("random"), b.regret_matrix("random"));
        assert_eq!(b.regret_matrix("lfbo").len(), 2);
    }

    #[test]
    fn meta_failures_are_recorded_per_cell() {
        let mut cfg = random_only(2, 3);
        cfg.strategies.push(StrategyKind::LfboBb);
        // every related task has fewer observations than the box needs
        cfg.meta.n_tasks = 3;
        cfg.meta.n_obs = 2;
        cfg.meta.bb_top_m = 5;
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.regret_matrix("random").len(), 2);
        let failures = r.failures();
        assert_eq!(failures.len(), 2);
        assert!(failures.iter().all(|f| f.strategy == "lfbo_bb" && f.error.contains("top_m")));
        let m = r.manifest.unwrap();
        assert_eq!(m.failures, failures);
        assert!(m.meta_models.iter().all(|mm| mm.error.is_some()));
    }
}
