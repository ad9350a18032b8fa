use std::sync::Arc;

use malibo::adapt::{adapt, probit_predict_batch, AdaptConfig};
use malibo::bench::{sample_meta_dataset, sample_task, Family, NoiseSpec, TabularBenchmark};
use malibo::bo::{propose_parallel_ts, run_bo, BoHistory, LfboConfig, MaliboConfig, ProposalKind, Strategy};
use malibo::data::{normalized_regret, TaskDataset};
use malibo::meta::{meta_train, MetaModel, MetaModelConfig};
use malibo::optim::AdamConfig;
use rand::SeedableRng;

fn small_config() -> MetaModelConfig {
    MetaModelConfig {
        feature_dim: 6,
        hidden_units: 24,
        hidden_layers: 2,
        epochs: 60,
        batch: 128,
        adam: AdamConfig { lr: 3e-3, ..Default::default() },
        seed: 3,
        ..Default::default()
    }
}

fn forrester_model() -> MetaModel {
    let meta = sample_meta_dataset(Family::Forrester, 16, 48, NoiseSpec::none(), &mut malibo::rng::Rng::seed_from_u64(1)).unwrap();
    meta_train(&meta, &small_config()).unwrap().0
}

#[test]
fn checkpoint_round_trip_preserves_optimisation() {
    let model = forrester_model();
    let restored = MetaModel::from_json(&model.to_json()).unwrap();
    let task = sample_task(Family::Forrester, &mut malibo::rng::Rng::seed_from_u64(9));
    let cfg = MaliboConfig { n_candidates: 512, ..Default::default() };
    let space = Family::Forrester.space();
    let a = run_bo(|x| task.function.eval(x), &space, &Strategy::Malibo(Arc::new(model), cfg.clone()), 10, 5).unwrap();
    let b = run_bo(|x| task.function.eval(x), &space, &Strategy::Malibo(Arc::new(restored), cfg), 10, 5).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.records[0].kind, ProposalKind::Init);
    assert_eq!(a.records[9].kind, ProposalKind::TsGb);
}

#[test]
fn adaptation_and_parallel_proposals_on_a_trained_model() {
    let model = forrester_model();
    let task = sample_task(Family::Forrester, &mut malibo::rng::Rng::seed_from_u64(2));
    let space = Family::Forrester.space();
    let mut h = BoHistory::new();
    for (i, x) in [0.05, 0.35, 0.65, 0.95].iter().enumerate() {
        h.push(vec![*x], task.function.eval(&[*x]), if i == 0 { ProposalKind::Init } else { ProposalKind::Ts }, false);
    }
    let data: TaskDataset = h.dataset();
    let (post, map) = adapt(&model, &data, &AdaptConfig::default()).unwrap();
    assert_eq!(map.z.len(), model.feature_dim());
    let p = probit_predict_batch(&model, &post, &[[0.1], [0.5], [0.9]]).unwrap();
    assert!(p.iter().all(|v| *v > 0.0 && *v < 1.0));
    let cfg = MaliboConfig { n_candidates: 512, ..Default::default() };
    let pts = propose_parallel_ts(&h, &model, &space, 3, &cfg, &mut malibo::rng::Rng::seed_from_u64(4)).unwrap();
    assert_eq!(pts.len(), 3);
    assert!(pts.iter().all(|x| x.len() == 1 && (0.0..=1.0).contains(&x[0])));
}

#[test]
fn lfbo_on_a_tabular_benchmark_visits_grid_points() {
    let mut rows = Vec::new();
    for a in 0..6 {
        for b in [1.0, 2.0, 4.0, 8.0] {
            rows.push(format!("[[{a}, {b}], {}]", ((a as f64) - 3.0).powi(2) + (b as f64).log2()));
        }
    }
    let text = format!(
        r#"{{"space": {{"dims": [{{"kind": "integer", "lo": 0, "hi": 5}}, {{"kind": "ordinal", "levels": [1, 2, 4, 8]}}]}}, "rows": [{}]}}"#,
        rows.join(", ")
    );
    let table = TabularBenchmark::from_json(&text).unwrap();
    let strategy = Strategy::Lfbo(LfboConfig { n_init: 5, n_candidates: 256, ..Default::default() });
    let h = run_bo(|x| table.lookup(x), &table.space, &strategy, 15, 0).unwrap();
    let grid: Vec<Vec<f64>> = table.entries().into_iter().map(|e| e.0).collect();
    assert!(h.records.iter().all(|r| grid.contains(&r.x)));
    let r = normalized_regret(&h.ys(), table.f_min, table.f_max).unwrap();
    assert!(r.iter().all(|v| (0.0..=1.0).contains(v)));
}
