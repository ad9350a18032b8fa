use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::loss::{Examples, MetaObjective};
use super::regularizer::calibrate_coefficients;
use super::{MetaModel, MetaModelConfig};
use crate::data::{LabeledSet, MetaDataset};
use crate::optim::{adam_run, AdamReport, EarlyStopping, Minibatches};
use crate::rng::{derive_seed, stream, Rng};
use crate::{Error, Result};

/// What happened during [`meta_train`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub adam: AdamReport,
    pub n_params: usize,
    pub n_train: usize,
    pub n_validation: usize,
    /// Tasks whose observations were all equal (labels all 1, weights 0).
    pub degenerate_tasks: Vec<u64>,
    pub lambda_ks: f64,
    pub lambda_cov: f64,
    /// Full-data training loss at the returned parameters.
    pub final_train_loss: f64,
}

struct Batches<'a> {
    objective: &'a MetaObjective<'a>,
    order: Vec<usize>,
    batch: usize,
    rng: Rng,
}

impl Minibatches for Batches<'_> {
    fn begin_epoch(&mut self, _epoch: usize) -> usize {
        self.order.shuffle(&mut self.rng);
        self.order.len().div_ceil(self.batch)
    }

    fn loss_grad(&mut self, index: usize, params: &[f64], grad: &mut [f64]) -> f64 {
        let lo = index * self.batch;
        let hi = (lo + self.batch).min(self.order.len());
        let idx = &self.order[lo..hi];
        let scale = self.order.len() as f64 / idx.len() as f64;
        self.objective.evaluate(params, Some(idx), scale, Some(grad))
    }
}

/// Trains the feature network, mean layer and task embeddings on `meta`.
///
/// Labels and weights are computed once per task from all of its finite
/// observations. ADAM runs over shuffled minibatches mixing all tasks; a
/// per-task hold-out split drives early stopping and the best-validation
/// parameters are returned.
pub fn meta_train(meta: &MetaDataset, cfg: &MetaModelConfig) -> Result<(MetaModel, TrainReport)> {
    cfg.validate()?;
    let tasks: Vec<_> = meta.tasks.iter().map(|t| t.finite()).collect();
    if tasks.len() < 2 {
        return Err(Error::InvalidArgument(format!("meta-training needs at least 2 tasks, got {}", tasks.len())));
    }
    if let Some(t) = tasks.iter().find(|t| t.len() < 2) {
        return Err(Error::InvalidArgument(format!("task {} has fewer than 2 finite observations", t.task_id)));
    }
    let input_dim = tasks[0].obs[0].x.len();
    let n_tasks = tasks.len();
    let arch = cfg.architecture(input_dim);

    let mut train_items = Vec::new();
    let mut val_items = Vec::new();
    let mut degenerate = Vec::new();
    for (t, task) in tasks.iter().enumerate() {
        let labeled = LabeledSet::from_quantile(&task.ys(), cfg.gamma)?;
        if labeled.is_degenerate() {
            degenerate.push(task.task_id);
        }
        let weights = labeled.scaled_weights(cfg.weight_scaling);
        let mut idx: Vec<usize> = (0..task.len()).collect();
        idx.shuffle(&mut stream(cfg.seed, "meta-split", t as u64));
        let n_val = ((task.len() as f64 * cfg.validation_fraction).round() as usize).min(task.len() - 1);
        for (k, &i) in idx.iter().enumerate() {
            let o = &task.obs[i];
            if o.x.len() != input_dim {
                return Err(Error::Arity { expected: input_dim, got: o.x.len() });
            }
            let item = (t, o.x.as_slice(), weights[i]);
            if k < n_val {
                val_items.push(item);
            } else {
                train_items.push(item);
            }
        }
    }
    let train = Examples::new(input_dim, n_tasks, &train_items)?;
    let val = Examples::new(input_dim, n_tasks, &val_items)?;

    let (lambda_ks, lambda_cov) = calibrate_coefficients(n_tasks, cfg.feature_dim, derive_seed(cfg.seed, "calibrate", 0))?;
    let objective = MetaObjective::new(arch, n_tasks, &train, cfg.lambda, lambda_ks, lambda_cov);
    let val_objective = MetaObjective::new(arch, n_tasks, &val, cfg.lambda, lambda_ks, lambda_cov);

    let mut init_rng = stream(cfg.seed, "meta-init", 0);
    let omega = arch.init_params(&mut init_rng);
    let mut params = omega.as_slice().to_vec();
    params.extend((0..n_tasks * cfg.feature_dim).map(|_| -> f64 { StandardNormal.sample(&mut init_rng) }));

    let mut batches = Batches {
        objective: &objective,
        order: (0..train.len()).collect(),
        batch: cfg.batch,
        rng: stream(cfg.seed, "meta-batches", 0),
    };
    let (validate, early) = if val.is_empty() {
        (None, None)
    } else {
        (Some(|p: &[f64]| val_objective.evaluate(p, None, 1.0, None)), Some(EarlyStopping { patience: cfg.patience }))
    };
    let adam = adam_run(&mut params, &cfg.adam, cfg.epochs, &mut batches, validate, early)?;
    let final_train_loss = objective.evaluate(&params, None, 1.0, None);

    let n_omega = omega.len();
    let mut omega = omega;
    omega.as_mut_slice().copy_from_slice(&params[..n_omega]);
    let z = params[n_omega..].to_vec();
    let model = MetaModel::from_parts(
        cfg.clone(),
        input_dim,
        omega,
        z,
        tasks.iter().map(|t| t.task_id).collect(),
        lambda_ks,
        lambda_cov,
    )?;
    let report = TrainReport {
        adam,
        n_params: n_omega,
        n_train: train.len(),
        n_validation: val.len(),
        degenerate_tasks: degenerate,
        lambda_ks,
        lambda_cov,
        final_train_loss,
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Observation, TaskDataset};
    use crate::optim::AdamConfig;
    use crate::stats::softplus;
    use rand::{Rng as _, SeedableRng};

    fn small_cfg(epochs: usize) -> MetaModelConfig {
        MetaModelConfig {
            feature_dim: 4,
            hidden_units: 16,
            hidden_layers: 2,
            epochs,
            batch: 32,
            seed: 3,
            adam: AdamConfig { lr: 3e-3, ..Default::default() },
            ..Default::default()
        }
    }

    fn shifted_quadratics(n_tasks: usize, n: usize, seed: u64) -> MetaDataset {
        let mut rng = crate::rng::Rng::seed_from_u64(seed);
        let tasks = (0..n_tasks)
            .map(|t| {
                let b: f64 = rng.random_range(0.2..0.8);
                let obs = (0..n)
                    .map(|_| {
                        let x: f64 = rng.random();
                        Observation::new(vec![x], (x - b).powi(2))
                    })
                    .collect();
                TaskDataset::new(t as u64, obs)
            })
            .collect();
        MetaDataset::new(tasks).unwrap()
    }

    #[test]
    fn rejects_too_few_tasks_or_observations() {
        let one = shifted_quadratics(1, 10, 0);
        assert!(meta_train(&one, &small_cfg(1)).is_err());
        let tiny = shifted_quadratics(3, 1, 0);
        assert!(meta_train(&tiny, &small_cfg(1)).is_err());
    }

    #[test]
    fn retraining_is_deterministic() {
        let meta = shifted_quadratics(3, 40, 1);
        let (a, ra) = meta_train(&meta, &small_cfg(20)).unwrap();
        let (b, rb) = meta_train(&meta, &small_cfg(20)).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra.final_train_loss, rb.final_train_loss);
    }

    #[test]
    fn loss_decreases_over_first_epochs() {
        let meta = shifted_quadratics(4, 60, 2);
        let cfg = MetaModelConfig { validation_fraction: 0.0, ..small_cfg(50) };
        let (_, report) = meta_train(&meta, &cfg).unwrap();
        let l = &report.adam.train_losses;
        assert_eq!(l.len(), 50);
        assert!(l[49] < l[0], "{} -> {}", l[0], l[49]);
    }

    #[test]
    fn identical_tasks_get_nearby_embeddings() {
        let base = shifted_quadratics(1, 80, 4).tasks.remove(0);
        let other = shifted_quadratics(6, 80, 5);
        let mut tasks = vec![base.clone(), TaskDataset::new(100, base.obs.clone())];
        tasks.extend(other.tasks.into_iter().map(|mut t| {
            t.task_id += 1;
            t
        }));
        let meta = MetaDataset::new(tasks).unwrap();
        let cfg = MetaModelConfig { validation_fraction: 0.0, ..small_cfg(300) };
        let (model, _) = meta_train(&meta, &cfg).unwrap();
        let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
        let twin = dist(model.embedding(0), model.embedding(1));
        let mut spread = 0.0;
        let mut pairs = 0.0;
        for i in 0..model.n_tasks() {
            for j in i + 1..model.n_tasks() {
                spread += dist(model.embedding(i), model.embedding(j));
                pairs += 1.0;
            }
        }
        assert!(twin < spread / pairs, "twin {twin} vs mean pairwise {}", spread / pairs);
    }

    #[test]
    fn degenerate_tasks_are_flagged() {
        let mut meta = shifted_quadratics(3, 20, 6);
        meta.tasks[1].obs.iter_mut().for_each(|o| o.y = 2.0);
        let (_, report) = meta_train(&meta, &small_cfg(2)).unwrap();
        assert_eq!(report.degenerate_tasks, vec![1]);
    }

    #[test]
    fn single_task_without_regularizer_is_the_weighted_classification_loss() {
        let meta = shifted_quadratics(1, 30, 7);
        let task = &meta.tasks[0];
        let labeled = LabeledSet::from_quantile(&task.ys(), 1.0 / 3.0).unwrap();
        let cfg = small_cfg(0);
        let arch = cfg.architecture(1);
        let items: Vec<(usize, &[f64], f64)> =
            task.obs.iter().zip(&labeled.weights).map(|(o, w)| (0, o.x.as_slice(), *w)).collect();
        let ex = Examples::new(1, 1, &items).unwrap();
        let obj = MetaObjective::new(arch, 1, &ex, 0.0, 1.0, 1.0);
        let mut rng = crate::rng::Rng::seed_from_u64(0);
        let mut params = arch.init_params(&mut rng).as_slice().to_vec();
        let z: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        params.extend(&z);
        let model = MetaModel::from_parts(cfg, 1, {
            let mut o = arch.init_params(&mut crate::rng::Rng::seed_from_u64(0));
            o.as_mut_slice().copy_from_slice(&params[..arch.n_params()]);
            o
        }, z.clone(), vec![0], 1.0, 1.0)
        .unwrap();
        let direct: f64 = task
            .obs
            .iter()
            .zip(&labeled.weights)
            .map(|(o, w)| {
                let s = model.logit(&o.x, &z).unwrap();
                w * softplus(-s) + softplus(s)
            })
            .sum::<f64>()
            / task.len() as f64;
        let got = obj.evaluate(&params, None, 1.0, None);
        assert!((got - direct).abs() < 1e-12 * direct, "{got} vs {direct}");
    }
}
