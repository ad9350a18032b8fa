use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// ADAM hyperparameters with per-epoch exponential learning-rate decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// The learning rate at epoch `e` is `lr · decay_per_epoch^e`.
    pub decay_per_epoch: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, decay_per_epoch: 0.999 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.decay_per_epoch > 0.0
            && self.decay_per_epoch <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid ADAM config {self:?}")))
        }
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr * self.decay_per_epoch.powi(epoch as i32)
    }
}

/// ADAM moment state for one parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(cfg: AdamConfig, n_params: usize) -> Self {
        Adam { cfg, m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let AdamConfig { beta1, beta2, eps, .. } = self.cfg;
        let bc1 = 1.0 - beta1.powi(self.t);
        let bc2 = 1.0 - beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

/// A source of minibatch losses and gradients.
///
/// Implementations must be deterministic: given the same construction seed
/// they yield the same batches in the same order.
pub trait Minibatches {
    /// Prepares epoch `epoch` (e.g. reshuffles) and returns its batch count.
    fn begin_epoch(&mut self, epoch: usize) -> usize;

    /// Loss of batch `index` at `params`; the gradient is written to `grad`.
    fn loss_grad(&mut self, index: usize, params: &[f64], grad: &mut [f64]) -> f64;
}

/// Stop once the validation loss has not improved for `patience` epochs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EarlyStopping {
    pub patience: usize,
}

/// Summary of an [`adam_run`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AdamReport {
    pub epochs_run: usize,
    /// Epoch whose parameters were returned.
    pub best_epoch: usize,
    pub best_validation: Option<f64>,
    /// Mean minibatch loss per epoch.
    pub train_losses: Vec<f64>,
    pub validation_losses: Vec<f64>,
    pub stopped_early: bool,
}

/// Runs ADAM for up to `epochs` epochs.
///
/// With a validation function, `params` is left at the best-validation
/// iterate (evaluated after every epoch) and `early_stop` may end training
/// sooner; otherwise the final iterate is kept.
pub fn adam_run<M, V>(
    params: &mut [f64],
    cfg: &AdamConfig,
    epochs: usize,
    batches: &mut M,
    mut validate: Option<V>,
    early_stop: Option<EarlyStopping>,
) -> Result<AdamReport>
where
    M: Minibatches + ?Sized,
    V: FnMut(&[f64]) -> f64,
{
    cfg.validate()?;
    let mut adam = Adam::new(*cfg, params.len());
    let mut grad = vec![0.0; params.len()];
    let mut report = AdamReport::default();
    let mut best_params = params.to_vec();
    let mut best_val = f64::INFINITY;
    let mut since_best = 0;

    for epoch in 0..epochs {
        let lr = cfg.lr_at(epoch);
        let n = batches.begin_epoch(epoch);
        let mut total = 0.0;
        for b in 0..n {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let loss = batches.loss_grad(b, params, &mut grad);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch, loss });
            }
            total += loss;
            adam.step(params, &grad, lr);
        }
        report.train_losses.push(if n > 0 { total / n as f64 } else { 0.0 });
        report.epochs_run = epoch + 1;

        if let Some(val) = validate.as_mut() {
            let v = val(params);
            if !v.is_finite() {
                return Err(Error::Diverged { epoch, loss: v });
            }
            report.validation_losses.push(v);
            if v < best_val {
                best_val = v;
                best_params.copy_from_slice(params);
                report.best_epoch = epoch;
                since_best = 0;
            } else {
                since_best += 1;
                if early_stop.is_some_and(|es| since_best >= es.patience) {
                    report.stopped_early = true;
                    break;
                }
            }
        } else {
            report.best_epoch = epoch;
        }
    }

    if validate.is_some() && best_val.is_finite() {
        params.copy_from_slice(&best_params);
        report.best_validation = Some(best_val);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// ‖p − c‖² split into noisy halves so batches matter.
    struct Quadratic {
        target: Vec<f64>,
        rng: crate::rng::Rng,
        order: [usize; 2],
    }

    impl Minibatches for Quadratic {
        fn begin_epoch(&mut self, _epoch: usize) -> usize {
            if self.rng.random::<bool>() {
                self.order.swap(0, 1);
            }
            2
        }

        fn loss_grad(&mut self, index: usize, p: &[f64], g: &mut [f64]) -> f64 {
            let half = self.order[index];
            let mut loss = 0.0;
            for i in 0..p.len() {
                if i % 2 == half {
                    let d = p[i] - self.target[i];
                    loss += d * d;
                    g[i] = 2.0 * d;
                }
            }
            loss
        }
    }

    fn quadratic(seed: u64) -> Quadratic {
        Quadratic {
            target: vec![0.7, -0.4, 1.2, 0.05],
            rng: crate::rng::Rng::seed_from_u64(seed),
            order: [0, 1],
        }
    }

    #[test]
    fn converges_to_closed_form_optimum() {
        let cfg = AdamConfig { lr: 0.05, decay_per_epoch: 0.995, ..Default::default() };
        let mut p = vec![0.0; 4];
        let mut q = quadratic(1);
        let report = adam_run(&mut p, &cfg, 500, &mut q, None::<fn(&[f64]) -> f64>, None).unwrap();
        assert_eq!(report.epochs_run, 500);
        let dist: f64 = p.iter().zip(&q.target).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(dist < 1e-3, "distance {dist}");
    }

    #[test]
    fn unit_decay_keeps_rate_constant() {
        let cfg = AdamConfig { decay_per_epoch: 1.0, ..Default::default() };
        assert!((0..100).all(|e| cfg.lr_at(e) == cfg.lr));
        let cfg = AdamConfig::default();
        assert!((cfg.lr_at(10) - 1e-3 * 0.999f64.powi(10)).abs() < 1e-18);
    }

    #[test]
    fn identical_seeds_give_identical_trajectories() {
        let cfg = AdamConfig { lr: 0.01, ..Default::default() };
        let run = |seed| {
            let mut p = vec![0.0; 4];
            let mut traj = Vec::new();
            let mut q = quadratic(seed);
            adam_run(&mut p, &cfg, 50, &mut q, Some(|p: &[f64]| { traj.push(p.to_vec()); 0.0 }), None).unwrap();
            traj
        };
        assert_eq!(run(3), run(3));
    }

    #[test]
    fn early_stopping_restores_best_parameters() {
        let cfg = AdamConfig { lr: 0.05, ..Default::default() };
        let mut p = vec![0.0; 4];
        let mut q = quadratic(0);
        // Validation prefers p[0] close to 0.3, which training overshoots.
        let report = adam_run(
            &mut p,
            &cfg,
            1000,
            &mut q,
            Some(|p: &[f64]| (p[0] - 0.3).abs()),
            Some(EarlyStopping { patience: 5 }),
        )
        .unwrap();
        assert!(report.stopped_early);
        assert!(report.epochs_run < 1000);
        assert_eq!(report.best_validation, Some(report.validation_losses[report.best_epoch]));
        assert!((p[0] - 0.3).abs() <= report.best_validation.unwrap() + 1e-15);
    }

    #[test]
    fn divergence_reports_epoch() {
        struct Nan;
        impl Minibatches for Nan {
            fn begin_epoch(&mut self, _: usize) -> usize {
                1
            }
            fn loss_grad(&mut self, _: usize, p: &[f64], g: &mut [f64]) -> f64 {
                g[0] = 1.0;
                if p[0] < -0.002 { f64::NAN } else { p[0] }
            }
        }
        let mut p = vec![0.0];
        let err = adam_run(&mut p, &AdamConfig::default(), 100, &mut Nan, None::<fn(&[f64]) -> f64>, None);
        match err {
            Err(Error::Diverged { epoch, .. }) => assert!(epoch > 0),
            other => panic!("{other:?}"),
        }
    }
}
