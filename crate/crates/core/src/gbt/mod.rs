//! Gradient-boosted regression trees on the weighted classification loss
//! `−Σ[w_i ln σ(s_i) + ln(1 − σ(s_i))]`, started from a pluggable base logit.
//!
//! Each stage fits a least-squares tree to the negative gradient and sets
//! every leaf to the Newton step `−Σg/Σh`. Leaf values are unregularised.
//! A leaf step that would raise the loss of its members is halved until it
//! does not, so the training loss never increases from one stage to the next.

mod tree;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use tree::{Node, Tree};

use crate::data::{LabeledSet, WeightScaling};
use crate::meta::{weighted_bce, weighted_bce_slope, MetaModel};
use crate::stats::sigmoid;
use crate::{Error, Result};
use tree::Limits;

const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtConfig {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_depth: usize,
    /// Seed of the hold-out split in [`GbtEnsemble::fit_early_stopped`].
    pub seed: u64,
    pub weight_scaling: WeightScaling,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig {
            n_estimators: 100,
            learning_rate: 0.1,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_depth: 3,
            seed: 0,
            weight_scaling: WeightScaling::default(),
        }
    }
}

impl GbtConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::InvalidArgument("n_estimators must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning_rate = {} must be positive", self.learning_rate)));
        }
        Ok(())
    }

    fn limits(&self) -> Limits {
        Limits {
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
            min_samples_leaf: self.min_samples_leaf,
        }
    }
}

/// The first learner of an ensemble.
pub trait BaseLogit {
    fn logit(&self, x: &[f64]) -> f64;

    fn logits(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        xs.iter().map(|x| self.logit(x)).collect()
    }
}

/// A constant logit, e.g. the prior `ln(γ/(1 − γ))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantLogit(pub f64);

impl BaseLogit for ConstantLogit {
    fn logit(&self, _: &[f64]) -> f64 {
        self.0
    }
}

/// The frozen meta-model logit `m(φ(x)) + zᵀφ(x)` at a fixed embedding.
#[derive(Debug, Clone, Copy)]
pub struct MetaLogit<'a> {
    pub model: &'a MetaModel,
    pub z: &'a [f64],
}

impl BaseLogit for MetaLogit<'_> {
    fn logit(&self, x: &[f64]) -> f64 {
        self.model.logit(x, self.z).expect("point dimension matches the meta-model")
    }

    fn logits(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        let phi = self.model.features_batch(xs).expect("point dimension matches the meta-model");
        phi.column_iter().map(|c| self.model.logit_from_features(c.as_slice(), self.z)).collect()
    }
}

/// A fitted ensemble `base(x) + lr·Σ_i tree_i(x)`.
#[derive(Debug, Clone)]
pub struct GbtEnsemble<B> {
    pub base: B,
    pub trees: Vec<Tree>,
    pub learning_rate: f64,
    /// Training loss after each stage; entry 0 is the base alone.
    pub train_losses: Vec<f64>,
    /// The labels were degenerate (all class 1, zero weight) and no trees
    /// were fitted.
    pub base_only: bool,
}

fn mean_loss(s: &[f64], w: &[f64]) -> f64 {
    s.iter().zip(w).map(|(s, w)| weighted_bce(*s, *w)).sum::<f64>() / s.len() as f64
}

fn check_shapes(x: &[Vec<f64>], labeled: &LabeledSet) -> Result<()> {
    if x.is_empty() {
        return Err(Error::Empty("boosting needs at least one example"));
    }
    if x.len() != labeled.len() {
        return Err(Error::Arity { expected: x.len(), got: labeled.len() });
    }
    Ok(())
}

impl<B: BaseLogit> GbtEnsemble<B> {
    /// Fits `cfg.n_estimators` stages on all examples.
    pub fn fit(x: &[Vec<f64>], labeled: &LabeledSet, base: B, cfg: &GbtConfig) -> Result<Self> {
        cfg.validate()?;
        check_shapes(x, labeled)?;
        let w = labeled.scaled_weights(cfg.weight_scaling);
        let base_only = labeled.is_degenerate();
        let n_trees = if base_only { 0 } else { cfg.n_estimators };
        Ok(Self::fit_weights(x, &w, base, cfg, n_trees, base_only))
    }

    fn fit_weights(x: &[Vec<f64>], w: &[f64], base: B, cfg: &GbtConfig, n_trees: usize, base_only: bool) -> Self {
        let lr = cfg.learning_rate;
        let mut s = base.logits(x);
        let mut losses = vec![mean_loss(&s, w)];
        let mut trees = Vec::with_capacity(n_trees);
        let mut target = vec![0.0; x.len()];
        for _ in 0..n_trees {
            for i in 0..x.len() {
                target[i] = -weighted_bce_slope(s[i], w[i]);
            }
            let (mut tree, leaves) = Tree::grow(x, &target, (0..x.len()).collect(), cfg.limits());
            for (node, members) in leaves {
                let (mut sg, mut sh) = (0.0, 0.0);
                for &i in &members {
                    let p = sigmoid(s[i]);
                    sg += (w[i] + 1.0) * p - w[i];
                    sh += (w[i] + 1.0) * p * (1.0 - p);
                }
                let mut value = if sh > f64::MIN_POSITIVE { -sg / sh } else { 0.0 };
                if !value.is_finite() {
                    value = 0.0;
                }
                let before: f64 = members.iter().map(|&i| weighted_bce(s[i], w[i])).sum();
                let mut halvings = 0;
                while value != 0.0 {
                    let after: f64 = members.iter().map(|&i| weighted_bce(s[i] + lr * value, w[i])).sum();
                    if after <= before {
                        break;
                    }
                    halvings += 1;
                    value = if halvings >= MAX_HALVINGS { 0.0 } else { value * 0.5 };
                }
                for &i in &members {
                    s[i] += lr * value;
                }
                tree.nodes[node] = Node::Leaf { value };
            }
            losses.push(mean_loss(&s, w));
            trees.push(tree);
        }
        GbtEnsemble { base, trees, learning_rate: lr, train_losses: losses, base_only }
    }

    /// Fits with the tree count chosen by [`estimate_n_trees`] on a seeded
    /// 70/30 split.
    pub fn fit_early_stopped<R: Rng + ?Sized>(x: &[Vec<f64>], labeled: &LabeledSet, base: B, cfg: &GbtConfig, rng: &mut R) -> Result<Self> {
        let n = estimate_n_trees(x, labeled, &base, cfg, 0.7, rng)?;
        Self::fit(x, labeled, base, &GbtConfig { n_estimators: n, ..cfg.clone() })
    }

    /// The boosted correction `lr·Σ_i tree_i(x)` without the base.
    pub fn residual(&self, x: &[f64]) -> f64 {
        self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn predict_logit(&self, x: &[f64]) -> f64 {
        self.base.logit(x) + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn predict_logits(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        let mut s = self.base.logits(xs);
        for (si, x) in s.iter_mut().zip(xs) {
            *si += self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>();
        }
        s
    }

    pub fn composite_probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.predict_logit(x))
    }

    /// Logits after each stage; entry 0 is the base.
    pub fn staged_logits(&self, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut s = self.base.logits(xs);
        let mut out = Vec::with_capacity(self.trees.len() + 1);
        out.push(s.clone());
        for t in &self.trees {
            for (si, x) in s.iter_mut().zip(xs) {
                *si += self.learning_rate * t.predict(x);
            }
            out.push(s.clone());
        }
        out
    }
}

/// Tree count minimising the held-out loss after fitting on a random
/// `split` fraction of the examples. Returns 1 with fewer than 4 examples.
pub fn estimate_n_trees<B: BaseLogit + ?Sized, R: Rng + ?Sized>(
    x: &[Vec<f64>],
    labeled: &LabeledSet,
    base: &B,
    cfg: &GbtConfig,
    split: f64,
    rng: &mut R,
) -> Result<usize> {
    cfg.validate()?;
    check_shapes(x, labeled)?;
    if x.len() < 4 || labeled.is_degenerate() {
        return Ok(1);
    }
    let w = labeled.scaled_weights(cfg.weight_scaling);
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.shuffle(rng);
    let n_train = ((x.len() as f64 * split).round() as usize).clamp(1, x.len() - 1);
    let (tr, va) = idx.split_at(n_train);
    let pick = |ids: &[usize]| -> (Vec<Vec<f64>>, Vec<f64>) { (ids.iter().map(|&i| x[i].clone()).collect(), ids.iter().map(|&i| w[i]).collect()) };
    let (xt, wt) = pick(tr);
    let (xv, wv) = pick(va);
    let ens = GbtEnsemble::fit_weights(&xt, &wt, BaseRef(base), cfg, cfg.n_estimators, false);
    let staged = ens.staged_logits(&xv);
    let mut best = (1, f64::INFINITY);
    for (k, s) in staged.iter().enumerate().skip(1) {
        let l = mean_loss(s, &wv);
        if l < best.1 {
            best = (k, l);
        }
    }
    Ok(best.0)
}

struct BaseRef<'a, B: ?Sized>(&'a B);

impl<B: BaseLogit + ?Sized> BaseLogit for BaseRef<'_, B> {
    fn logit(&self, x: &[f64]) -> f64 {
        self.0.logit(x)
    }

    fn logits(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        self.0.logits(xs)
    }
}
