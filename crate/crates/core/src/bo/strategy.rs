use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{argmax_first, BoHistory, ProposalKind, Sampler, DEFAULT_CANDIDATES};
use crate::adapt::{thompson_sample, AdaptConfig, AdaptProblem, TaskPosterior};
use crate::data::{BoundingBox, LabeledSet, SearchSpace};
use crate::gbt::{ConstantLogit, GbtConfig, GbtEnsemble, MetaLogit};
use crate::meta::MetaModel;
use crate::rng::stream;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LfboConfig {
    pub gbt: GbtConfig,
    pub gamma: f64,
    /// Uniformly random proposals before the classifier is used.
    pub n_init: usize,
    pub n_candidates: usize,
}

impl Default for LfboConfig {
    fn default() -> Self {
        LfboConfig { gbt: GbtConfig::default(), gamma: 1.0 / 3.0, n_init: 10, n_candidates: DEFAULT_CANDIDATES }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaliboConfig {
    pub gbt: GbtConfig,
    pub adapt: AdaptConfig,
    /// The last iteration that uses Thompson sampling alone.
    pub warmup_ts: usize,
    pub n_candidates: usize,
}

impl Default for MaliboConfig {
    fn default() -> Self {
        MaliboConfig { gbt: GbtConfig::default(), adapt: AdaptConfig::default(), warmup_ts: 5, n_candidates: DEFAULT_CANDIDATES }
    }
}

/// An optimisation strategy.
#[derive(Debug, Clone)]
pub enum Strategy {
    RandomSearch,
    Lfbo(LfboConfig),
    /// LFBO restricted to a box around the best meta-task points.
    LfboBb(LfboConfig, BoundingBox),
    Malibo(Arc<MetaModel>, MaliboConfig),
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::RandomSearch => "random",
            Strategy::Lfbo(_) => "lfbo",
            Strategy::LfboBb(..) => "lfbo_bb",
            Strategy::Malibo(..) => "malibo",
        }
    }

    pub(crate) fn check(&self, space: &SearchSpace) -> Result<()> {
        match self {
            Strategy::Malibo(m, _) if m.input_dim() != space.encoded_dim() => {
                Err(Error::Arity { expected: space.encoded_dim(), got: m.input_dim() })
            }
            Strategy::LfboBb(_, b) if b.dim() != space.encoded_dim() => Err(Error::Arity { expected: space.encoded_dim(), got: b.dim() }),
            _ => Ok(()),
        }
    }
}

/// A proposed point.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub x: Vec<f64>,
    pub kind: ProposalKind,
    pub fallback: bool,
}

/// The next point of `strategy` given `history`.
pub fn propose<R: Rng + ?Sized>(history: &BoHistory, space: &SearchSpace, strategy: &Strategy, rng: &mut R) -> Result<Proposal> {
    match strategy {
        Strategy::RandomSearch => Ok(Proposal { x: space.sample_uniform(rng), kind: ProposalKind::Random, fallback: false }),
        Strategy::Lfbo(cfg) => propose_lfbo(history, Sampler::Space(space), cfg, rng),
        Strategy::LfboBb(cfg, b) => propose_lfbo(history, Sampler::Box(space, b), cfg, rng),
        Strategy::Malibo(model, cfg) => propose_malibo(history, model, space, cfg, rng),
    }
}

/// LFBO: random points for the first `n_init` iterations, then the argmax
/// of a boosted classifier started from the prior logit `ln(γ/(1 − γ))`.
pub fn propose_lfbo<R: Rng + ?Sized>(history: &BoHistory, sampler: Sampler, cfg: &LfboConfig, rng: &mut R) -> Result<Proposal> {
    let data = history.dataset();
    if history.next_iteration() <= cfg.n_init || data.is_empty() {
        return Ok(Proposal { x: sampler.sample(rng), kind: ProposalKind::Random, fallback: false });
    }
    let labeled = LabeledSet::from_quantile(&data.ys(), cfg.gamma)?;
    let xs: Vec<Vec<f64>> = data.obs.into_iter().map(|o| o.x).collect();
    let prior = (cfg.gamma / (1.0 - cfg.gamma)).ln();
    let ens = GbtEnsemble::fit(&xs, &labeled, ConstantLogit(prior), &cfg.gbt)?;
    let cands = sampler.candidates(cfg.n_candidates.max(1), rng);
    let scores = ens.predict_logits(&cands);
    let x = cands[argmax_first(&scores)].clone();
    Ok(Proposal { x, kind: ProposalKind::Gb, fallback: false })
}

/// Laplace posterior of the target embedding, falling back to the prior
/// when the precision cannot be factorised.
fn posterior(model: &MetaModel, history: &BoHistory, cfg: &MaliboConfig) -> Result<(TaskPosterior, bool)> {
    let problem = AdaptProblem::new(model, &history.dataset(), &cfg.adapt)?;
    let map = problem.map_estimate(&cfg.adapt.lbfgs);
    Ok(match problem.laplace(map.z) {
        Ok(p) => (p, false),
        Err(_) => (TaskPosterior::prior(model.feature_dim()), true),
    })
}

/// Argmax of the meta logit at embedding `z` (plus an optional residual)
/// over fresh candidates.
fn maximize_meta<R: Rng + ?Sized>(
    model: &MetaModel,
    z: &[f64],
    residual: Option<&dyn Fn(&[f64]) -> f64>,
    space: &SearchSpace,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let cands = Sampler::Space(space).candidates(n.max(1), rng);
    let phi = model.features_batch(&cands)?;
    let scores: Vec<f64> = phi
        .column_iter()
        .zip(&cands)
        .map(|(c, x)| model.logit_from_features(c.as_slice(), z) + residual.map_or(0.0, |r| r(x)))
        .collect();
    Ok(cands[argmax_first(&scores)].clone())
}

/// MALIBO: the mean-prediction maximiser first, then Thompson samples of
/// the adapted embedding, adding a boosted residual after `warmup_ts`
/// iterations once both classes are present.
pub fn propose_malibo<R: Rng + ?Sized>(history: &BoHistory, model: &MetaModel, space: &SearchSpace, cfg: &MaliboConfig, rng: &mut R) -> Result<Proposal> {
    let d = model.feature_dim();
    if history.is_empty() {
        // independent of the run: candidates come from a stream fixed by the model
        let mut fixed = stream(model.config().seed, "malibo-init", 0);
        let x = maximize_meta(model, &vec![0.0; d], None, space, cfg.n_candidates, &mut fixed)?;
        return Ok(Proposal { x, kind: ProposalKind::Init, fallback: false });
    }
    let (post, fallback) = posterior(model, history, cfg)?;
    let z = thompson_sample(&post, rng);

    let data = history.dataset();
    let labeled = if data.is_empty() { None } else { Some(LabeledSet::from_quantile(&data.ys(), cfg.adapt.gamma)?) };
    let boost = history.next_iteration() > cfg.warmup_ts && labeled.as_ref().is_some_and(LabeledSet::has_both_classes);
    if !boost {
        let x = maximize_meta(model, &z, None, space, cfg.n_candidates, rng)?;
        return Ok(Proposal { x, kind: ProposalKind::Ts, fallback });
    }
    let labeled = labeled.unwrap();
    let xs: Vec<Vec<f64>> = data.obs.iter().map(|o| o.x.clone()).collect();
    let base = MetaLogit { model, z: &z };
    let ens = GbtEnsemble::fit_early_stopped(&xs, &labeled, base, &cfg.gbt, rng)?;
    let residual = |x: &[f64]| ens.residual(x);
    let x = maximize_meta(model, &z, Some(&residual), space, cfg.n_candidates, rng)?;
    Ok(Proposal { x, kind: ProposalKind::TsGb, fallback })
}

/// `q` points from independent Thompson samples of one posterior.
pub fn propose_parallel_ts<R: Rng + ?Sized>(
    history: &BoHistory,
    model: &MetaModel,
    space: &SearchSpace,
    q: usize,
    cfg: &MaliboConfig,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    if q == 0 {
        return Err(Error::InvalidArgument("batch size q must be at least 1".into()));
    }
    let (post, _) = posterior(model, history, cfg)?;
    (0..q)
        .map(|_| {
            let z = thompson_sample(&post, rng);
            maximize_meta(model, &z, None, space, cfg.n_candidates, rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bo::run_bo;
    use crate::data::bounding_box;
    use crate::bench::{sample_meta_dataset, Family, NoiseSpec};
    use crate::meta::{meta_train, MetaModelConfig};
    use crate::optim::AdamConfig;
    use rand::SeedableRng;

    fn quadratic(x: &[f64]) -> f64 {
        (x[0] - 0.3).powi(2)
    }

    fn small_model() -> Arc<MetaModel> {
        let meta = sample_meta_dataset(Family::Quadratic, 8, 40, NoiseSpec::none(), &mut crate::rng::Rng::seed_from_u64(0)).unwrap();
        let cfg = MetaModelConfig {
            feature_dim: 4,
            hidden_units: 16,
            hidden_layers: 2,
            epochs: 30,
            batch: 64,
            adam: AdamConfig { lr: 3e-3, ..Default::default() },
            ..Default::default()
        };
        Arc::new(meta_train(&meta, &cfg).unwrap().0)
    }

    fn fast_malibo(model: Arc<MetaModel>) -> Strategy {
        Strategy::Malibo(model, MaliboConfig { n_candidates: 512, ..Default::default() })
    }

    #[test]
    fn lfbo_starts_random_and_is_deterministic() {
        let space = SearchSpace::unit(1);
        let s = Strategy::Lfbo(LfboConfig { n_candidates: 512, ..Default::default() });
        let a = run_bo(quadratic, &space, &s, 14, 2).unwrap();
        assert!(a.records[..10].iter().all(|r| r.kind == ProposalKind::Random));
        assert!(a.records[10..].iter().all(|r| r.kind == ProposalKind::Gb));
        assert_eq!(a, run_bo(quadratic, &space, &s, 14, 2).unwrap());
    }

    #[test]
    fn lfbo_solves_a_quadratic() {
        let space = SearchSpace::unit(1);
        let s = Strategy::Lfbo(LfboConfig::default());
        let mut hits = 0;
        for seed in 0..20 {
            let h = run_bo(quadratic, &space, &s, 50, seed).unwrap();
            let best = h.records.iter().min_by(|a, b| a.y.total_cmp(&b.y)).unwrap();
            if (best.x[0] - 0.3).abs() < 0.05 {
                hits += 1;
            }
        }
        assert!(hits >= 18, "{hits}/20");
    }

    #[test]
    fn lfbo_bb_stays_in_the_box() {
        let meta = sample_meta_dataset(Family::Forrester, 6, 30, NoiseSpec::none(), &mut crate::rng::Rng::seed_from_u64(3)).unwrap();
        let b = bounding_box(&meta, 1).unwrap();
        let space = SearchSpace::unit(1);
        let s = Strategy::LfboBb(LfboConfig { n_candidates: 256, n_init: 3, ..Default::default() }, b.clone());
        let h = run_bo(quadratic, &space, &s, 8, 0).unwrap();
        assert!(h.records.iter().all(|r| b.contains(&r.x)));
    }

    #[test]
    fn malibo_schedule_and_first_point() {
        let model = small_model();
        let space = SearchSpace::unit(1);
        let s = fast_malibo(model.clone());
        let a = run_bo(quadratic, &space, &s, 8, 1).unwrap();
        let kinds: Vec<_> = a.records.iter().map(|r| r.kind).collect();
        assert_eq!(kinds[0], ProposalKind::Init);
        assert!(kinds[1..5].iter().all(|k| *k == ProposalKind::Ts));
        assert!(kinds[5..].iter().all(|k| *k == ProposalKind::TsGb));
        // the first point ignores both the seed and the objective
        let b = run_bo(|x| -x[0], &space, &s, 1, 99).unwrap();
        assert_eq!(a.records[0].x, b.records[0].x);
        assert_eq!(a, run_bo(quadratic, &space, &s, 8, 1).unwrap());
    }

    #[test]
    fn collapsed_posterior_sample_is_the_map_maximiser() {
        let model = small_model();
        let space = SearchSpace::unit(1);
        let z = vec![0.2, -0.1, 0.4, 0.0];
        let post = TaskPosterior::new(z.clone(), nalgebra::DMatrix::identity(4, 4) * 1e16).unwrap();
        let mut r1 = crate::rng::Rng::seed_from_u64(5);
        let mut r2 = r1.clone();
        let zs = thompson_sample(&post, &mut r1);
        let a = maximize_meta(&model, &zs, None, &space, 512, &mut r1).unwrap();
        let _ = thompson_sample(&post, &mut r2);
        let b = maximize_meta(&model, &z, None, &space, 512, &mut r2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn parallel_ts_with_one_sample_matches_ts_branch() {
        let model = small_model();
        let space = SearchSpace::unit(1);
        let cfg = MaliboConfig { n_candidates: 512, ..Default::default() };
        let mut h = BoHistory::new();
        for (i, x) in [0.1, 0.5, 0.9].iter().enumerate() {
            h.push(vec![*x], quadratic(&[*x]), if i == 0 { ProposalKind::Init } else { ProposalKind::Ts }, false);
        }
        let mut r1 = crate::rng::Rng::seed_from_u64(8);
        let mut r2 = r1.clone();
        let single = propose_parallel_ts(&h, &model, &space, 1, &cfg, &mut r1).unwrap();
        let ts = propose_malibo(&h, &model, &space, &cfg, &mut r2).unwrap();
        assert_eq!(ts.kind, ProposalKind::Ts);
        assert_eq!(single[0], ts.x);
        let three = propose_parallel_ts(&h, &model, &space, 3, &cfg, &mut r1).unwrap();
        assert_eq!(three.len(), 3);
        assert!(propose_parallel_ts(&h, &model, &space, 0, &cfg, &mut r1).is_err());
    }

    #[test]
    fn model_dimension_is_checked() {
        let model = small_model();
        assert!(run_bo(|x| x[0], &SearchSpace::unit(2), &fast_malibo(model), 2, 0).is_err());
    }

    #[test]
    fn affine_transform_leaves_proposals_unchanged() {
        let space = SearchSpace::unit(1);
        let model = small_model();
        for s in [Strategy::Lfbo(LfboConfig { n_candidates: 1024, ..Default::default() }), fast_malibo(model)] {
            let a = run_bo(quadratic, &space, &s, 20, 4).unwrap();
            let b = run_bo(|x| 2.0 * quadratic(x) + 7.0, &space, &s, 20, 4).unwrap();
            let xa: Vec<_> = a.records.iter().map(|r| r.x.clone()).collect();
            let xb: Vec<_> = b.records.iter().map(|r| r.x.clone()).collect();
            assert_eq!(xa, xb, "{}", s.name());
        }
    }
}
