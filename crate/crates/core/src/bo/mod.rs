//! Optimisation strategies and the random-search acquisition maximiser.

mod strategy;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use strategy::{propose, propose_lfbo, propose_malibo, propose_parallel_ts, LfboConfig, MaliboConfig, Proposal, Strategy};

use crate::data::{incumbent_trace, BoundingBox, Observation, SearchSpace, TaskDataset};
use crate::rng::stream;
use crate::{Error, Result};

/// Candidates scored per acquisition maximisation.
pub const DEFAULT_CANDIDATES: usize = 5120;

/// How a point was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProposalKind {
    /// Maximiser of the task-agnostic mean prediction.
    #[serde(rename = "init")]
    Init,
    /// Maximiser of a Thompson-sampled acquisition.
    #[serde(rename = "ts")]
    Ts,
    /// Thompson sample plus boosted residual.
    #[serde(rename = "ts+gb")]
    TsGb,
    /// Classifier without meta-knowledge.
    #[serde(rename = "gb")]
    Gb,
    #[serde(rename = "random")]
    Random,
}

impl ProposalKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProposalKind::Init => "init",
            ProposalKind::Ts => "ts",
            ProposalKind::TsGb => "ts+gb",
            ProposalKind::Gb => "gb",
            ProposalKind::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoRecord {
    pub x: Vec<f64>,
    pub y: f64,
    /// 1-based.
    pub iteration: usize,
    pub kind: ProposalKind,
    /// A fallback was taken (e.g. the posterior could not be factorised).
    pub fallback: bool,
}

/// Ordered evaluations of one run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BoHistory {
    pub records: Vec<BoRecord>,
}

impl BoHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Iteration number of the next proposal.
    pub fn next_iteration(&self) -> usize {
        self.records.len() + 1
    }

    pub fn push(&mut self, x: Vec<f64>, y: f64, kind: ProposalKind, fallback: bool) {
        let iteration = self.next_iteration();
        self.records.push(BoRecord { x, y, iteration, kind, fallback });
    }

    pub fn ys(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.y).collect()
    }

    /// Best value so far after each iteration; non-finite values count as +∞.
    pub fn incumbents(&self) -> Vec<f64> {
        incumbent_trace(&self.ys())
    }

    /// Finite observations, as used for model fits.
    pub fn dataset(&self) -> TaskDataset {
        TaskDataset::new(
            0,
            self.records.iter().filter(|r| r.y.is_finite()).map(|r| Observation::new(r.x.clone(), r.y)).collect(),
        )
    }
}

/// Where candidate points are drawn from.
#[derive(Debug, Clone, Copy)]
pub enum Sampler<'a> {
    Space(&'a SearchSpace),
    Box(&'a SearchSpace, &'a BoundingBox),
}

impl Sampler<'_> {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Sampler::Space(s) => s.sample_uniform(rng),
            Sampler::Box(s, b) => b.sample(s, rng),
        }
    }

    pub fn candidates<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

/// Index of the largest score; the first wins ties and NaN never wins.
pub fn argmax_first(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] || scores[best].is_nan() {
            best = i;
        }
    }
    best
}

/// Maximises `acq` over `n_samples` uniform (snapped) points of `space`.
pub fn maximize_acquisition<R: Rng + ?Sized>(acq: impl FnMut(&[f64]) -> f64, space: &SearchSpace, n_samples: usize, rng: &mut R) -> Vec<f64> {
    let cands = Sampler::Space(space).candidates(n_samples.max(1), rng);
    let scores: Vec<f64> = cands.iter().map(|c| c.as_slice()).map(acq).collect();
    cands[argmax_first(&scores)].clone()
}

/// Runs `budget` iterations of `strategy` on `objective`, seeded by `seed`.
pub fn run_bo(mut objective: impl FnMut(&[f64]) -> f64, space: &SearchSpace, strategy: &Strategy, budget: usize, seed: u64) -> Result<BoHistory> {
    if budget == 0 {
        return Err(Error::InvalidArgument("budget must be at least 1".into()));
    }
    strategy.check(space)?;
    let mut rng = stream(seed, "bo", 0);
    let mut history = BoHistory::new();
    for _ in 0..budget {
        let p = propose(&history, space, strategy, &mut rng)?;
        let y = objective(&p.x);
        history.push(p.x, y, p.kind, p.fallback);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn maximizer_finds_centre() {
        let space = SearchSpace::unit(2);
        let x = maximize_acquisition(|x| -((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)), &space, DEFAULT_CANDIDATES, &mut crate::rng::Rng::seed_from_u64(0));
        assert!((x[0] - 0.5).abs() < 0.05 && (x[1] - 0.5).abs() < 0.05);
    }

    #[test]
    fn constant_acquisition_returns_first_sample() {
        let space = SearchSpace::unit(3);
        let first = space.sample_uniform(&mut crate::rng::Rng::seed_from_u64(4));
        let x = maximize_acquisition(|_| 1.0, &space, 100, &mut crate::rng::Rng::seed_from_u64(4));
        assert_eq!(x, first);
    }

    #[test]
    fn argmax_ignores_nan_and_keeps_first_tie() {
        assert_eq!(argmax_first(&[f64::NAN, 1.0, 3.0, 3.0]), 2);
        assert_eq!(argmax_first(&[2.0, 2.0]), 0);
    }

    #[test]
    fn random_search_history() {
        let space = SearchSpace::unit(2);
        let h = run_bo(|x| x[0] + x[1], &space, &Strategy::RandomSearch, 5, 3).unwrap();
        assert_eq!(h.len(), 5);
        assert!(h.records.iter().enumerate().all(|(i, r)| r.iteration == i + 1 && r.kind == ProposalKind::Random));
        assert_eq!(h, run_bo(|x| x[0] + x[1], &space, &Strategy::RandomSearch, 5, 3).unwrap());
        assert!(run_bo(|x| x[0], &space, &Strategy::RandomSearch, 0, 3).is_err());
    }

    #[test]
    fn non_finite_values_are_kept_but_not_fitted() {
        let space = SearchSpace::unit(1);
        let mut k = 0;
        let h = run_bo(
            |x| {
                k += 1;
                if k % 3 == 0 { f64::NAN } else { x[0] }
            },
            &space,
            &Strategy::Lfbo(LfboConfig { n_init: 4, ..Default::default() }),
            12,
            1,
        )
        .unwrap();
        assert_eq!(h.len(), 12);
        assert_eq!(h.dataset().len(), 8);
        let inc = h.incumbents();
        assert!(inc.windows(2).all(|w| w[1] <= w[0]));
    }
}
