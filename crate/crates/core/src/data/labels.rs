use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The `⌈γN⌉`-th smallest value of `ys` (an empirical γ-quantile that is
/// always one of the observed values).
///
/// Non-finite values are ordered by `f64::total_cmp`; callers are expected to
/// filter them out first.
pub fn compute_threshold(ys: &[f64], gamma: f64) -> Result<f64> {
    if ys.is_empty() {
        return Err(Error::Empty("threshold of an empty sample"));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidArgument(format!("gamma = {gamma} not in (0, 1)")));
    }
    let n = ys.len();
    // Guard against γN landing a hair above an integer, e.g. (1/3)·6.
    let rank = ((gamma * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    let mut sorted = ys.to_vec();
    let (_, nth, _) = sorted.select_nth_unstable_by(rank - 1, f64::total_cmp);
    Ok(*nth)
}

/// Binary labels `k = 1(y ≤ τ)` and improvement weights `max(τ − y, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSet {
    pub tau: f64,
    pub labels: Vec<bool>,
    pub weights: Vec<f64>,
    /// The quantile level `tau` was computed at, when known.
    pub gamma: Option<f64>,
}

/// Labels and weights `ys` against the threshold `tau`. Weights are raw
/// improvements; see [`LabeledSet::scaled_weights`] for the scale-free form.
pub fn label_and_weight(ys: &[f64], tau: f64) -> LabeledSet {
    let labels = ys.iter().map(|&y| y <= tau).collect();
    let weights = ys.iter().map(|&y| (tau - y).max(0.0)).collect();
    LabeledSet { tau, labels, weights, gamma: None }
}

/// How improvement weights are scaled before they enter a classifier loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScaling {
    /// `max(τ − y, 0)` as is.
    Raw,
    /// Divided by their mean over class-1 examples, which makes every
    /// downstream fit invariant to affine rescaling of `y`.
    #[default]
    PositiveMean,
}

impl LabeledSet {
    /// Thresholds at the γ-quantile and labels in one step.
    pub fn from_quantile(ys: &[f64], gamma: f64) -> Result<Self> {
        let tau = compute_threshold(ys, gamma)?;
        let mut set = label_and_weight(ys, tau);
        set.gamma = Some(gamma);
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_positive(&self) -> usize {
        self.labels.iter().filter(|k| **k).count()
    }

    /// True when both classes are present.
    pub fn has_both_classes(&self) -> bool {
        let p = self.n_positive();
        p > 0 && p < self.len()
    }

    /// Every label is 1 and every weight is 0, which happens when all
    /// observed values coincide.
    pub fn is_degenerate(&self) -> bool {
        self.labels.iter().all(|k| *k) && self.weights.iter().all(|w| *w == 0.0)
    }

    pub fn scaled_weights(&self, scaling: WeightScaling) -> Vec<f64> {
        match scaling {
            WeightScaling::Raw => self.weights.clone(),
            WeightScaling::PositiveMean => {
                let (sum, count) = self
                    .labels
                    .iter()
                    .zip(&self.weights)
                    .filter(|(k, _)| **k)
                    .fold((0.0, 0usize), |(s, c), (_, w)| (s + w, c + 1));
                if count == 0 || sum <= 0.0 {
                    return self.weights.clone();
                }
                let mean = sum / count as f64;
                self.weights.iter().map(|w| w / mean).collect()
            }
        }
    }
}
