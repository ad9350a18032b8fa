use rand::Rng;

use super::{MetaDataset, SearchSpace};
use crate::{Error, Result};

/// Half-width added to degenerate box sides.
pub const DEGENERATE_EXPANSION: f64 = 1e-6;

/// An axis-aligned box in encoded coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoundingBox {
    pub fn unit(dim: usize) -> Self {
        BoundingBox { lo: vec![0.0; dim], hi: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.lo.len()
            && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    /// Uniform point inside the box, snapped onto the grids of `space`.
    pub fn sample<R: Rng + ?Sized>(&self, space: &SearchSpace, rng: &mut R) -> Vec<f64> {
        let mut x: Vec<f64> = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| l + rng.random::<f64>() * (h - l))
            .collect();
        space.snap(&mut x);
        x
    }
}

/// Encoded-space hull of the `top_m` best points of every task.
///
/// Sides where min equals max are widened by [`DEGENERATE_EXPANSION`] on both
/// ends and clipped to `[0, 1]`.
pub fn bounding_box(meta: &MetaDataset, top_m: usize) -> Result<BoundingBox> {
    if meta.tasks.is_empty() {
        return Err(Error::Empty("bounding box of an empty meta-dataset"));
    }
    if top_m == 0 {
        return Err(Error::InvalidArgument("top_m must be at least 1".into()));
    }
    let dim = meta.encoded_dim().ok_or(Error::Empty("meta-dataset has no observations"))?;
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for task in &meta.tasks {
        let mut finite: Vec<_> = task.obs.iter().filter(|o| o.y.is_finite()).collect();
        if finite.len() < top_m {
            return Err(Error::InvalidArgument(format!(
                "task {} has {} finite observations, fewer than top_m = {top_m}",
                task.task_id,
                finite.len()
            )));
        }
        // stable: earlier observations win ties
        finite.sort_by(|a, b| a.y.total_cmp(&b.y));
        for o in &finite[..top_m] {
            for (j, v) in o.x.iter().enumerate() {
                lo[j] = lo[j].min(*v);
                hi[j] = hi[j].max(*v);
            }
        }
    }
    for j in 0..dim {
        if lo[j] == hi[j] {
            lo[j] = (lo[j] - DEGENERATE_EXPANSION).max(0.0);
            hi[j] = (hi[j] + DEGENERATE_EXPANSION).min(1.0);
        }
    }
    Ok(BoundingBox { lo, hi })
}
