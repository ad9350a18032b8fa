//! Benchmark problems: synthetic function ensembles, multiplicative noise,
//! meta-dataset sampling and enumerated tabular benchmarks.

mod functions;
mod tabular;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use functions::{parameter_ranges, Family, SyntheticFunction, HARTMANN3_A, HARTMANN3_ALPHA, HARTMANN3_P};
pub use tabular::TabularBenchmark;

use crate::data::{MetaDataset, Observation, TaskDataset};
use crate::Result;

/// Multiplicative observation noise `y·(1 + ε·n)`, `n ~ N(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub epsilon: f64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        NoiseSpec { epsilon: 0.0 }
    }
}

/// Applies multiplicative noise. With `ε = 0` the value is returned
/// unchanged and no random number is drawn.
pub fn apply_noise<R: Rng + ?Sized>(y: f64, noise: NoiseSpec, rng: &mut R) -> f64 {
    if noise.epsilon == 0.0 {
        return y;
    }
    let n: f64 = StandardNormal.sample(rng);
    y * (1.0 + noise.epsilon * n)
}

/// A sampled synthetic task with estimated extrema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledTask {
    pub function: SyntheticFunction,
    /// Grid-plus-local-search estimates, not certified bounds.
    pub f_min: f64,
    pub f_max: f64,
}

/// Draws a task from `family` and estimates its extrema.
pub fn sample_task<R: Rng + ?Sized>(family: Family, rng: &mut R) -> SampledTask {
    let function = family.sample(rng);
    let (f_min, f_max) = function.extrema();
    SampledTask { function, f_min, f_max }
}

/// `n_tasks` fresh members of `family`, each observed at `n_obs` uniform
/// points with noise.
pub fn sample_meta_dataset<R: Rng + ?Sized>(family: Family, n_tasks: usize, n_obs: usize, noise: NoiseSpec, rng: &mut R) -> Result<MetaDataset> {
    let dim = family.dim();
    let tasks = (0..n_tasks)
        .map(|t| {
            let f = family.sample(rng);
            let obs = (0..n_obs)
                .map(|_| {
                    let x: Vec<f64> = (0..dim).map(|_| rng.random()).collect();
                    let y = apply_noise(f.eval(&x), noise, rng);
                    Observation::new(x, y)
                })
                .collect();
            TaskDataset::new(t as u64, obs)
        })
        .collect();
    MetaDataset::new(tasks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_noise_is_identity() {
        let mut rng = crate::rng::Rng::seed_from_u64(0);
        assert_eq!(apply_noise(3.25, NoiseSpec::none(), &mut rng), 3.25);
    }

    #[test]
    fn noise_moments() {
        let mut rng = crate::rng::Rng::seed_from_u64(1);
        let (y, eps, n) = (2.5, 0.4, 1_000_000);
        let draws: Vec<f64> = (0..n).map(|_| apply_noise(y, NoiseSpec { epsilon: eps }, &mut rng)).collect();
        let (mean, se) = crate::stats::mean_stderr(&draws);
        assert!((mean - y).abs() < 3.0 * se);
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let want = (eps * y).powi(2);
        assert!((var - want).abs() < 0.05 * want);
    }

    #[test]
    fn meta_dataset_shape_and_determinism() {
        let make = || sample_meta_dataset(Family::Forrester, 128, 128, NoiseSpec::none(), &mut crate::rng::Rng::seed_from_u64(5)).unwrap();
        let a = make();
        assert_eq!(a.n_tasks(), 128);
        assert!(a.tasks.iter().all(|t| t.len() == 128));
        assert!(a.tasks.iter().flat_map(|t| &t.obs).all(|o| (0.0..=1.0).contains(&o.x[0])));
        assert_eq!(a, make());
    }

    #[test]
    fn sampled_task_extrema_are_ordered() {
        let t = sample_task(Family::Quadratic, &mut crate::rng::Rng::seed_from_u64(2));
        assert!(t.f_min < t.f_max);
    }
}
