//! Bayesian adaptation of a target-task embedding with a frozen meta-model:
//! MAP estimation, the Laplace posterior, Thompson sampling and the probit
//! predictive.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{LabeledSet, TaskDataset, WeightScaling};
use crate::meta::{weighted_bce, weighted_bce_slope, MetaModel};
use crate::optim::{lbfgs_minimize, LbfgsConfig};
use crate::stats::sigmoid;
use crate::{Error, Result};

/// Jitter levels tried, in order, when a Cholesky factorisation fails.
pub const JITTER_LEVELS: [f64; 6] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptConfig {
    pub gamma: f64,
    pub lbfgs: LbfgsConfig,
    pub weight_scaling: WeightScaling,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        AdaptConfig { gamma: 1.0 / 3.0, lbfgs: LbfgsConfig::default(), weight_scaling: WeightScaling::default() }
    }
}

/// The target-task likelihood in feature space: features `Φ_n` (columns),
/// mean logits `m_n` and improvement weights `w_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptProblem {
    pub phi: DMatrix<f64>,
    pub mean: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Outcome of [`AdaptProblem::map_estimate`].
#[derive(Debug, Clone, PartialEq)]
pub struct MapEstimate {
    pub z: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
}

impl AdaptProblem {
    /// Labels the finite observations of `data` at the γ-quantile of their
    /// values and evaluates the frozen network on them.
    pub fn new(model: &MetaModel, data: &TaskDataset, cfg: &AdaptConfig) -> Result<Self> {
        let data = data.finite();
        let d = model.feature_dim();
        if data.is_empty() {
            return Ok(AdaptProblem { phi: DMatrix::zeros(d, 0), mean: Vec::new(), weights: Vec::new() });
        }
        let labeled = LabeledSet::from_quantile(&data.ys(), cfg.gamma)?;
        let xs: Vec<&[f64]> = data.obs.iter().map(|o| o.x.as_slice()).collect();
        let phi = model.features_batch(&xs)?;
        let mean = model.mean_logits(&phi);
        Ok(AdaptProblem { phi, mean, weights: labeled.scaled_weights(cfg.weight_scaling) })
    }

    pub fn dim(&self) -> usize {
        self.phi.nrows()
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    fn logits(&self, z: &[f64]) -> DVector<f64> {
        let s = self.phi.tr_mul(&DVector::from_column_slice(z));
        s + DVector::from_column_slice(&self.mean)
    }

    /// Negative log posterior `½zᵀz + Σ_n −[w_n ln σ(s_n) + ln(1 − σ(s_n))]`.
    pub fn objective(&self, z: &[f64]) -> f64 {
        let prior = 0.5 * z.iter().map(|v| v * v).sum::<f64>();
        prior + self.logits(z).iter().zip(&self.weights).map(|(s, w)| weighted_bce(*s, *w)).sum::<f64>()
    }

    /// [`Self::objective`] with its gradient written to `grad`.
    pub fn objective_grad(&self, z: &[f64], grad: &mut [f64]) -> f64 {
        let s = self.logits(z);
        let slopes = DVector::from_iterator(s.len(), s.iter().zip(&self.weights).map(|(s, w)| weighted_bce_slope(*s, *w)));
        let g = &self.phi * slopes + DVector::from_column_slice(z);
        grad.copy_from_slice(g.as_slice());
        let prior = 0.5 * z.iter().map(|v| v * v).sum::<f64>();
        prior + s.iter().zip(&self.weights).map(|(s, w)| weighted_bce(*s, *w)).sum::<f64>()
    }

    /// Minimises the negative log posterior with L-BFGS from `z = 0`.
    pub fn map_estimate(&self, cfg: &LbfgsConfig) -> MapEstimate {
        let d = self.dim();
        if self.is_empty() {
            return MapEstimate { z: vec![0.0; d], objective: 0.0, converged: true };
        }
        let res = lbfgs_minimize(|z: &[f64], g: &mut [f64]| self.objective_grad(z, g), &vec![0.0; d], cfg);
        MapEstimate { z: res.x, objective: res.f, converged: res.converged }
    }

    /// Posterior precision `I + Σ_n (w_n + 1)σ_n(1 − σ_n)Φ_nΦ_nᵀ` at `z`.
    pub fn precision(&self, z: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        let mut lambda = DMatrix::identity(d, d);
        if self.is_empty() {
            return lambda;
        }
        let s = self.logits(z);
        let mut scaled = self.phi.clone();
        for (mut col, (s, w)) in scaled.column_iter_mut().zip(s.iter().zip(&self.weights)) {
            let p = sigmoid(*s);
            col *= (w + 1.0) * p * (1.0 - p);
        }
        lambda.gemm(1.0, &scaled, &self.phi.transpose(), 1.0);
        lambda
    }

    /// Laplace posterior around `z_map`.
    pub fn laplace(&self, z_map: Vec<f64>) -> Result<TaskPosterior> {
        let precision = self.precision(&z_map);
        TaskPosterior::new(z_map, precision)
    }
}

/// Gaussian posterior `N(z_map, Σ_N)` over the target-task embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskPosterior {
    pub z_map: Vec<f64>,
    /// `Λ = Σ_N⁻¹`.
    pub precision: DMatrix<f64>,
    pub covariance: DMatrix<f64>,
    /// Lower Cholesky factor of `Σ_N`.
    pub chol: DMatrix<f64>,
    /// Diagonal jitter that was needed to factorise.
    pub jitter: f64,
}

fn cholesky_with_jitter(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let sym = (m + m.transpose()) * 0.5;
    for &j in &JITTER_LEVELS {
        let mut a = sym.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += j;
        }
        if let Some(c) = a.cholesky() {
            return Ok((c.l(), j));
        }
    }
    Err(Error::Cholesky { jitter: JITTER_LEVELS[JITTER_LEVELS.len() - 1] })
}

impl TaskPosterior {
    /// Builds the posterior from its mean and precision matrix.
    pub fn new(z_map: Vec<f64>, precision: DMatrix<f64>) -> Result<Self> {
        let d = z_map.len();
        if precision.shape() != (d, d) {
            return Err(Error::Arity { expected: d * d, got: precision.len() });
        }
        let (l, j1) = cholesky_with_jitter(&precision)?;
        let l_inv = l
            .solve_lower_triangular(&DMatrix::identity(d, d))
            .ok_or(Error::Cholesky { jitter: j1 })?;
        let covariance = l_inv.tr_mul(&l_inv);
        let (chol, j2) = cholesky_with_jitter(&covariance)?;
        Ok(TaskPosterior { z_map, precision, covariance, chol, jitter: j1.max(j2) })
    }

    /// The prior `N(0, I)`.
    pub fn prior(d: usize) -> Self {
        TaskPosterior::new(vec![0.0; d], DMatrix::identity(d, d)).expect("identity factorises")
    }

    pub fn dim(&self) -> usize {
        self.z_map.len()
    }

    /// `(μ_a, σ_a²)` of the logit `m + zᵀΦ` under the posterior.
    pub fn logit_moments(&self, mean_logit: f64, phi: &[f64]) -> (f64, f64) {
        let phi = DVector::from_column_slice(phi);
        let mu = mean_logit + phi.dot(&DVector::from_column_slice(&self.z_map));
        let var = (self.covariance.clone() * &phi).dot(&phi).max(0.0);
        (mu, var)
    }
}

/// One draw `ẑ = z_map + L·ε` with `ε ~ N(0, I)`.
pub fn thompson_sample<R: Rng + ?Sized>(post: &TaskPosterior, rng: &mut R) -> Vec<f64> {
    let eps = DVector::from_iterator(post.dim(), (0..post.dim()).map(|_| -> f64 { StandardNormal.sample(rng) }));
    let z = &post.chol * eps + DVector::from_column_slice(&post.z_map);
    z.as_slice().to_vec()
}

/// Probit approximation `σ(μ / √(1 + πσ²/8))` of `∫σ(a) N(a | μ, σ²) da`.
pub fn probit(mu: f64, var: f64) -> f64 {
    sigmoid(mu / (1.0 + std::f64::consts::PI * var / 8.0).sqrt())
}

/// MAP embedding of the target task.
pub fn map_estimate(model: &MetaModel, data: &TaskDataset, cfg: &AdaptConfig) -> Result<MapEstimate> {
    Ok(AdaptProblem::new(model, data, cfg)?.map_estimate(&cfg.lbfgs))
}

/// Laplace posterior around `z_map`.
pub fn laplace_precision(model: &MetaModel, z_map: Vec<f64>, data: &TaskDataset, cfg: &AdaptConfig) -> Result<TaskPosterior> {
    AdaptProblem::new(model, data, cfg)?.laplace(z_map)
}

/// MAP followed by the Laplace approximation.
pub fn adapt(model: &MetaModel, data: &TaskDataset, cfg: &AdaptConfig) -> Result<(TaskPosterior, MapEstimate)> {
    let problem = AdaptProblem::new(model, data, cfg)?;
    let map = problem.map_estimate(&cfg.lbfgs);
    Ok((problem.laplace(map.z.clone())?, map))
}

/// Marginal class-1 probability at `x` under the probit approximation.
pub fn probit_predict(model: &MetaModel, post: &TaskPosterior, x: &[f64]) -> Result<f64> {
    Ok(probit_predict_batch(model, post, std::slice::from_ref(&x))?[0])
}

/// [`probit_predict`] for many points.
pub fn probit_predict_batch<P: AsRef<[f64]>>(model: &MetaModel, post: &TaskPosterior, xs: &[P]) -> Result<Vec<f64>> {
    let phi = model.features_batch(xs)?;
    let means = model.mean_logits(&phi);
    Ok(phi
        .column_iter()
        .zip(means)
        .map(|(c, m)| {
            let (mu, var) = post.logit_moments(m, c.as_slice());
            probit(mu, var)
        })
        .collect())
}
