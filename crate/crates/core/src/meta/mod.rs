//! The meta-learned classifier: a residual feature network `φ`, a mean
//! layer `m` and one latent embedding `z_t` per meta-task, giving the logit
//! `m(φ(x)) + z_tᵀφ(x)`.

mod checkpoint;
mod loss;
mod network;
mod regularizer;
mod train;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use checkpoint::CHECKPOINT_VERSION;
pub use loss::{weighted_bce, weighted_bce_slope, Examples, MetaObjective};
pub use network::Architecture;
pub use regularizer::{calibrate_coefficients, regularizer, regularizer_terms, RegularizerTerms, CALIBRATION_DRAWS};
pub use train::{meta_train, TrainReport};

use crate::data::WeightScaling;
use crate::optim::{AdamConfig, ParamVector};
use crate::{Error, Result};
use network::Layout;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Elu,
}

/// Meta-model and meta-training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetaModelConfig {
    pub feature_dim: usize,
    pub hidden_layers: usize,
    pub hidden_units: usize,
    pub activation: Activation,
    pub lambda: f64,
    pub gamma: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Fraction of each task's observations held out for early stopping.
    pub validation_fraction: f64,
    pub patience: usize,
    pub weight_scaling: WeightScaling,
}

impl Default for MetaModelConfig {
    fn default() -> Self {
        MetaModelConfig {
            feature_dim: 50,
            hidden_layers: 4,
            hidden_units: 64,
            activation: Activation::Elu,
            lambda: 0.1,
            gamma: 1.0 / 3.0,
            epochs: 2048,
            batch: 256,
            seed: 0,
            adam: AdamConfig::default(),
            validation_fraction: 0.1,
            patience: 64,
            weight_scaling: WeightScaling::default(),
        }
    }
}

impl MetaModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.feature_dim == 0 || self.hidden_units == 0 {
            return bad("feature_dim and hidden_units must be positive".into());
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda = {} must be non-negative", self.lambda));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma = {} not in (0, 1)", self.gamma));
        }
        if self.batch == 0 {
            return bad("batch must be positive".into());
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad(format!("validation_fraction = {} not in [0, 1)", self.validation_fraction));
        }
        self.adam.validate()
    }

    pub fn architecture(&self, input_dim: usize) -> Architecture {
        Architecture {
            input_dim,
            hidden_units: self.hidden_units,
            hidden_layers: self.hidden_layers,
            feature_dim: self.feature_dim,
        }
    }
}

/// A trained, immutable meta-model.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaModel {
    config: MetaModelConfig,
    arch: Architecture,
    layout: Layout,
    omega: ParamVector,
    /// Row-major `T × d`.
    z: Vec<f64>,
    task_ids: Vec<u64>,
    lambda_ks: f64,
    lambda_cov: f64,
}

impl MetaModel {
    /// Assembles a model from its parts, checking shapes.
    pub fn from_parts(
        config: MetaModelConfig,
        input_dim: usize,
        omega: ParamVector,
        z: Vec<f64>,
        task_ids: Vec<u64>,
        lambda_ks: f64,
        lambda_cov: f64,
    ) -> Result<Self> {
        let arch = config.architecture(input_dim);
        let layout = arch.layout();
        if omega.len() != layout.len {
            return Err(Error::Arity { expected: layout.len, got: omega.len() });
        }
        if z.len() != task_ids.len() * arch.feature_dim {
            return Err(Error::Arity { expected: task_ids.len() * arch.feature_dim, got: z.len() });
        }
        if !omega.is_finite() || z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("meta-model parameters".into()));
        }
        Ok(MetaModel { config, arch, layout, omega, z, task_ids, lambda_ks, lambda_cov })
    }

    pub fn config(&self) -> &MetaModelConfig {
        &self.config
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn input_dim(&self) -> usize {
        self.arch.input_dim
    }

    pub fn feature_dim(&self) -> usize {
        self.arch.feature_dim
    }

    pub fn n_tasks(&self) -> usize {
        self.task_ids.len()
    }

    pub fn task_ids(&self) -> &[u64] {
        &self.task_ids
    }

    pub fn omega(&self) -> &ParamVector {
        &self.omega
    }

    /// Row-major `T × d` embedding matrix.
    pub fn embeddings(&self) -> &[f64] {
        &self.z
    }

    pub fn embedding(&self, task: usize) -> &[f64] {
        let d = self.arch.feature_dim;
        &self.z[task * d..(task + 1) * d]
    }

    pub fn lambda_ks(&self) -> f64 {
        self.lambda_ks
    }

    pub fn lambda_cov(&self) -> f64 {
        self.lambda_cov
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.arch.input_dim {
            return Err(Error::Arity { expected: self.arch.input_dim, got: x.len() });
        }
        Ok(())
    }

    /// Features `Φ = φ(x)` of an encoded point.
    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.features_batch(std::slice::from_ref(&x.to_vec()))?.column(0).iter().copied().collect())
    }

    /// Features of many points as a `d × n` matrix.
    pub fn features_batch<P: AsRef<[f64]>>(&self, xs: &[P]) -> Result<DMatrix<f64>> {
        let n = self.arch.input_dim;
        let mut x = DMatrix::zeros(n, xs.len());
        for (i, p) in xs.iter().enumerate() {
            self.check_dim(p.as_ref())?;
            x.column_mut(i).copy_from_slice(p.as_ref());
        }
        Ok(self.arch.forward(&self.layout, self.omega.as_slice(), &x).phi)
    }

    /// `∂Φ/∂x`, a `d × input_dim` matrix.
    pub fn features_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_dim(x)?;
        Ok(self.arch.jacobian(&self.layout, self.omega.as_slice(), x))
    }

    /// Mean-layer output `m(Φ)` for each column of `phi`.
    pub fn mean_logits(&self, phi: &DMatrix<f64>) -> Vec<f64> {
        self.arch.mean_logits(&self.layout, self.omega.as_slice(), phi)
    }

    /// `m(Φ) + zᵀΦ` for a feature vector.
    pub fn logit_from_features(&self, phi: &[f64], z: &[f64]) -> f64 {
        let p = self.omega.as_slice();
        let w = &p[self.layout.mean_w..self.layout.mean_w + self.arch.feature_dim];
        p[self.layout.mean_b] + phi.iter().zip(w.iter().zip(z)).map(|(f, (a, b))| f * (a + b)).sum::<f64>()
    }

    /// `m(φ(x)) + zᵀφ(x)`.
    pub fn logit(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        if z.len() != self.arch.feature_dim {
            return Err(Error::Arity { expected: self.arch.feature_dim, got: z.len() });
        }
        Ok(self.logit_from_features(&self.features(x)?, z))
    }
}
