use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MetaModel, MetaModelConfig};
use crate::{Error, Result};

/// Version written by [`MetaModel::to_json`]; others are rejected on load.
pub const CHECKPOINT_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Checkpoint {
    version: u64,
    config: MetaModelConfig,
    input_dim: usize,
    task_ids: Vec<u64>,
    omega: BTreeMap<String, Vec<f64>>,
    #[serde(rename = "Z")]
    z: Vec<Vec<f64>>,
    lambda_ks: f64,
    lambda_cov: f64,
}

#[derive(Deserialize)]
struct VersionProbe {
    version: u64,
}

impl MetaModel {
    pub fn to_json(&self) -> String {
        let d = self.feature_dim();
        let ck = Checkpoint {
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            input_dim: self.input_dim(),
            task_ids: self.task_ids.clone(),
            omega: self.omega.to_map(),
            z: self.z.chunks(d).map(<[f64]>::to_vec).collect(),
            lambda_ks: self.lambda_ks,
            lambda_cov: self.lambda_cov,
        };
        serde_json::to_string(&ck).expect("checkpoint serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let probe: VersionProbe = serde_json::from_str(text)?;
        if probe.version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointVersion(probe.version));
        }
        let ck: Checkpoint = serde_json::from_str(text)?;
        ck.config.validate()?;
        let arch = ck.config.architecture(ck.input_dim);
        let mut omega = arch.init_params(&mut crate::rng::stream(0, "checkpoint", 0));
        omega.fill_from_map(&ck.omega)?;
        let d = ck.config.feature_dim;
        if let Some(row) = ck.z.iter().find(|r| r.len() != d) {
            return Err(Error::Arity { expected: d, got: row.len() });
        }
        let z = ck.z.concat();
        MetaModel::from_parts(ck.config, ck.input_dim, omega, z, ck.task_ids, ck.lambda_ks, ck.lambda_cov)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
