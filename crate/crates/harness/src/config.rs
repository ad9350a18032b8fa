use std::path::{Path, PathBuf};

use malibo::bench::{Family, NoiseSpec};
use malibo::bo::{LfboConfig, MaliboConfig};
use malibo::meta::MetaModelConfig;
use serde::{Deserialize, Serialize};

use crate::{HarnessError, Result};

/// The problem every seed is run on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BenchmarkSpec {
    /// A fresh target and meta-dataset from the ensemble for every seed.
    Synthetic { family: Family },
    /// Leave-one-table-out over enumerated tables: seed `s` targets table
    /// `s mod n` and meta-trains on the others.
    Tabular { paths: Vec<PathBuf> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Random,
    Lfbo,
    LfboBb,
    Malibo,
}

impl StrategyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Random => "random",
            StrategyKind::Lfbo => "lfbo",
            StrategyKind::LfboBb => "lfbo_bb",
            StrategyKind::Malibo => "malibo",
        }
    }

    pub fn needs_meta_data(self) -> bool {
        matches!(self, StrategyKind::LfboBb | StrategyKind::Malibo)
    }

    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| HarnessError::Validation(format!("unknown strategy {s:?}")))
    }
}

/// Meta-dataset sampling and meta-model settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetaSpec {
    /// Number of related tasks `T`.
    pub n_tasks: usize,
    /// Observations per related task `N`.
    pub n_obs: usize,
    pub model: MetaModelConfig,
    /// Best points per task spanning the LFBO+BB box.
    pub bb_top_m: usize,
}

impl Default for MetaSpec {
    fn default() -> Self {
        MetaSpec { n_tasks: 64, n_obs: 128, model: MetaModelConfig::default(), bb_top_m: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub benchmark: BenchmarkSpec,
    pub strategies: Vec<StrategyKind>,
    pub budget: usize,
    pub n_seeds: usize,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub meta: MetaSpec,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Train one meta-model and reuse it for every seed.
    #[serde(default)]
    pub shared_meta: bool,
    /// Replaces the desk-scale defaults with the full protocol.
    #[serde(default)]
    pub paper_scale: bool,
    #[serde(default)]
    pub lfbo: LfboConfig,
    #[serde(default)]
    pub malibo: MaliboConfig,
    /// Logarithmic iteration axis in the plot.
    #[serde(default)]
    pub log_x: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| HarnessError::Validation(format!("invalid experiment config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(HarnessError::Validation(m));
        if self.n_seeds == 0 {
            return fail("n_seeds must be at least 1".into());
        }
        if self.budget == 0 {
            return fail("budget must be at least 1".into());
        }
        if self.strategies.is_empty() {
            return fail("at least one strategy is required".into());
        }
        for (i, s) in self.strategies.iter().enumerate() {
            if self.strategies[..i].contains(s) {
                return fail(format!("strategy {} listed twice", s.as_str()));
            }
        }
        if !(self.noise.epsilon >= 0.0 && self.noise.epsilon.is_finite()) {
            return fail(format!("noise epsilon {} must be finite and non-negative", self.noise.epsilon));
        }
        let meta_needed = self.strategies.iter().any(|s| s.needs_meta_data());
        match &self.benchmark {
            BenchmarkSpec::Synthetic { .. } => {
                if meta_needed && (self.meta.n_tasks < 2 || self.meta.n_obs == 0) {
                    return fail("meta-learning strategies need n_tasks >= 2 and n_obs >= 1".into());
                }
            }
            BenchmarkSpec::Tabular { paths } => {
                if paths.is_empty() {
                    return fail("tabular benchmark needs at least one table".into());
                }
                if meta_needed && paths.len() < 3 {
                    return fail("meta-learning strategies need at least three tables (target plus two related)".into());
                }
            }
        }
        if self.meta.bb_top_m == 0 {
            return fail("bb_top_m must be at least 1".into());
        }
        self.meta.model.validate()?;
        Ok(())
    }

    /// The configuration actually run: `paper_scale` sets 100 seeds,
    /// per-seed meta-training and the published meta-dataset sizes.
    pub fn effective(&self) -> ExperimentConfig {
        let mut cfg = self.clone();
        if cfg.paper_scale {
            cfg.n_seeds = cfg.n_seeds.max(100);
            cfg.shared_meta = false;
            if let BenchmarkSpec::Synthetic { family } = cfg.benchmark {
                let sizes = match family {
                    Family::Forrester => Some((128, 128)),
                    Family::Branin => Some((256, 128)),
                    Family::Hartmann3d => Some((256, 512)),
                    Family::Quadratic => None,
                };
                if let Some((t, n)) = sizes {
                    cfg.meta.n_tasks = t;
                    cfg.meta.n_obs = n;
                }
            }
        }
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"benchmark": {"kind": "synthetic", "family": "forrester"}, "strategies": ["random", "lfbo"], "budget": 5, "n_seeds": 3}"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.noise.epsilon, 0.0);
        assert_eq!(cfg.base_seed, 0);
        assert_eq!(cfg.lfbo.n_init, 10);
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        cfg.n_seeds = 0;
        assert!(cfg.validate().is_err());
        cfg.n_seeds = 1;
        cfg.budget = 0;
        assert!(cfg.validate().is_err());
        cfg.budget = 1;
        cfg.strategies = vec![StrategyKind::Lfbo, StrategyKind::Lfbo];
        assert!(cfg.validate().is_err());
        cfg.strategies = vec![StrategyKind::Malibo];
        cfg.benchmark = BenchmarkSpec::Tabular { paths: vec!["a.json".into(), "b.json".into()] };
        assert!(cfg.validate().is_err());
        assert!(ExperimentConfig::from_json(r#"{"benchmark": {"kind": "synthetic", "family": "forrester"}, "strategies": [], "budget": 5, "n_seeds": 3, "typo": 1}"#).is_err());
        assert!(StrategyKind::parse("gp").is_err());
        assert_eq!(StrategyKind::parse("lfbo_bb").unwrap(), StrategyKind::LfboBb);
    }

    #[test]
    fn paper_scale_overrides_sizes() {
        let mut cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        cfg.paper_scale = true;
        cfg.shared_meta = true;
        let eff = cfg.effective();
        assert_eq!((eff.n_seeds, eff.meta.n_tasks, eff.meta.n_obs), (100, 128, 128));
        assert!(!eff.shared_meta);
    }
}
