use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use leakage_core::data::TabularToyConfig;
use leakage_core::models::{CBMConfig, CEMConfig, Encoding, ModelConfig, Strategy};
use leakage_core::rng::derive_seed;
use leakage_core::scores::ProbeConfig;
use leakage_core::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Cbm,
    Cem,
}

/// One model class of an experiment. Dimensions come from the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoding: Option<Encoding>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub p_int: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head_epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_dim: Option<usize>,
}

impl ModelSpec {
    pub fn hard() -> Self {
        Self::cbm(Encoding::Hard, Strategy::Independent, 0.0)
    }

    pub fn cbm(encoding: Encoding, strategy: Strategy, lambda: f64) -> Self {
        ModelSpec {
            kind: ModelKind::Cbm,
            encoding: Some(encoding),
            strategy: Some(strategy),
            lambda,
            p_int: 0.0,
            epochs: None,
            head_epochs: None,
            batch_size: None,
            embedding_dim: None,
        }
    }

    pub fn joint(encoding: Encoding, lambda: f64) -> Self {
        Self::cbm(encoding, Strategy::Joint, lambda)
    }

    pub fn cem(lambda: f64, p_int: f64) -> Self {
        ModelSpec { kind: ModelKind::Cem, encoding: None, strategy: None, p_int, ..Self::joint(Encoding::Soft, lambda) }
    }

    /// Full model config for a dataset with `input_dim` inputs, `n_concepts`
    /// concepts and `n_classes` classes.
    pub fn build(&self, input_dim: usize, n_concepts: usize, n_classes: usize, seed: u64) -> Result<ModelConfig> {
        let config = match self.kind {
            ModelKind::Cbm => {
                let encoding = self.encoding.ok_or_else(|| Error::Config("CBM spec needs an encoding".into()))?;
                let strategy = self.strategy.unwrap_or(if encoding == Encoding::Hard { Strategy::Independent } else { Strategy::Joint });
                let mut c = CBMConfig::tabular(encoding, strategy, self.lambda, input_dim, n_concepts, n_classes).with_seed(seed);
                if let Some(e) = self.epochs {
                    c.epochs = e;
                }
                if let Some(e) = self.head_epochs {
                    c.head_epochs = e;
                }
                if let Some(b) = self.batch_size {
                    c.batch_size = b;
                }
                ModelConfig::Cbm(c)
            }
            ModelKind::Cem => {
                if self.encoding.is_some() || self.strategy.is_some() {
                    return Err(Error::Config("CEM specs take no encoding or strategy".into()));
                }
                let mut c = CEMConfig::tabular(self.lambda, self.p_int, input_dim, n_concepts, n_classes).with_seed(seed);
                if let Some(d) = self.embedding_dim {
                    c.embedding_dim = d;
                    c.backbone.last_mut().unwrap().out_dim = 2 * n_concepts * d;
                    c.head[0].in_dim = n_concepts * d;
                }
                if let Some(e) = self.epochs {
                    c.epochs = e;
                }
                if let Some(b) = self.batch_size {
                    c.batch_size = b;
                }
                ModelConfig::Cem(c)
            }
        };
        config.validate()?;
        Ok(config)
    }

    pub fn label(&self) -> Result<String> {
        Ok(self.build(1, 2, 2, 0)?.label())
    }
}

fn default_name() -> String {
    "tabular_toy".into()
}

fn five() -> usize {
    5
}

/// A JSON experiment file. Flat command-line flags override its fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Dataset file stem under `datasets/`.
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub dataset: TabularToyConfig,
    #[serde(default)]
    pub models: Vec<ModelSpec>,
    #[serde(default = "five")]
    pub folds: usize,
    #[serde(default = "five")]
    pub repeats: usize,
    /// Master seed for training and score evaluation.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Probe settings; when present reports include the OIS.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ois: Option<ProbeConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: default_name(),
            dataset: TabularToyConfig::default(),
            models: vec![],
            folds: 5,
            repeats: 5,
            seed: 0,
            out: None,
            ois: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 1 {
            return Err(Error::Config("folds must be at least 1".into()));
        }
        if self.repeats < 2 {
            return Err(Error::Config(format!("repeats must be at least 2, got {}", self.repeats)));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::Config(format!("dataset name `{}` is not a plain file stem", self.name)));
        }
        self.dataset.validate()?;
        let mut labels = BTreeSet::new();
        for m in &self.models {
            if !labels.insert(m.label()?) {
                return Err(Error::Config(format!("model `{}` is listed twice", m.label()?)));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("config serialises")))
    }
}

/// Seed of fold `fold` under `master`.
pub fn fold_seed(master: u64, fold: usize) -> u64 {
    derive_seed(master, 0xF01D_0000 + fold as u64)
}

/// Base jitter seed of the score repeats on fold `fold`.
pub fn score_seed(master: u64, fold: usize) -> u64 {
    derive_seed(master, 0x5C0E_0000 + fold as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_round_trip() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"models":[{"kind":"cbm","encoding":"soft","lambda":5}]}"#).unwrap();
        assert_eq!((cfg.folds, cfg.repeats, cfg.seed), (5, 5, 0));
        assert_eq!(cfg.models[0].label().unwrap(), "soft-joint-l5");
        cfg.validate().unwrap();
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = ExperimentConfig { models: vec![ModelSpec::hard()], ..Default::default() };
        cfg.validate().unwrap();
        cfg.repeats = 1;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg.repeats = 5;
        cfg.models.push(ModelSpec::hard());
        assert!(cfg.validate().is_err());
        cfg.models = vec![ModelSpec { strategy: Some(Strategy::Joint), ..ModelSpec::hard() }];
        assert!(cfg.validate().is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"fold":3}"#).is_err());
    }

    #[test]
    fn cem_spec_builds_embedding_model() {
        let spec = ModelSpec { embedding_dim: Some(4), ..ModelSpec::cem(5.0, 0.5) };
        match spec.build(7, 3, 2, 1).unwrap() {
            ModelConfig::Cem(c) => assert_eq!((c.embedding_dim, c.backbone.last().unwrap().out_dim, c.head[0].in_dim), (4, 24, 12)),
            _ => panic!(),
        }
        assert_eq!(spec.label().unwrap(), "cem-l5-p0.5");
    }
}
