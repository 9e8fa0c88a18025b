//! Run configuration files and their content hash.
//!
//! A run is described by one TOML file whose sections mirror the library's
//! config structs. Everything has a default, so a minimal file names a
//! dataset and pipeline and nothing else. The config hash is the SHA-256 of
//! the parsed config's canonical JSON form: formatting and comments do not
//! change it, any effective value does. Every artifact a run writes embeds
//! this hash, and downstream stages refuse artifacts whose hash does not
//! match their own config.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use thiserror::Error;

use crate::datagen::DatasetKind;
use crate::eval::FidelityConvention;
use crate::explain::{ExplainerConfig, ExplainerKind};
use crate::nn::{ModelConfig, TrainConfig};
use crate::preprocess::Pipeline;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file {0}: {1}")]
    Io(String, std::io::Error),
    #[error("config is not valid TOML: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("bad config value: {0}")]
    BadValue(String),
}

fn default_alpha() -> f64 {
    0.1
}
fn default_hidden() -> usize {
    20
}
fn default_layers() -> usize {
    3
}
fn default_w_plus() -> f64 {
    0.5
}
fn default_sample() -> usize {
    200
}
fn default_convention() -> String {
    "standard".into()
}
fn default_out_dir() -> String {
    "out".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    /// One of the generated benchmark names, or "real" with a manifest.
    pub kind: String,
    /// Manifest JSON path, for `kind = "real"` only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessSection {
    /// "symm" or "lapnorm".
    pub pipeline: String,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_layers")]
    pub layers: usize,
}

impl Default for ModelSection {
    fn default() -> ModelSection {
        ModelSection { hidden: default_hidden(), layers: default_layers() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub lr: f64,
    pub epochs: usize,
    pub weight_decay: f64,
    pub patience: Option<usize>,
}

impl Default for TrainSection {
    fn default() -> TrainSection {
        let t = TrainConfig::default();
        TrainSection {
            lr: t.lr,
            epochs: t.epochs,
            weight_decay: t.weight_decay,
            patience: t.patience,
        }
    }
}

/// Explainer settings; unset fields fall back to the chosen explainer's
/// defaults, which differ between the two.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplainerSection {
    /// "gnn" (per-node optimization) or "pg" (amortized network).
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_size: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_entropy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_mask: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Node budget; 0 means the dataset's own default.
    pub k: usize,
    pub w_plus: f64,
    /// "standard" or "inverted".
    pub convention: String,
    /// Credit a symmetrization-added reverse edge with its source's ground
    /// truth label. Unset follows the pipeline: on for symm, off for
    /// lapnorm.
    pub reciprocal_credit: Option<bool>,
    /// Explanation targets sampled from the test split.
    pub sample: usize,
    pub full_set: bool,
}

impl Default for EvalSection {
    fn default() -> EvalSection {
        EvalSection {
            k: 0,
            w_plus: default_w_plus(),
            convention: default_convention(),
            reciprocal_credit: None,
            sample: default_sample(),
            full_set: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSection,
    pub preprocess: PreprocessSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    pub explainer: ExplainerSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<RunConfig, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(path.display().to_string(), e))?;
        RunConfig::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 over the canonical JSON form of the parsed config.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        format!("{:x}", hasher.finalize())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let kind = self.dataset_kind()?;
        if kind == DatasetKind::Real && self.dataset.manifest.is_none() {
            return Err(ConfigError::BadValue(
                "dataset kind \"real\" needs a manifest path".into(),
            ));
        }
        if kind != DatasetKind::Real && self.dataset.manifest.is_some() {
            return Err(ConfigError::BadValue(
                "manifest is only meaningful for dataset kind \"real\"".into(),
            ));
        }
        self.pipeline()?;
        if !(self.preprocess.alpha > 0.0 && self.preprocess.alpha < 1.0) {
            return Err(ConfigError::BadValue(format!(
                "alpha must lie in (0, 1), got {}",
                self.preprocess.alpha
            )));
        }
        if self.model.hidden == 0 || self.model.layers == 0 {
            return Err(ConfigError::BadValue("model needs hidden > 0 and layers > 0".into()));
        }
        if !(self.train.lr > 0.0 && self.train.lr.is_finite()) {
            return Err(ConfigError::BadValue(format!(
                "training rate must be positive, got {}",
                self.train.lr
            )));
        }
        self.explainer_kind()?;
        self.explainer_config()
            .validate()
            .map_err(|e| ConfigError::BadValue(e.to_string()))?;
        self.convention()?;
        if !(0.0..=1.0).contains(&self.eval.w_plus) {
            return Err(ConfigError::BadValue(format!(
                "w_plus must lie in [0, 1], got {}",
                self.eval.w_plus
            )));
        }
        Ok(())
    }

    pub fn dataset_kind(&self) -> Result<DatasetKind, ConfigError> {
        DatasetKind::from_name(&self.dataset.kind).ok_or_else(|| {
            ConfigError::BadValue(format!("unknown dataset kind {:?}", self.dataset.kind))
        })
    }

    pub fn pipeline(&self) -> Result<Pipeline, ConfigError> {
        Pipeline::from_name(&self.preprocess.pipeline).ok_or_else(|| {
            ConfigError::BadValue(format!("unknown pipeline {:?}", self.preprocess.pipeline))
        })
    }

    pub fn explainer_kind(&self) -> Result<ExplainerKind, ConfigError> {
        ExplainerKind::from_name(&self.explainer.kind).ok_or_else(|| {
            ConfigError::BadValue(format!("unknown explainer {:?}", self.explainer.kind))
        })
    }

    pub fn convention(&self) -> Result<FidelityConvention, ConfigError> {
        FidelityConvention::from_name(&self.eval.convention).ok_or_else(|| {
            ConfigError::BadValue(format!("unknown convention {:?}", self.eval.convention))
        })
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.train.lr,
            epochs: self.train.epochs,
            weight_decay: self.train.weight_decay,
            patience: self.train.patience,
            seed: self.seed,
        }
    }

    pub fn model_config(&self, input_dim: usize, num_classes: usize) -> ModelConfig {
        ModelConfig {
            input_dim,
            hidden: self.model.hidden,
            layers: self.model.layers,
            num_classes,
        }
    }

    /// The chosen explainer's defaults with any explicit overrides applied.
    pub fn explainer_config(&self) -> ExplainerConfig {
        let mut cfg = match ExplainerKind::from_name(&self.explainer.kind) {
            Some(ExplainerKind::Pg) => ExplainerConfig::pg_defaults(),
            _ => ExplainerConfig::gnn_defaults(),
        };
        let s = &self.explainer;
        if let Some(v) = s.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = s.lr {
            cfg.lr = v;
        }
        if let Some(v) = s.lambda_size {
            cfg.lambda_size = v;
        }
        if let Some(v) = s.lambda_entropy {
            cfg.lambda_entropy = v;
        }
        if let Some(v) = s.feature_mask {
            cfg.feature_mask = v;
        }
        if let Some(v) = s.tau_start {
            cfg.tau_start = v;
        }
        if let Some(v) = s.tau_end {
            cfg.tau_end = v;
        }
        if let Some(v) = s.samples {
            cfg.samples = v;
        }
        cfg.seed = self.seed;
        cfg
    }

    /// Node budget: explicit, or the dataset's planted-structure size.
    pub fn eval_k(&self) -> Result<usize, ConfigError> {
        if self.eval.k > 0 {
            return Ok(self.eval.k);
        }
        Ok(self.dataset_kind()?.default_eval_k())
    }

    /// Reverse-edge ground truth credit defaults to on exactly when the
    /// pipeline invents reverse edges.
    pub fn reciprocal_credit(&self) -> Result<bool, ConfigError> {
        match self.eval.reciprocal_credit {
            Some(v) => Ok(v),
            None => Ok(self.pipeline()? == Pipeline::Symm),
        }
    }

    /// A complete config for one dataset-pipeline-explainer combination,
    /// everything else at defaults.
    pub fn example(kind: DatasetKind, pipeline: Pipeline, explainer: ExplainerKind) -> RunConfig {
        RunConfig {
            dataset: DatasetSection { kind: kind.name().into(), manifest: None },
            preprocess: PreprocessSection {
                pipeline: pipeline.name().into(),
                alpha: default_alpha(),
            },
            model: ModelSection::default(),
            train: TrainSection::default(),
            explainer: ExplainerSection {
                kind: explainer.name().into(),
                epochs: None,
                lr: None,
                lambda_size: None,
                lambda_entropy: None,
                feature_mask: None,
                tau_start: None,
                tau_end: None,
                samples: None,
            },
            eval: EvalSection::default(),
            seed: 0,
            out_dir: default_out_dir(),
        }
    }
}
