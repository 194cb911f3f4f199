// Copyright 2026 The QERC Lab Authors
// SPDX-License-Identifier: Apache-2.0

//! Experiment configuration, read from TOML and overridable from flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use qerc_core::linalg::RandomSeed;
use qerc_core::netweights::DEFAULT_BINS;
use qerc_core::pipeline::TrainConfig;
use qerc_core::reservoir::{DtcParams, FeatureMapSpec, ModelKind};

/// Environment variable naming the MNIST directory.
pub const DATA_DIR_ENV: &str = "QERC_DATA_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Weights,
    HaarCompare,
    CauchyCompare,
    AccuracyVsPeriod,
    ModelTable,
    Ensemble,
    Train,
}

impl Experiment {
    pub fn needs_data(self, weights_only: bool) -> bool {
        match self {
            Experiment::Weights | Experiment::HaarCompare | Experiment::CauchyCompare => false,
            Experiment::Ensemble => !weights_only,
            Experiment::AccuracyVsPeriod | Experiment::ModelTable | Experiment::Train => true,
        }
    }
}

/// Model parameters shared by every feature map. Fields that do not apply to
/// a kind are ignored for it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub qubits: usize,
    pub g_t: f64,
    pub epsilon: f64,
    pub j0_t: f64,
    pub alpha: f64,
    /// Explicit `D_l T` for the clean DTC; zeros when absent.
    pub disorder_t: Option<Vec<f64>>,
    pub n_periods: u64,
    pub seed: RandomSeed,
    pub gamma: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let p = DtcParams::default();
        Self {
            kind: ModelKind::Dtc,
            qubits: p.qubits,
            g_t: p.g_t,
            epsilon: p.epsilon,
            j0_t: p.j0_t,
            alpha: p.alpha,
            disorder_t: None,
            n_periods: 100,
            seed: RandomSeed(0),
            gamma: 0.04,
        }
    }
}

impl ModelConfig {
    pub fn dtc_params(&self) -> DtcParams {
        let p = DtcParams::clean(self.qubits, self.g_t, self.epsilon, self.j0_t, self.alpha);
        match &self.disorder_t {
            Some(d) => p.with_disorder(d.clone()),
            None => p,
        }
    }

    pub fn dim(&self) -> usize {
        1usize << self.qubits
    }

    /// The configured model.
    pub fn spec(&self) -> FeatureMapSpec {
        self.spec_for(self.kind)
    }

    /// A model of `kind` sharing this configuration's parameters.
    pub fn spec_for(&self, kind: ModelKind) -> FeatureMapSpec {
        let (dim, seed) = (self.dim(), self.seed);
        match kind {
            ModelKind::Dtc => FeatureMapSpec::Dtc {
                params: self.dtc_params(),
                n_periods: self.n_periods,
            },
            ModelKind::DisorderedDtc => FeatureMapSpec::DisorderedDtc {
                params: self.dtc_params(),
                n_periods: self.n_periods,
                seed,
            },
            ModelKind::Haar => FeatureMapSpec::Haar { dim, seed },
            ModelKind::TailedHaar => FeatureMapSpec::TailedHaar { dim, seed },
            ModelKind::Cauchy => FeatureMapSpec::Cauchy {
                dim,
                gamma: self.gamma,
                seed,
            },
        }
    }
}

/// Settings of the weight-distribution experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsConfig {
    pub bins: usize,
    /// Add the identity coefficient to the z component.
    pub include_identity: bool,
    /// Width used for the shared tail threshold in comparisons.
    pub sigma_ref: f64,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        Self {
            bins: DEFAULT_BINS,
            include_identity: false,
            sigma_ref: 0.04,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// MNIST directory; falls back to `$QERC_DATA_DIR`.
    #[serde(default)]
    pub data_dir: Option<PathBuf>,
    /// Where the encoded dataset is cached; `<output_dir>/cache` when absent.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub weights: WeightsConfig,
    /// Periods for `weights` and `accuracy-vs-period`.
    #[serde(default)]
    pub periods: Option<Vec<u64>>,
    /// Models for `model-table` and the comparisons.
    #[serde(default)]
    pub models: Option<Vec<ModelKind>>,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    /// Ensemble: only the weight distributions, no training.
    #[serde(default)]
    pub weights_only: bool,
    /// Measurement shots per sample; exact probabilities when absent.
    #[serde(default)]
    pub shots: Option<u64>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_realizations() -> usize {
    10
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            output_dir: default_output_dir(),
            data_dir: None,
            cache_dir: None,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            weights: WeightsConfig::default(),
            periods: None,
            models: None,
            realizations: default_realizations(),
            weights_only: false,
            shots: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).context("parsing experiment config")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn periods(&self) -> Vec<u64> {
        self.periods
            .clone()
            .unwrap_or_else(|| match self.experiment {
                Experiment::AccuracyVsPeriod => vec![2, 5, 10, 20, 50, 100],
                _ => vec![2, 10, 50, 100],
            })
    }

    pub fn models(&self) -> Vec<ModelKind> {
        self.models
            .clone()
            .unwrap_or_else(|| match self.experiment {
                Experiment::HaarCompare => vec![ModelKind::Haar, ModelKind::Dtc],
                Experiment::CauchyCompare => vec![ModelKind::Cauchy, ModelKind::Dtc],
                _ => ModelKind::ALL.to_vec(),
            })
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir
            .clone()
            .unwrap_or_else(|| self.output_dir.join("cache"))
    }

    /// Explicit data directory, else the environment variable.
    pub fn resolved_data_dir(&self) -> Option<PathBuf> {
        self.data_dir
            .clone()
            .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.spec().validate().context("model parameters")?;
        self.train.validate().context("training parameters")?;
        if self.weights.bins == 0 {
            bail!("weights.bins must be positive");
        }
        if !(self.weights.sigma_ref > 0.0) {
            bail!("weights.sigma_ref must be positive");
        }
        let periods = self.periods();
        if periods.is_empty() || periods.contains(&0) {
            bail!("periods must be a nonempty list of positive integers");
        }
        if self.models().is_empty() {
            bail!("models must not be empty");
        }
        if self.shots == Some(0) {
            bail!("shots must be positive");
        }
        match self.experiment {
            Experiment::Weights | Experiment::AccuracyVsPeriod => {
                if !matches!(self.model.kind, ModelKind::Dtc | ModelKind::DisorderedDtc) {
                    bail!(
                        "{:?} needs a DTC model kind, got {}",
                        self.experiment,
                        self.model.kind
                    );
                }
            }
            Experiment::Ensemble => {
                if !self.model.kind.is_random() {
                    bail!(
                        "ensemble needs a random model kind, got {}",
                        self.model.kind
                    );
                }
                if self.realizations == 0 {
                    bail!("realizations must be positive");
                }
            }
            _ => {}
        }
        if self.experiment.needs_data(self.weights_only) {
            match self.resolved_data_dir() {
                None => bail!("no MNIST directory: set data_dir or ${DATA_DIR_ENV}"),
                Some(d) if !d.is_dir() => bail!("MNIST directory {} does not exist", d.display()),
                Some(_) => {}
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_toml_takes_defaults() {
        let cfg = ExperimentConfig::from_toml("experiment = \"weights\"").unwrap();
        assert_eq!(cfg.model, ModelConfig::default());
        assert_eq!(cfg.train, TrainConfig::default());
        assert_eq!(cfg.periods(), vec![2, 10, 50, 100]);
        cfg.validate().unwrap();
    }

    #[test]
    fn nested_sections_parse() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            experiment = "ensemble"
            realizations = 3
            weights_only = true
            [model]
            kind = "cauchy"
            qubits = 4
            gamma = 0.1
            seed = 9
            [train]
            epochs = 20
            window = [11, 20]
            "#,
        )
        .unwrap();
        assert_eq!(
            cfg.model.spec(),
            FeatureMapSpec::Cauchy {
                dim: 16,
                gamma: 0.1,
                seed: RandomSeed(9)
            }
        );
        assert_eq!(cfg.train.window, (11, 20));
        cfg.validate().unwrap();
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = ExperimentConfig::new(Experiment::ModelTable);
        cfg.models = Some(vec![ModelKind::Dtc]);
        cfg.model.disorder_t = Some(vec![0.5; 10]);
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(ExperimentConfig::from_toml("experiment = \"nope\"").is_err());
        assert!(ExperimentConfig::from_toml("experiment = \"weights\"\ntypo = 1").is_err());
        let mut cfg = ExperimentConfig::new(Experiment::Weights);
        cfg.model.kind = ModelKind::Haar;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::new(Experiment::Ensemble);
        cfg.weights_only = true;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::new(Experiment::Weights);
        cfg.periods = Some(vec![0]);
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::new(Experiment::ModelTable);
        cfg.data_dir = Some("/definitely/not/here".into());
        assert!(cfg.validate().is_err());
    }
}
