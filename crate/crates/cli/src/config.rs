//! Experiment configuration: the same record is filled from flags or from a
//! TOML file, and echoed into every report.

use crate::registry::{FunctionPreset, IntegrandPair, LawPreset, PeriodicPreset, SchemePreset, SdeName};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ExperimentName {
    /// Nearest-graduation identity, residual bounds and the moments of theta.
    Exactness,
    Rajchman,
    Uniformity,
    Gamma,
    Bias,
    ChangeOfMeasure,
    Rootzen,
    ErrorIntegrals,
    QuadraticForm,
    EulerError,
    All,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

pub const DEFAULT_SEED: u64 = 7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law: Option<LawPreset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemePreset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<FunctionPreset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi: Option<FunctionPreset>,
    /// Density factor `h` for the change of measure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<FunctionPreset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periodic: Option<PeriodicPreset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrands: Option<IntegrandPair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sde: Option<SdeName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Where the report goes; not echoed, so reruns to different files
    /// produce identical bytes.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_k_sigma")]
    pub k_sigma: f64,
}

fn default_level() -> f64 {
    gradlim::stats::DEFAULT_LEVEL
}

fn default_k_sigma() -> f64 {
    gradlim::stats::DEFAULT_K_SIGMA
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("{0}")]
    Invalid(String),
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentName) -> Self {
        Self {
            experiment,
            law: None,
            scheme: None,
            phi: None,
            chi: None,
            density: None,
            periodic: None,
            integrands: None,
            sde: None,
            n_list: None,
            samples: None,
            seed: None,
            out: None,
            format: Format::default(),
            level: default_level(),
            k_sigma: default_k_sigma(),
        }
    }

    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse { path: path.to_path_buf(), source })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is plain data")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(self.level > 0.0 && self.level < 1.0) {
            return bad(format!("level must lie in (0, 1), got {}", self.level));
        }
        if !(self.k_sigma > 0.0 && self.k_sigma.is_finite()) {
            return bad(format!("k_sigma must be positive, got {}", self.k_sigma));
        }
        if let Some(list) = &self.n_list {
            if list.is_empty() || list.contains(&0) {
                return bad("n_list must hold positive integers".into());
            }
            if list.windows(2).any(|w| w[1] <= w[0]) {
                return bad("n_list must be strictly increasing".into());
            }
        }
        if self.samples == Some(0) {
            return bad("samples must be positive".into());
        }
        if self.experiment == ExperimentName::All {
            if self.seed.is_none() {
                return bad("the full suite needs an explicit seed".into());
            }
            let presets = [
                self.law.is_some(),
                self.scheme.is_some(),
                self.phi.is_some(),
                self.chi.is_some(),
                self.density.is_some(),
                self.periodic.is_some(),
                self.integrands.is_some(),
                self.sde.is_some(),
                self.n_list.is_some(),
                self.samples.is_some(),
            ];
            if presets.iter().any(|&p| p) {
                return bad("the full suite runs fixed cases; presets, n_list and samples cannot be overridden".into());
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn policy(&self) -> gradlim::stats::VerdictPolicy {
        gradlim::stats::VerdictPolicy::default().with_k_sigma(self.k_sigma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let mut c = ExperimentConfig::new(ExperimentName::Gamma);
        c.law = Some(LawPreset::Normal);
        c.phi = Some(FunctionPreset::Sin);
        c.n_list = Some(vec![64, 256]);
        c.seed = Some(3);
        let back = ExperimentConfig::from_toml(&c.to_toml(), Path::new("x.toml")).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_names_are_rejected() {
        let p = Path::new("x.toml");
        assert!(ExperimentConfig::from_toml("experiment = \"gamma\"\nlaw = \"cauchy\"\n", p).is_err());
        assert!(ExperimentConfig::from_toml("experiment = \"nonsense\"\n", p).is_err());
        assert!(ExperimentConfig::from_toml("experiment = \"gamma\"\nbogus = 1\n", p).is_err());
    }

    #[test]
    fn suite_needs_seed_and_no_overrides() {
        let mut c = ExperimentConfig::new(ExperimentName::All);
        assert!(c.validate().is_err());
        c.seed = Some(7);
        c.validate().unwrap();
        c.samples = Some(10);
        assert!(c.validate().is_err());
    }

    #[test]
    fn n_list_must_increase() {
        let mut c = ExperimentConfig::new(ExperimentName::Gamma);
        c.n_list = Some(vec![4, 4]);
        assert!(c.validate().is_err());
        c.n_list = Some(vec![0, 4]);
        assert!(c.validate().is_err());
    }
}
