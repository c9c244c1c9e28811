//! Run configuration: one JSON document mirroring the model and prior field
//! names, with scalar fields overridable from the command line.

use std::path::Path;

use hawkes_core::baseline::{multivariate_bench_spec, univariate_bench_spec};
use hawkes_core::mcmc::Hyperparams;
use hawkes_core::model::{bivariate_reference, HawkesSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<HawkesSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyper: Option<Hyperparams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thin: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fix_marks: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

impl RunConfig {
    /// Reads a config document, or a bare spec (an object with an `M` field).
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let parsed = if value.get("M").is_some() {
            serde_json::from_value(value).map(|spec| RunConfig { spec: Some(spec), ..Default::default() })
        } else {
            serde_json::from_value(value)
        };
        parsed.map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }

    pub fn load_opt(path: Option<&Path>) -> Result<Self, CliError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// The model, validated. A preset fills in a missing spec.
    pub fn require_spec(&mut self, preset: Option<Preset>, horizon: Option<f64>) -> Result<HawkesSpec, CliError> {
        if self.spec.is_none() {
            self.spec = preset.map(|p| p.spec(horizon));
        }
        let spec = self
            .spec
            .as_mut()
            .ok_or_else(|| CliError::Validation("no model: pass --config with a spec or --preset".into()))?;
        if let Some(t) = horizon {
            spec.horizon = t;
        }
        spec.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(spec.clone())
    }

    /// SHA-256 of the effective configuration, hex encoded.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// Bivariate recalibration ground truth (default horizon 200).
    Reference,
    /// Univariate timing config (default horizon 1e5).
    Univariate,
    /// 50-dimensional timing config (default horizon 100).
    Multivariate,
}

impl Preset {
    pub fn spec(self, horizon: Option<f64>) -> HawkesSpec {
        match self {
            Preset::Reference => bivariate_reference(horizon.unwrap_or(200.0)),
            Preset::Univariate => univariate_bench_spec(horizon.unwrap_or(100_000.0)),
            Preset::Multivariate => multivariate_bench_spec(50, horizon.unwrap_or(100.0)),
        }
    }
}
