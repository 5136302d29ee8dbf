//! Experiment configuration: a single JSON file with nesting. The
//! canonical hash covers the effective config (seed included) with the
//! output directory stripped, so runs into different directories remain
//! comparable.

use std::path::PathBuf;

use serde::Deserialize;

use crate::error::{HarnessError, Result};
use crate::manifest::canonical_config_hash;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    LyapunovAudit,
    BoundCheck,
    AdmmTradeoff,
    StabilityScaling,
    PrivacyUtility,
    SmallGain,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::LyapunovAudit => "lyapunov_audit",
            ExperimentKind::BoundCheck => "bound_check",
            ExperimentKind::AdmmTradeoff => "admm_tradeoff",
            ExperimentKind::StabilityScaling => "stability_scaling",
            ExperimentKind::PrivacyUtility => "privacy_utility",
            ExperimentKind::SmallGain => "small_gain",
        }
    }
}

fn default_n_mc() -> usize {
    200
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Required: no unseeded runs.
    pub seed: u64,
    #[serde(default = "default_n_mc")]
    pub n_mc: usize,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub parameters: serde_json::Value,
}

impl ExperimentConfig {
    /// Parse an effective config value (after overrides).
    pub fn from_value(value: &serde_json::Value) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_value(value.clone())
            .map_err(|e| HarnessError::Config(format!("invalid config: {e}")))?;
        if config.n_mc == 0 {
            return Err(HarnessError::Config("n_mc must be positive".into()));
        }
        Ok(config)
    }

    /// Canonical hash over the effective config without the output path.
    pub fn canonical_hash(value: &serde_json::Value) -> String {
        let mut stripped = value.clone();
        if let Some(map) = stripped.as_object_mut() {
            map.remove("output_dir");
        }
        canonical_config_hash(&stripped)
    }
}

/// Command-line overrides applied to the raw config value before parsing.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub jobs: usize,
    pub strict: bool,
}

pub fn apply_overrides(value: &mut serde_json::Value, overrides: &Overrides) -> Result<()> {
    let map = value
        .as_object_mut()
        .ok_or_else(|| HarnessError::Config("config must be a JSON object".into()))?;
    if let Some(seed) = overrides.seed {
        map.insert("seed".into(), serde_json::json!(seed));
    }
    if let Some(dir) = &overrides.output_dir {
        map.insert(
            "output_dir".into(),
            serde_json::json!(dir.display().to_string()),
        );
    }
    Ok(())
}

/// Deserialize experiment parameters with defaults and field diagnostics.
pub fn parse_params<T>(value: &serde_json::Value) -> Result<T>
where
    T: serde::de::DeserializeOwned + Default,
{
    if value.is_null() {
        return Ok(T::default());
    }
    serde_json::from_value(value.clone())
        .map_err(|e| HarnessError::Config(format!("invalid parameters: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let v: serde_json::Value = serde_json::from_str(
            r#"{"experiment": "bound_check", "seed": 7, "output_dir": "out"}"#,
        )
        .unwrap();
        let c = ExperimentConfig::from_value(&v).unwrap();
        assert_eq!(c.experiment, ExperimentKind::BoundCheck);
        assert_eq!(c.n_mc, 200);
    }

    #[test]
    fn missing_seed_is_a_config_error() {
        let v: serde_json::Value =
            serde_json::from_str(r#"{"experiment": "bound_check", "output_dir": "out"}"#).unwrap();
        assert!(ExperimentConfig::from_value(&v).is_err());
    }

    #[test]
    fn unknown_fields_are_flagged() {
        let v: serde_json::Value = serde_json::from_str(
            r#"{"experiment": "bound_check", "seed": 1, "output_dir": "o", "sead": 2}"#,
        )
        .unwrap();
        let err = ExperimentConfig::from_value(&v).unwrap_err();
        assert!(err.to_string().contains("sead"));
    }

    #[test]
    fn hash_ignores_output_dir_but_not_seed() {
        let a: serde_json::Value = serde_json::from_str(
            r#"{"experiment": "bound_check", "seed": 1, "output_dir": "x"}"#,
        )
        .unwrap();
        let b: serde_json::Value = serde_json::from_str(
            r#"{"experiment": "bound_check", "seed": 1, "output_dir": "y"}"#,
        )
        .unwrap();
        let c: serde_json::Value = serde_json::from_str(
            r#"{"experiment": "bound_check", "seed": 2, "output_dir": "x"}"#,
        )
        .unwrap();
        assert_eq!(
            ExperimentConfig::canonical_hash(&a),
            ExperimentConfig::canonical_hash(&b)
        );
        assert_ne!(
            ExperimentConfig::canonical_hash(&a),
            ExperimentConfig::canonical_hash(&c)
        );
    }
}
