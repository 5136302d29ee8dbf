//! Executes one configured experiment: runs it, writes every table, report,
//! and chart under the output directory, and seals a manifest of digests.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{apply_overrides, ExperimentConfig, Overrides};
use crate::error::{HarnessError, Result};
use crate::experiments::{self, ExperimentOutcome};
use crate::manifest::RunManifest;

#[derive(Debug)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
    pub output_dir: PathBuf,
    pub experiment: String,
}

/// Run the experiment described by a raw config value, after applying
/// command-line overrides.
pub fn execute(raw_config: &serde_json::Value, overrides: &Overrides) -> Result<RunOutcome> {
    let mut effective = raw_config.clone();
    apply_overrides(&mut effective, overrides)?;
    let config = ExperimentConfig::from_value(&effective)?;
    let config_hash = ExperimentConfig::canonical_hash(&effective);
    let outcome = experiments::run(&config, overrides.jobs.max(1))?;
    let manifest = write_outputs(&config, &config_hash, &outcome)?;
    Ok(RunOutcome {
        manifest,
        violations: outcome.violations,
        warnings: outcome.warnings,
        output_dir: config.output_dir.clone(),
        experiment: config.experiment.name().to_string(),
    })
}

fn write_outputs(
    config: &ExperimentConfig,
    config_hash: &str,
    outcome: &ExperimentOutcome,
) -> Result<RunManifest> {
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir.display().to_string(), e))?;
    let mut manifest = RunManifest::new(config_hash.to_string());

    for (name, table) in &outcome.tables {
        let path = dir.join(format!("{name}.csv"));
        let body = table.to_csv_string()?;
        write_file(&path, body.as_bytes())?;
        manifest.record(&path, body.as_bytes());
    }
    for (name, report) in &outcome.reports {
        let path = dir.join(format!("{name}.json"));
        let body = serde_json::to_string_pretty(report)
            .map_err(|e| HarnessError::Config(e.to_string()))?
            + "\n";
        write_file(&path, body.as_bytes())?;
        manifest.record(&path, body.as_bytes());
    }
    for (name, svg_body) in &outcome.charts {
        let path = dir.join(format!("{name}.svg"));
        write_file(&path, svg_body.as_bytes())?;
        manifest.record(&path, svg_body.as_bytes());
    }
    if !outcome.violations.is_empty() {
        let path = dir.join("violations.json");
        let body = serde_json::to_string_pretty(&outcome.violations)
            .map_err(|e| HarnessError::Config(e.to_string()))?
            + "\n";
        write_file(&path, body.as_bytes())?;
        manifest.record(&path, body.as_bytes());
    }
    manifest.finalize();
    manifest.write(&dir.join("manifest.json"))?;
    Ok(manifest)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| HarnessError::io(path.display().to_string(), e))
}

/// Convenience: read a config file and execute it.
pub fn execute_file(path: &Path, overrides: &Overrides) -> Result<RunOutcome> {
    let text =
        fs::read_to_string(path).map_err(|e| HarnessError::io(path.display().to_string(), e))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    execute(&value, overrides)
}
