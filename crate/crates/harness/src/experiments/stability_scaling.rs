//! Replace-one-record stability scaling: the held-out sensitivity estimate
//! must stay under its cap at every dataset size and decay like the
//! inverse size.

use serde::Deserialize;
use serde_json::json;

use iterstab_core::algozoo::{run_stability_experiment, StabilityConfig, StepPolicy};

use crate::config::{parse_params, ExperimentConfig};
use crate::csvout::{Column, Table};
use crate::error::Result;
use crate::experiments::ExperimentOutcome;
use crate::fit::fit_powerlaw;
use crate::svg;

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityParams {
    pub n_values: Vec<usize>,
    pub dim: usize,
    pub mu: f64,
    pub feature_clip: f64,
    pub label_clip: f64,
    pub n_draws: usize,
    pub iters: usize,
    pub slack_delta: f64,
    /// Acceptance window around the minus-one slope.
    pub slope_window: f64,
    pub min_r2: f64,
}

impl Default for StabilityParams {
    fn default() -> Self {
        Self {
            n_values: vec![50, 100, 200, 400, 800, 1600],
            dim: 5,
            mu: 0.3,
            feature_clip: 2.0,
            label_clip: 3.0,
            n_draws: 100,
            iters: 200,
            slack_delta: 0.5,
            slope_window: 0.15,
            min_r2: 0.9,
        }
    }
}

pub fn run(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let params: StabilityParams = parse_params(&config.parameters)?;
    let mut outcome = ExperimentOutcome::default();
    let mut estimates = Vec::new();
    let mut maxima = Vec::new();
    let mut bounds = Vec::new();
    let mut gaps = Vec::new();
    for &n in &params.n_values {
        let result = run_stability_experiment(&StabilityConfig {
            n_records: n,
            dim: params.dim,
            mu: params.mu,
            feature_clip: params.feature_clip,
            label_clip: params.label_clip,
            n_draws: params.n_draws,
            iters: params.iters,
            step: StepPolicy::Optimal,
            slack_delta: params.slack_delta,
            seed: config.seed,
        })?;
        if result.estimate > result.bound {
            outcome.violations.push(format!(
                "n={n}: estimate {} above cap {}",
                result.estimate, result.bound
            ));
        }
        if result.max_estimate > result.bound {
            outcome.violations.push(format!(
                "n={n}: worst draw {} above cap {}",
                result.max_estimate, result.bound
            ));
        }
        estimates.push(result.estimate);
        maxima.push(result.max_estimate);
        bounds.push(result.bound);
        gaps.push(result.mean_parameter_gap);
    }
    let ns: Vec<f64> = params.n_values.iter().map(|n| *n as f64).collect();
    let (slope, _, r2) = fit_powerlaw(&ns, &estimates)?;
    if (slope + 1.0).abs() > params.slope_window {
        outcome.violations.push(format!(
            "estimate-vs-size slope {slope} outside -1 +- {}",
            params.slope_window
        ));
    }
    if r2 < params.min_r2 {
        outcome
            .violations
            .push(format!("estimate-vs-size fit r2 {r2} below {}", params.min_r2));
    }

    let table = Table::new()
        .push(
            "n",
            Column::Int(params.n_values.iter().map(|n| *n as i64).collect()),
        )
        .push("estimate", Column::Float(estimates.clone()))
        .push("max_estimate", Column::Float(maxima))
        .push("bound", Column::Float(bounds))
        .push("mean_parameter_gap", Column::Float(gaps));
    let log_points: Vec<(f64, f64)> = ns
        .iter()
        .zip(&estimates)
        .map(|(n, e)| (libm::log10(*n), libm::log10(*e)))
        .collect();
    let chart = svg::line_chart(
        "sensitivity vs dataset size (log10 both axes)",
        &[svg::Series {
            name: "estimate",
            points: &log_points,
        }],
    );
    outcome.tables.push(("stability_scaling".into(), table));
    outcome.charts.push(("stability_scaling".into(), chart));
    outcome.reports.push((
        "stability_scaling".into(),
        json!({
            "slope": slope,
            "r2": r2,
            "n_draws": params.n_draws,
        }),
    ));
    Ok(outcome)
}
