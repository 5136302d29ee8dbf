//! Event-triggered consensus ADMM threshold sweep: accuracy against
//! communication volume, each steady error under its certified cap.

use serde::Deserialize;
use serde_json::json;

use iterstab_core::distsim::{self, AgentNetwork};

use crate::config::{parse_params, ExperimentConfig};
use crate::csvout::{Column, Table};
use crate::error::Result;
use crate::experiments::ExperimentOutcome;
use crate::fit::fit_powerlaw;
use crate::svg;

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmmParams {
    pub n_agents: usize,
    pub dim: usize,
    pub gamma: f64,
    pub beta: f64,
    pub alpha: f64,
    pub epsilon_tuning: f64,
    pub deltas: Vec<f64>,
    pub iters: usize,
    pub z0: Vec<f64>,
    /// Allowed deviation from monotonicity across the sweep.
    pub jitter: f64,
    /// Acceptance window around unit log-log slope.
    pub slope_window: f64,
}

impl Default for AdmmParams {
    fn default() -> Self {
        Self {
            n_agents: 5,
            dim: 2,
            gamma: 1.0,
            beta: 10.0,
            alpha: 1.0,
            epsilon_tuning: 0.0,
            deltas: vec![1e-3, 1e-2, 1e-1],
            iters: 600,
            z0: vec![2.0, -1.0],
            jitter: 0.05,
            slope_window: 0.3,
        }
    }
}

pub fn run(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let params: AdmmParams = parse_params(&config.parameters)?;
    let mut outcome = ExperimentOutcome::default();
    let net = AgentNetwork::quadratic(
        params.n_agents,
        params.dim,
        params.gamma,
        params.beta,
        params.alpha,
        params.epsilon_tuning,
        config.seed,
    )?;
    let constants = distsim::calibrate(&net, config.seed ^ 0xad)?;
    outcome.warnings.push(format!(
        "constants: empirical (state and channel Lipschitz sampled, inflation {})",
        iterstab_core::algozoo::EMPIRICAL_INFLATION
    ));
    let rows = distsim::tradeoff_sweep(&net, &constants, &params.deltas, params.iters, &params.z0)?;

    for row in &rows {
        if row.steady_state_error > row.bound_value * (1.0 + 1e-6) {
            outcome.violations.push(format!(
                "threshold {}: steady error {} above cap {}",
                row.delta, row.steady_state_error, row.bound_value
            ));
        }
    }
    for w in rows.windows(2) {
        if w[1].steady_state_error < (1.0 - params.jitter) * w[0].steady_state_error {
            outcome.violations.push(format!(
                "steady error decreased from {} to {} as the threshold grew",
                w[0].steady_state_error, w[1].steady_state_error
            ));
        }
        if w[1].total_comms as f64 > (1.0 + params.jitter) * w[0].total_comms as f64 {
            outcome.violations.push(format!(
                "communications increased from {} to {} as the threshold grew",
                w[0].total_comms, w[1].total_comms
            ));
        }
    }
    let deltas: Vec<f64> = rows.iter().map(|r| r.delta).collect();
    let errors: Vec<f64> = rows.iter().map(|r| r.steady_state_error).collect();
    let (slope, r2) = if deltas.len() >= 3 && errors.iter().all(|e| *e > 0.0) {
        let (slope, _, r2) = fit_powerlaw(&deltas, &errors)?;
        if (slope - 1.0).abs() > params.slope_window {
            outcome.violations.push(format!(
                "steady-error slope in the threshold is {slope}, outside 1 +- {}",
                params.slope_window
            ));
        }
        (slope, r2)
    } else {
        outcome
            .warnings
            .push("slope check skipped (needs at least 3 thresholds with nonzero error)".into());
        (f64::NAN, f64::NAN)
    };

    let table = Table::new()
        .push("delta", Column::Float(deltas.clone()))
        .push(
            "steady_state_error",
            Column::Float(errors.clone()),
        )
        .push(
            "total_comms",
            Column::Int(rows.iter().map(|r| r.total_comms as i64).collect()),
        )
        .push(
            "bound_value",
            Column::Float(rows.iter().map(|r| r.bound_value).collect()),
        );
    let log_points: Vec<(f64, f64)> = deltas
        .iter()
        .zip(&errors)
        .map(|(d, e)| (libm::log10(*d), libm::log10(*e)))
        .collect();
    let chart = svg::line_chart(
        "steady error vs threshold (log10 both axes)",
        &[svg::Series {
            name: "steady_state_error",
            points: &log_points,
        }],
    );
    outcome.tables.push(("admm_tradeoff".into(), table));
    outcome.charts.push(("admm_tradeoff".into(), chart));
    outcome.reports.push((
        "admm_tradeoff".into(),
        json!({
            "constants": constants,
            "rows": rows,
            "error_vs_threshold_slope": slope,
            "error_vs_threshold_r2": r2,
            "decay_target": net.decay_target(),
            "penalty": net.penalty,
            "kappa": net.kappa,
        }),
    ));
    Ok(outcome)
}
