//! Experiment implementations: each produces tables, JSON reports, charts,
//! and its embedded pass/fail assertions.

pub mod admm_tradeoff;
pub mod bound_check;
pub mod lyapunov_audit;
pub mod privacy_utility;
pub mod small_gain;
pub mod stability_scaling;

use iterstab_core::algozoo::ProblemSpec;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::csvout::Table;
use crate::error::Result;

/// Everything an experiment emits, before any file is written.
#[derive(Debug, Default)]
pub struct ExperimentOutcome {
    pub tables: Vec<(String, Table)>,
    pub reports: Vec<(String, serde_json::Value)>,
    /// Rendered charts keyed by file stem.
    pub charts: Vec<(String, String)>,
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl ExperimentOutcome {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Dispatch one experiment.
pub fn run(config: &ExperimentConfig, jobs: usize) -> Result<ExperimentOutcome> {
    match config.experiment {
        ExperimentKind::LyapunovAudit => lyapunov_audit::run(config),
        ExperimentKind::BoundCheck => bound_check::run(config, jobs),
        ExperimentKind::AdmmTradeoff => admm_tradeoff::run(config),
        ExperimentKind::StabilityScaling => stability_scaling::run(config),
        ExperimentKind::PrivacyUtility => privacy_utility::run(config, jobs),
        ExperimentKind::SmallGain => small_gain::run(config),
    }
}

/// Default audit problems shared across experiments.
pub fn convex_problem() -> ProblemSpec {
    ProblemSpec::quadratic(vec![0.1, 2.0], vec![0.0, 0.0], 2.0).expect("valid quadratic")
}

pub fn strongly_convex_problem(gamma: f64, beta: f64, radius: f64) -> ProblemSpec {
    ProblemSpec::quadratic(vec![gamma, beta], vec![0.0, 0.0], radius).expect("valid quadratic")
}

pub fn accelerated_problem() -> ProblemSpec {
    ProblemSpec::quadratic(vec![1.0, 4.0], vec![0.0, 0.0], 2.0).expect("valid quadratic")
}
