//! Converse-Lyapunov audit: for every factory bundle, check the two-sided
//! comparison and the per-step decrease on sampled states, and compare the
//! sampled slope of the construction against its closed-form certificate.

use serde::Deserialize;
use serde_json::json;

use iterstab_core::algozoo::{
    make_accelerated_gd, make_gd_convex, make_gd_strongly_convex, make_noisy_gd, AlgoBundle,
};

use crate::config::{parse_params, ExperimentConfig};
use crate::csvout::{Column, Table};
use crate::error::{HarnessError, Result};
use crate::experiments::{accelerated_problem, convex_problem, strongly_convex_problem, ExperimentOutcome};

/// Relative tolerance on the audited inequalities.
pub const AUDIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditParams {
    pub factories: Vec<String>,
    /// Explicit factory selections; when nonempty these replace the named
    /// defaults above.
    pub custom_factories: Vec<crate::specs::FactorySpec>,
    pub n_samples: usize,
    pub k_max: usize,
    pub sigma2: f64,
    pub step_noisy: f64,
    pub step_accelerated: f64,
}

impl Default for AuditParams {
    fn default() -> Self {
        Self {
            factories: vec![
                "gd_convex".into(),
                "gd_strongly_convex".into(),
                "noisy_gd".into(),
                "accelerated_gd".into(),
            ],
            custom_factories: Vec::new(),
            n_samples: 500,
            k_max: 50,
            sigma2: 0.01,
            step_noisy: 0.5,
            step_accelerated: 0.5,
        }
    }
}

pub fn build_bundle(name: &str, params: &AuditParams) -> Result<AlgoBundle> {
    let bundle = match name {
        "gd_convex" => make_gd_convex(&convex_problem())?,
        "gd_strongly_convex" => make_gd_strongly_convex(&strongly_convex_problem(1.0, 3.0, 2.0))?,
        "noisy_gd" => make_noisy_gd(
            &strongly_convex_problem(1.0, 3.0, 2.0),
            params.sigma2,
            params.step_noisy,
        )?,
        "accelerated_gd" => {
            make_accelerated_gd(&accelerated_problem(), params.step_accelerated, params.sigma2)?
        }
        other => {
            return Err(HarnessError::Config(format!("unknown factory: {other}")));
        }
    };
    Ok(bundle)
}

pub fn run(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let params: AuditParams = parse_params(&config.parameters)?;
    let mut outcome = ExperimentOutcome::default();
    let mut names = Vec::new();
    let mut horizons = Vec::new();
    let mut lv_analytic = Vec::new();
    let mut lv_empirical = Vec::new();
    let mut sandwich_cols = Vec::new();
    let mut decrease_cols = Vec::new();
    let mut report = serde_json::Map::new();

    let selections: Vec<(String, AlgoBundle)> = if params.custom_factories.is_empty() {
        params
            .factories
            .iter()
            .map(|name| Ok((name.clone(), build_bundle(name, &params)?)))
            .collect::<Result<_>>()?
    } else {
        params
            .custom_factories
            .iter()
            .enumerate()
            .map(|(i, spec)| Ok((format!("{}#{i}", spec.algo), spec.build()?)))
            .collect::<Result<_>>()?
    };

    for (factory, bundle) in &selections {
        outcome
            .warnings
            .extend(bundle.notes.iter().map(|n| format!("{factory}: {n}")));
        let estimate = bundle.sup_estimate();
        let samples = bundle.sample_states(params.n_samples, config.seed);
        let sandwich = estimate.verify_sandwich(&samples, 0..params.k_max)?;
        let decrease = estimate.verify_decrease(&samples, 0..params.k_max)?;
        let empirical =
            estimate.empirical_lipschitz(&bundle.region, 512, 0..8, config.seed ^ 0x1f)?;
        let analytic = bundle.constants.lyapunov_lipschitz;

        if sandwich.max_violation() > AUDIT_TOL {
            outcome.violations.push(format!(
                "{factory}: sandwich violation {} above {AUDIT_TOL}",
                sandwich.max_violation()
            ));
        }
        if decrease.max_relative_violation > AUDIT_TOL {
            outcome.violations.push(format!(
                "{factory}: decrease violation {} above {AUDIT_TOL}",
                decrease.max_relative_violation
            ));
        }
        if empirical > 1.05 * analytic {
            outcome.violations.push(format!(
                "{factory}: sampled slope {empirical} above 1.05 x certificate {analytic}"
            ));
        }

        report.insert(
            factory.clone(),
            json!({
                "K": bundle.schedule.horizon,
                "L_V_analytic": analytic,
                "L_V_empirical": empirical,
                "sandwich_max_violation": sandwich.max_violation(),
                "decrease_max_violation": decrease.max_relative_violation,
            }),
        );
        names.push(factory.clone());
        horizons.push(bundle.schedule.horizon as i64);
        lv_analytic.push(analytic);
        lv_empirical.push(empirical);
        sandwich_cols.push(sandwich.max_violation());
        decrease_cols.push(decrease.max_relative_violation);
    }

    let table = Table::new()
        .push("factory", Column::Text(names))
        .push("K", Column::Int(horizons))
        .push("L_V_analytic", Column::Float(lv_analytic))
        .push("L_V_empirical", Column::Float(lv_empirical))
        .push("sandwich_max_violation", Column::Float(sandwich_cols))
        .push("decrease_max_violation", Column::Float(decrease_cols));
    outcome.tables.push(("lyapunov_audit".into(), table));
    outcome
        .reports
        .push(("lyapunov_audit".into(), serde_json::Value::Object(report)));
    Ok(outcome)
}
