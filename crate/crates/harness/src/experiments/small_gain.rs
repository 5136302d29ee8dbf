//! Feedback interconnection study: a weak coupling admits a composite
//! weight and the closed loop contracts to the origin; a strong coupling
//! is reported infeasible and no decrease is claimed.

use std::sync::Arc;

use serde::Deserialize;
use serde_json::json;

use iterstab_core::disturbance::{
    run_interconnection, small_gain_certificate, CouplingLaw, DissipationCertificate,
};
use iterstab_core::dynamics::{DynamicalSystem, GainSchedule};
use iterstab_core::lyapunov::LyapunovEstimate;
use iterstab_core::metrics::{PseudometricSpec, RateSchedule};

use crate::config::{parse_params, ExperimentConfig};
use crate::csvout::{Column, Table};
use crate::error::Result;
use crate::experiments::ExperimentOutcome;
use crate::svg;

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmallGainParams {
    /// Contraction factor of the scalar descent loop.
    pub rate: f64,
    /// Decay factor of the disturbance process.
    pub disturbance_decay: f64,
    pub feasible_coupling: f64,
    pub infeasible_coupling: f64,
    pub z0: f64,
    pub e0: f64,
    pub n_steps: usize,
    pub convergence_cap: f64,
}

impl Default for SmallGainParams {
    fn default() -> Self {
        Self {
            rate: 0.5,
            disturbance_decay: 0.5,
            feasible_coupling: 0.01,
            infeasible_coupling: 1.0,
            z0: 1.0,
            e0: 0.5,
            n_steps: 100,
            convergence_cap: 1e-8,
        }
    }
}

fn scalar_descent(rate: f64) -> Result<(DynamicalSystem, LyapunovEstimate)> {
    let gain = 1.0 - rate; // step size h on the unit-curvature objective
    let sys = DynamicalSystem::new(
        1,
        1,
        Arc::new(move |_k, x: &[f64]| vec![rate * x[0]]),
        Arc::new(move |_k, z: &[f64], e: &[f64]| vec![rate * z[0] - gain * e[0]]),
        vec![0.0],
        GainSchedule::Constant(gain),
    )?;
    let schedule = RateSchedule::constant(rate, 1.0, 1)?;
    let est = LyapunovEstimate::sup(sys.clone(), PseudometricSpec::euclidean(), schedule, 8)
        .with_lipschitz(1.0);
    Ok((sys, est))
}

pub fn run(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let params: SmallGainParams = parse_params(&config.parameters)?;
    let mut outcome = ExperimentOutcome::default();
    let (sys, lyap) = scalar_descent(params.rate)?;
    let decay = 1.0 - params.disturbance_decay;
    let l_e = sys.gain_bound(0);
    let l_v = lyap.lipschitz.unwrap();

    // Feasible side.
    let cert = DissipationCertificate::norm_storage(decay, params.feasible_coupling);
    let feasible = small_gain_certificate(
        l_v,
        l_e,
        params.rate,
        decay,
        params.feasible_coupling,
        1.0,
    )?;
    if feasible.weight().is_none() {
        outcome.violations.push(format!(
            "coupling {} was expected to admit a composite weight",
            params.feasible_coupling
        ));
    }
    let law = CouplingLaw::linear(params.disturbance_decay, params.feasible_coupling);
    let run = run_interconnection(
        &lyap,
        &cert,
        &feasible,
        &law,
        &[params.z0],
        &[params.e0],
        params.n_steps,
    )?;
    for k in 0..params.n_steps {
        if run.joint_norms[k] > 1e-10 && run.w_series[k + 1] >= run.w_series[k] {
            outcome.violations.push(format!(
                "composite storage failed to decrease at step {k}"
            ));
            break;
        }
    }
    let final_joint = *run.joint_norms.last().unwrap();
    if final_joint > params.convergence_cap {
        outcome.violations.push(format!(
            "joint state {final_joint} above {} after {} steps",
            params.convergence_cap, params.n_steps
        ));
    }

    // Infeasible side: above the threshold the certificate must refuse.
    let infeasible = small_gain_certificate(
        l_v,
        l_e,
        params.rate,
        decay,
        params.infeasible_coupling,
        1.0,
    )?;
    if infeasible.weight().is_some() {
        outcome.violations.push(format!(
            "coupling {} was expected to be infeasible",
            params.infeasible_coupling
        ));
    }

    let ks: Vec<i64> = (0..=params.n_steps as i64).collect();
    let table = Table::new()
        .push("k", Column::Int(ks))
        .push("joint_norm", Column::Float(run.joint_norms.clone()))
        .push("composite_storage", Column::Float(run.w_series.clone()));
    let points: Vec<(f64, f64)> = run
        .w_series
        .iter()
        .enumerate()
        .map(|(k, w)| (k as f64, libm::log10(w.max(1e-300))))
        .collect();
    let chart = svg::line_chart(
        "composite storage (log10) along the closed loop",
        &[svg::Series {
            name: "composite_storage",
            points: &points,
        }],
    );
    outcome.tables.push(("small_gain".into(), table));
    outcome.charts.push(("small_gain".into(), chart));
    outcome.reports.push((
        "small_gain".into(),
        json!({
            "feasible": feasible,
            "infeasible": infeasible,
            "final_joint_norm": final_joint,
            "certified_run": run.certified,
            "threshold_coupling": decay * (1.0 - params.rate) / (l_v * l_e),
        }),
    ));
    Ok(outcome)
}
