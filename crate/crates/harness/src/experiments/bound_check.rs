//! Deterministic disturbance-bound check on strongly convex descent: the
//! oracle adversary and a random bounded ensemble must both stay under the
//! evaluated bound series, and the adversary's steady error under the
//! steady-state cap.

use serde::Deserialize;
use serde_json::json;

use iterstab_core::algozoo::make_gd_strongly_convex;
use iterstab_core::bounds::{
    self, deterministic_bound_series, steady_state_bound, ConstantsUsed, DETERMINISTIC_TOL,
};
use iterstab_core::dynamics::simulate_disturbed;
use iterstab_core::disturbance::DisturbanceSource;

use crate::config::{parse_params, ExperimentConfig};
use crate::csvout::{Column, Table};
use crate::error::Result;
use crate::experiments::{strongly_convex_problem, ExperimentOutcome};
use crate::parallel::par_map_indexed;
use crate::svg;

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundCheckParams {
    pub gamma: f64,
    pub beta: f64,
    pub delta: f64,
    pub radius: f64,
    pub n_steps: usize,
    pub n_random: usize,
    pub random_steps: usize,
}

impl Default for BoundCheckParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            beta: 3.0,
            delta: 0.1,
            radius: 2.0,
            n_steps: 200,
            n_random: 1000,
            random_steps: 60,
        }
    }
}

pub fn run(config: &ExperimentConfig, jobs: usize) -> Result<ExperimentOutcome> {
    let params: BoundCheckParams = parse_params(&config.parameters)?;
    let mut outcome = ExperimentOutcome::default();
    let problem = strongly_convex_problem(params.gamma, params.beta, params.radius);
    let bundle = make_gd_strongly_convex(&problem)?;
    let dim = problem.dim();
    let l_v = bundle.constants.lyapunov_lipschitz;
    let gain = bundle.constants.gain;
    let tau = bundle.schedule.tau(0);

    // Adversarial run from the slow eigen-direction.
    let mut z0 = vec![0.0; dim];
    z0[0] = params.radius;
    let mut adversary = DisturbanceSource::worst_case_sign(params.delta, dim);
    let worst = simulate_disturbed(
        &bundle.system,
        &mut adversary,
        0,
        &z0,
        params.n_steps,
        Some(&bundle.metric),
    )?;

    let gains = vec![gain; params.n_steps];
    let magnitudes = vec![params.delta; params.n_steps];
    let bound = deterministic_bound_series(
        bundle.schedule.c0,
        &bundle.schedule,
        worst.metric_values[0],
        l_v,
        &gains,
        &magnitudes,
        params.n_steps,
    )?;
    let constants = ConstantsUsed::analytic(
        bundle.schedule.c0,
        l_v,
        &gains,
        None,
        format!("constant {tau}"),
    );
    let report =
        bounds::verify_trajectory_bound(&worst.metric_values, &bound, constants, DETERMINISTIC_TOL)?;
    for v in &report.violations {
        outcome.violations.push(format!(
            "adversarial trajectory exceeded the bound at step {} by {}",
            v.k, v.excess
        ));
    }

    let tail = (params.n_steps / 10).max(1);
    let steady_err = worst.metric_values[worst.metric_values.len() - tail..]
        .iter()
        .sum::<f64>()
        / tail as f64;
    let steady_cap = steady_state_bound(l_v, gain, params.delta, tau)?;
    // Absolute allowance for the zero-disturbance case, where the cap is 0
    // and the tail still carries the decayed transient.
    let floor = 1e-12 * worst.metric_values[0];
    if steady_err > steady_cap * (1.0 + DETERMINISTIC_TOL) + floor {
        outcome.violations.push(format!(
            "steady-state error {steady_err} above cap {steady_cap}"
        ));
    }

    // Random bounded ensemble, one seeded stream per member.
    let bound_prefix = &bound[..=params.random_steps.min(params.n_steps)];
    let excesses: Vec<f64> = par_map_indexed(jobs, params.n_random, |member| {
        let member_seed = config.seed ^ (member as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let mut source = DisturbanceSource::uniform_ball(params.delta, dim, member_seed);
        let traj = simulate_disturbed(
            &bundle.system,
            &mut source,
            0,
            &z0,
            params.random_steps,
            Some(&bundle.metric),
        )
        .expect("simulation cannot fail on valid dimensions");
        traj.metric_values
            .iter()
            .zip(bound_prefix)
            .map(|(emp, b)| emp - b * (1.0 + DETERMINISTIC_TOL))
            .fold(f64::NEG_INFINITY, f64::max)
    });
    let random_violations = excesses.iter().filter(|e| **e > 0.0).count();
    if random_violations > 0 {
        outcome.violations.push(format!(
            "{random_violations} of {} random trajectories exceeded the bound",
            params.n_random
        ));
    }

    let ks: Vec<i64> = (0..=params.n_steps as i64).collect();
    let table = Table::new()
        .push("k", Column::Int(ks))
        .push("bound", Column::Float(bound.clone()))
        .push("empirical", Column::Float(worst.metric_values.clone()));
    let chart = svg::line_chart(
        "adversarial trajectory vs evaluated bound",
        &[
            svg::Series {
                name: "bound",
                points: &bound
                    .iter()
                    .enumerate()
                    .map(|(k, v)| (k as f64, *v))
                    .collect::<Vec<_>>(),
            },
            svg::Series {
                name: "empirical",
                points: &worst
                    .metric_values
                    .iter()
                    .enumerate()
                    .map(|(k, v)| (k as f64, *v))
                    .collect::<Vec<_>>(),
            },
        ],
    );
    outcome.tables.push(("bound_check".into(), table));
    outcome.charts.push(("bound_check".into(), chart));
    outcome.reports.push((
        "bound_check".into(),
        json!({
            "bound_report": report,
            "steady_state_error": steady_err,
            "steady_state_bound": steady_cap,
            "random_trajectories": params.n_random,
            "random_violations": random_violations,
            "rate": tau,
            "lyapunov_lipschitz": l_v,
            "channel_gain": gain,
        }),
    ));
    Ok(outcome)
}
