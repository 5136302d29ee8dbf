//! Config-file schemas for the reusable core objects: rate schedules,
//! disturbance sources, and algorithm factories.

use serde::Deserialize;

use iterstab_core::algozoo::{
    make_accelerated_gd, make_gd_convex, make_gd_strongly_convex, make_noisy_gd, AlgoBundle,
    ProblemSpec,
};
use iterstab_core::disturbance::{CouplingLaw, DisturbanceSource};
use iterstab_core::metrics::RateSchedule;

use crate::error::{HarnessError, Result};

fn default_c0() -> f64 {
    1.0
}

fn default_horizon() -> usize {
    1
}

/// Serializable rate schedule: `{kind, parameters}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Constant {
        tau: f64,
        #[serde(default = "default_c0")]
        c0: f64,
        #[serde(default = "default_horizon")]
        horizon: usize,
    },
    /// `tau(i) = 1 - 1/(i + offset)`, optionally damped by an exponent.
    InverseTime {
        offset: f64,
        #[serde(default)]
        exponent: Option<f64>,
        #[serde(default = "default_c0")]
        c0: f64,
        #[serde(default = "default_horizon")]
        horizon: usize,
    },
    /// Explicit factors; the last entry extends forever.
    Table {
        values: Vec<f64>,
        #[serde(default = "default_c0")]
        c0: f64,
        #[serde(default = "default_horizon")]
        horizon: usize,
    },
}

impl ScheduleSpec {
    pub fn build(&self) -> Result<RateSchedule> {
        let schedule = match self {
            ScheduleSpec::Constant { tau, c0, horizon } => {
                RateSchedule::constant(*tau, *c0, *horizon)?
            }
            ScheduleSpec::InverseTime {
                offset,
                exponent,
                c0,
                horizon,
            } => match exponent {
                Some(e) => RateSchedule::inverse_time_power(*offset, *e, *c0, *horizon)?,
                None => RateSchedule::inverse_time(*offset, *c0, *horizon)?,
            },
            ScheduleSpec::Table { values, c0, horizon } => {
                RateSchedule::from_table(values.clone(), *c0, *horizon)?
            }
        };
        Ok(schedule)
    }
}

/// Serializable disturbance source:
/// `{kind, delta, sigma2, seed, feedback: {rho, gain} | static_map: {gain}}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisturbanceSpec {
    Zero,
    WorstCaseSign { delta: f64 },
    UniformBall { delta: f64, seed: u64 },
    Gaussian { sigma2: f64, seed: u64 },
    Feedback { rho: f64, gain: f64, initial: Vec<f64> },
    StaticMap { gain: f64 },
}

impl DisturbanceSpec {
    pub fn build(&self, dim: usize) -> DisturbanceSource {
        match self {
            DisturbanceSpec::Zero => DisturbanceSource::zero(dim),
            DisturbanceSpec::WorstCaseSign { delta } => {
                DisturbanceSource::worst_case_sign(*delta, dim)
            }
            DisturbanceSpec::UniformBall { delta, seed } => {
                DisturbanceSource::uniform_ball(*delta, dim, *seed)
            }
            DisturbanceSpec::Gaussian { sigma2, seed } => {
                DisturbanceSource::gaussian(*sigma2, dim, *seed)
            }
            DisturbanceSpec::Feedback { rho, gain, initial } => {
                DisturbanceSource::feedback(CouplingLaw::linear(*rho, *gain), initial.clone())
            }
            DisturbanceSpec::StaticMap { gain } => {
                let g = *gain;
                DisturbanceSource::StaticMap {
                    map: std::sync::Arc::new(move |z: &[f64]| {
                        z.iter().map(|zi| g * zi).collect()
                    }),
                }
            }
        }
    }
}

fn default_radius() -> f64 {
    2.0
}

/// Serializable factory selection:
/// `{algo, eigenvalues | (gamma, beta), sigma2, h, radius}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorySpec {
    pub algo: String,
    #[serde(default)]
    pub eigenvalues: Option<Vec<f64>>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub sigma2: f64,
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default = "default_radius")]
    pub radius: f64,
}

impl FactorySpec {
    fn problem(&self) -> Result<ProblemSpec> {
        let eigenvalues = match (&self.eigenvalues, self.gamma, self.beta) {
            (Some(e), _, _) => e.clone(),
            (None, Some(g), Some(b)) => vec![g, b],
            _ => {
                return Err(HarnessError::Config(
                    "factory needs either eigenvalues or gamma and beta".into(),
                ))
            }
        };
        let dim = eigenvalues.len();
        ProblemSpec::quadratic(eigenvalues, vec![0.0; dim], self.radius)
            .map_err(HarnessError::from)
    }

    pub fn build(&self) -> Result<AlgoBundle> {
        let problem = self.problem()?;
        let bundle = match self.algo.as_str() {
            "gd_convex" => make_gd_convex(&problem)?,
            "gd_strongly_convex" => make_gd_strongly_convex(&problem)?,
            "noisy_gd" => {
                let h = self
                    .h
                    .unwrap_or(2.0 / (problem.beta + problem.gamma));
                make_noisy_gd(&problem, self.sigma2, h)?
            }
            "accelerated_gd" => {
                let h = self.h.unwrap_or(0.5);
                make_accelerated_gd(&problem, h, self.sigma2)?
            }
            other => {
                return Err(HarnessError::Config(format!("unknown algo '{other}'")));
            }
        };
        Ok(bundle)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_specs_round_trip_from_json() {
        let constant: ScheduleSpec =
            serde_json::from_str(r#"{"kind": "constant", "tau": 0.5}"#).unwrap();
        assert_eq!(constant.build().unwrap().tau(3), 0.5);
        let inverse: ScheduleSpec =
            serde_json::from_str(r#"{"kind": "inverse_time", "offset": 5.0}"#).unwrap();
        assert!((inverse.build().unwrap().rate_product(0, 4) - 0.5).abs() < 1e-14);
        let damped: ScheduleSpec = serde_json::from_str(
            r#"{"kind": "inverse_time", "offset": 2.0, "exponent": 0.5}"#,
        )
        .unwrap();
        assert!(damped.build().unwrap().tau(0) > 0.5);
        let table: ScheduleSpec =
            serde_json::from_str(r#"{"kind": "table", "values": [0.5, 0.9]}"#).unwrap();
        assert_eq!(table.build().unwrap().tau(10), 0.9);
    }

    #[test]
    fn disturbance_specs_build_the_declared_kinds() {
        let spec: DisturbanceSpec = serde_json::from_str(
            r#"{"kind": "gaussian", "sigma2": 0.01, "seed": 7}"#,
        )
        .unwrap();
        let sys = iterstab_core::dynamics::DynamicalSystem::autonomous(
            1,
            std::sync::Arc::new(|_k, x: &[f64]| vec![0.5 * x[0]]),
            vec![0.0],
        )
        .unwrap();
        let mut src = spec.build(1);
        let e = src.draw_for(&sys, 0, None).unwrap();
        assert_eq!(e.len(), 1);
        let fb: DisturbanceSpec = serde_json::from_str(
            r#"{"kind": "feedback", "rho": 0.5, "gain": 0.01, "initial": [0.1]}"#,
        )
        .unwrap();
        let mut fb_src = fb.build(1);
        assert_eq!(fb_src.draw_for(&sys, 0, Some(&[1.0])).unwrap(), vec![0.1]);
    }

    #[test]
    fn factory_specs_build_bundles() {
        let spec: FactorySpec = serde_json::from_str(
            r#"{"algo": "noisy_gd", "gamma": 1.0, "beta": 3.0, "sigma2": 0.01, "h": 0.5}"#,
        )
        .unwrap();
        let bundle = spec.build().unwrap();
        assert!((bundle.schedule.tau(0) - 0.25).abs() < 1e-15);
        let bad: FactorySpec =
            serde_json::from_str(r#"{"algo": "newton"}"#).unwrap();
        assert!(bad.build().is_err());
    }
}
