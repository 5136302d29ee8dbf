//! Disturbance generators and the small-gain machinery for feedback
//! interconnections.
//!
//! Stochastic kinds draw through counter-based generation keyed on
//! `(seed, step)`, so a draw depends only on its coordinates, never on call
//! order. The feedback kind owns the disturbance state of one trajectory
//! and must not be shared between runs.

use alloc::sync::Arc;
use alloc::vec::Vec;
use serde::Serialize;

use crate::dynamics::DynamicalSystem;
use crate::error::{Error, Result};
use crate::lyapunov::LyapunovEstimate;
use crate::rng::{stream, CounterRng};
use crate::vecops::Norm;

/// Disturbance process coupled to the algorithm state: either genuine
/// dynamics `(k, e, z) -> e'` or a static response `z -> e`.
#[derive(Clone)]
pub enum CouplingLaw {
    Dynamic(Arc<dyn Fn(usize, &[f64], &[f64]) -> Vec<f64> + Send + Sync>),
    Static(Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>),
}

impl CouplingLaw {
    /// Linear disturbance dynamics `e' = rho e + gain z` (dimensions must agree).
    pub fn linear(rho: f64, gain: f64) -> Self {
        CouplingLaw::Dynamic(Arc::new(move |_k, e: &[f64], z: &[f64]| {
            e.iter().zip(z).map(|(ei, zi)| rho * ei + gain * zi).collect()
        }))
    }

    /// Static response `e = gain z`.
    pub fn static_gain(gain: f64) -> Self {
        CouplingLaw::Static(Arc::new(move |z: &[f64]| z.iter().map(|zi| gain * zi).collect()))
    }
}

/// A disturbance generator. Bounded kinds never emit more than their
/// declared magnitude; stochastic kinds are reproducible from the seed.
pub enum DisturbanceSource {
    Zero {
        dim: usize,
    },
    ConstantVector {
        vector: Vec<f64>,
    },
    /// Oracle adversary: pushes the next state directly away from the
    /// equilibrium at full magnitude. A test adversary, not a realistic
    /// disturbance model.
    WorstCaseSign {
        delta: f64,
        dim: usize,
    },
    UniformBall {
        delta: f64,
        dim: usize,
        seed: u64,
    },
    Gaussian {
        sigma2: f64,
        dim: usize,
        seed: u64,
    },
    /// Disturbance with its own dynamics; holds the current `e` state.
    Feedback {
        law: CouplingLaw,
        state: Vec<f64>,
    },
    StaticMap {
        map: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    },
}

impl DisturbanceSource {
    pub fn zero(dim: usize) -> Self {
        DisturbanceSource::Zero { dim }
    }

    pub fn gaussian(sigma2: f64, dim: usize, seed: u64) -> Self {
        DisturbanceSource::Gaussian { sigma2, dim, seed }
    }

    pub fn uniform_ball(delta: f64, dim: usize, seed: u64) -> Self {
        DisturbanceSource::UniformBall { delta, dim, seed }
    }

    pub fn worst_case_sign(delta: f64, dim: usize) -> Self {
        DisturbanceSource::WorstCaseSign { delta, dim }
    }

    pub fn feedback(law: CouplingLaw, initial: Vec<f64>) -> Self {
        DisturbanceSource::Feedback { law, state: initial }
    }

    /// Emit `e_k`. The state argument is required by the state-dependent
    /// kinds and ignored by the rest.
    pub fn draw_for(
        &mut self,
        sys: &DynamicalSystem,
        k: usize,
        z: Option<&[f64]>,
    ) -> Result<Vec<f64>> {
        match self {
            DisturbanceSource::Zero { dim } => Ok(alloc::vec![0.0; *dim]),
            DisturbanceSource::ConstantVector { vector } => Ok(vector.clone()),
            DisturbanceSource::WorstCaseSign { delta, dim } => {
                let z = z.ok_or_else(|| {
                    Error::InvalidInput("worst-case-sign disturbance requires the state".into())
                })?;
                let next = sys.step_nominal(k, z)?;
                let mut dir: Vec<f64> = next
                    .iter()
                    .zip(sys.equilibrium())
                    .map(|(n, x)| n - x)
                    .collect();
                let mut norm = Norm::L2.eval(&dir);
                if norm < 1e-300 {
                    dir = z.iter().zip(sys.equilibrium()).map(|(a, b)| a - b).collect();
                    norm = Norm::L2.eval(&dir);
                }
                if norm < 1e-300 {
                    let mut e = alloc::vec![0.0; *dim];
                    e[0] = -*delta;
                    return Ok(e);
                }
                Ok(dir.iter().map(|d| -*delta * d / norm).collect())
            }
            DisturbanceSource::UniformBall { delta, dim, seed } => {
                let rng = CounterRng::new(*seed, stream::DISTURBANCE);
                Ok(rng.uniform_ball(k as u64, *dim, *delta, 0))
            }
            DisturbanceSource::Gaussian { sigma2, dim, seed } => {
                let rng = CounterRng::new(*seed, stream::DISTURBANCE);
                Ok(rng.gaussian_vec(k as u64, 0, *dim, *sigma2))
            }
            DisturbanceSource::Feedback { law, state } => {
                let z = z.ok_or_else(|| {
                    Error::InvalidInput("feedback disturbance requires the state".into())
                })?;
                let current = state.clone();
                let next = match law {
                    CouplingLaw::Dynamic(f) => f(k, &current, z),
                    CouplingLaw::Static(f) => f(z),
                };
                *state = next;
                Ok(current)
            }
            DisturbanceSource::StaticMap { map } => {
                let z = z.ok_or_else(|| {
                    Error::InvalidInput("static-map disturbance requires the state".into())
                })?;
                Ok(map(z))
            }
        }
    }
}

/// Storage function for the disturbance process with its decay and supply
/// constants: the per-step change along the coupling law is bounded by
/// `-decay |e| + supply |z|`.
#[derive(Clone)]
pub struct DissipationCertificate {
    pub storage: Arc<dyn Fn(usize, &[f64]) -> f64 + Send + Sync>,
    pub decay: f64,
    pub supply: f64,
}

impl DissipationCertificate {
    pub fn norm_storage(decay: f64, supply: f64) -> Self {
        Self {
            storage: Arc::new(|_k, e: &[f64]| Norm::L2.eval(e)),
            decay,
            supply,
        }
    }
}

/// Sampled dissipation check results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissipationReport {
    pub max_violation: f64,
    pub samples_checked: usize,
    pub witness: Option<(usize, Vec<f64>, Vec<f64>)>,
}

/// Max violation of the dissipation inequality over explicit samples of
/// `(k, e, z)`; violations are reported, not thrown.
pub fn check_dissipation(
    cert: &DissipationCertificate,
    law: &CouplingLaw,
    samples: &[(usize, Vec<f64>, Vec<f64>)],
    tolerance: f64,
) -> DissipationReport {
    let mut report = DissipationReport {
        max_violation: f64::NEG_INFINITY,
        samples_checked: 0,
        witness: None,
    };
    for (k, e, z) in samples {
        let next = match law {
            CouplingLaw::Dynamic(f) => f(*k, e, z),
            CouplingLaw::Static(f) => f(z),
        };
        let violation = (cert.storage)(k + 1, &next) - (cert.storage)(*k, e)
            + cert.decay * Norm::L2.eval(e)
            - cert.supply * Norm::L2.eval(z);
        if violation > report.max_violation {
            report.max_violation = violation;
            report.witness = if violation > tolerance {
                Some((*k, e.clone(), z.clone()))
            } else {
                None
            };
        }
        report.samples_checked += 1;
    }
    report
}

/// Result of searching for a composite weight that certifies the
/// interconnection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SmallGainOutcome {
    Feasible {
        weight: f64,
        interval_low: f64,
        interval_high: f64,
    },
    /// The gain product is too large: no weight closes the loop.
    Infeasible {
        required_at_least: f64,
        allowed_below: f64,
    },
}

impl SmallGainOutcome {
    pub fn weight(&self) -> Option<f64> {
        match self {
            SmallGainOutcome::Feasible { weight, .. } => Some(*weight),
            SmallGainOutcome::Infeasible { .. } => None,
        }
    }
}

/// Find a composite weight `m` with `L_V L_e / decay <= m` and
/// `m supply < (1 - tau) * metric_lower_bound`. Policy: the midpoint of
/// the feasible interval, preferring 1 when the interval is `[0, >1)`.
pub fn small_gain_certificate(
    l_v: f64,
    l_e_sup: f64,
    tau_sup: f64,
    decay: f64,
    supply: f64,
    metric_lower_bound: f64,
) -> Result<SmallGainOutcome> {
    if !(tau_sup < 1.0) {
        return Err(Error::InvalidInput(
            "small-gain certificate requires a rate strictly below 1".into(),
        ));
    }
    if decay <= 0.0 || supply <= 0.0 || metric_lower_bound <= 0.0 {
        return Err(Error::InvalidInput(
            "decay, supply, and metric lower bound must be positive".into(),
        ));
    }
    let low = l_v * l_e_sup / decay;
    let high = (1.0 - tau_sup) * metric_lower_bound / supply;
    if low >= high {
        return Ok(SmallGainOutcome::Infeasible {
            required_at_least: low,
            allowed_below: high,
        });
    }
    let weight = if low == 0.0 && high > 1.0 {
        1.0
    } else {
        0.5 * (low + high)
    };
    Ok(SmallGainOutcome::Feasible {
        weight,
        interval_low: low,
        interval_high: high,
    })
}

/// Closed-loop simulation of the algorithm coupled to its disturbance
/// process, with the composite storage series.
#[derive(Debug, Clone, PartialEq)]
pub struct InterconnectionRun {
    pub states: Vec<Vec<f64>>,
    pub disturbances: Vec<Vec<f64>>,
    /// Composite storage `V(k, z_k) + m V_delta(k, e_k)`.
    pub w_series: Vec<f64>,
    /// Joint magnitude `|(z_k, e_k)|`.
    pub joint_norms: Vec<f64>,
    /// False when no feasible weight was supplied: the run still simulates
    /// but makes no decrease claim.
    pub certified: bool,
}

/// Simulate the feedback loop `z' = g(z, e)`, `e' = law(e, z)` and record
/// the composite storage. An infeasible outcome downgrades `certified` and
/// evaluates the storage with weight 1.
pub fn run_interconnection(
    lyapunov: &LyapunovEstimate,
    cert: &DissipationCertificate,
    outcome: &SmallGainOutcome,
    law: &CouplingLaw,
    z0: &[f64],
    e0: &[f64],
    n_steps: usize,
) -> Result<InterconnectionRun> {
    let (weight, certified) = match outcome.weight() {
        Some(m) => (m, true),
        None => (1.0, false),
    };
    let sys = lyapunov.system().clone();
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut disturbances = Vec::with_capacity(n_steps + 1);
    let mut w_series = Vec::with_capacity(n_steps + 1);
    let mut joint_norms = Vec::with_capacity(n_steps + 1);
    let mut z = z0.to_vec();
    let mut e = match law {
        CouplingLaw::Static(f) => f(z0),
        CouplingLaw::Dynamic(_) => e0.to_vec(),
    };
    for k in 0..=n_steps {
        let w = lyapunov.eval(k, &z)? + weight * (cert.storage)(k, &e);
        let joint = libm::sqrt(
            z.iter().map(|v| v * v).sum::<f64>() + e.iter().map(|v| v * v).sum::<f64>(),
        );
        states.push(z.clone());
        disturbances.push(e.clone());
        w_series.push(w);
        joint_norms.push(joint);
        if k == n_steps {
            break;
        }
        let z_next = sys.step_disturbed(k, &z, &e)?;
        let e_next = match law {
            CouplingLaw::Dynamic(f) => f(k, &e, &z),
            CouplingLaw::Static(f) => f(&z_next),
        };
        z = z_next;
        e = e_next;
    }
    Ok(InterconnectionRun {
        states,
        disturbances,
        w_series,
        joint_norms,
        certified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::GainSchedule;
    use crate::metrics::{PseudometricSpec, RateSchedule};
    use alloc::vec;

    fn scalar_gd() -> DynamicalSystem {
        // Descent on 0.5 x^2 with step 0.5: contraction at rate 0.5 with a
        // disturbance entering through the gradient channel.
        DynamicalSystem::new(
            1,
            1,
            Arc::new(|_k, x: &[f64]| vec![0.5 * x[0]]),
            Arc::new(|_k, z: &[f64], e: &[f64]| vec![0.5 * z[0] - 0.5 * e[0]]),
            vec![0.0],
            GainSchedule::Constant(0.5),
        )
        .unwrap()
    }

    #[test]
    fn zero_kind_always_emits_zero() {
        let sys = scalar_gd();
        let mut src = DisturbanceSource::zero(1);
        for k in 0..100 {
            assert_eq!(src.draw_for(&sys, k, None).unwrap(), vec![0.0]);
        }
    }

    #[test]
    fn degenerate_gaussian_is_zero() {
        let sys = scalar_gd();
        let mut src = DisturbanceSource::gaussian(0.0, 1, 7);
        assert_eq!(src.draw_for(&sys, 3, None).unwrap(), vec![0.0]);
    }

    #[test]
    fn bounded_kinds_respect_their_magnitude() {
        let sys = scalar_gd();
        let delta = 0.1;
        let mut ball = DisturbanceSource::uniform_ball(delta, 2, 3);
        let sys2 = DynamicalSystem::autonomous(
            2,
            Arc::new(|_k, x: &[f64]| vec![0.5 * x[0], 0.5 * x[1]]),
            vec![0.0, 0.0],
        )
        .unwrap();
        for k in 0..10_000 {
            let e = ball.draw_for(&sys2, k, None).unwrap();
            assert!(Norm::L2.eval(&e) <= delta + 1e-15);
        }
        let mut sign = DisturbanceSource::worst_case_sign(delta, 1);
        for k in 0..10_000 {
            let e = sign.draw_for(&sys, k, Some(&[1.0])).unwrap();
            assert!((Norm::L2.eval(&e) - delta).abs() <= 1e-12);
        }
    }

    #[test]
    fn gaussian_is_mean_zero_with_matching_second_moment() {
        let sys2 = DynamicalSystem::autonomous(
            2,
            Arc::new(|_k, x: &[f64]| vec![0.5 * x[0], 0.5 * x[1]]),
            vec![0.0, 0.0],
        )
        .unwrap();
        let sigma2 = 0.04;
        let dim = 2usize;
        let n = 100_000usize;
        let mut src = DisturbanceSource::gaussian(sigma2, dim, 11);
        let mut mean = vec![0.0; dim];
        let mut second = 0.0;
        for k in 0..n {
            let e = src.draw_for(&sys2, k, None).unwrap();
            for (m, v) in mean.iter_mut().zip(&e) {
                *m += v;
            }
            second += e.iter().map(|v| v * v).sum::<f64>();
        }
        for m in mean.iter_mut() {
            *m /= n as f64;
        }
        second /= n as f64;
        let sigma = libm::sqrt(sigma2);
        let mean_cap = 4.0 * sigma / libm::sqrt((n * dim) as f64);
        assert!(Norm::L2.eval(&mean) <= mean_cap, "mean {mean:?}");
        assert!((second - sigma2).abs() <= 0.05 * sigma2, "second {second}");
    }

    #[test]
    fn draws_do_not_depend_on_call_order() {
        let sys = scalar_gd();
        let mut a = DisturbanceSource::gaussian(0.01, 1, 5);
        let mut b = DisturbanceSource::gaussian(0.01, 1, 5);
        let first_a = a.draw_for(&sys, 10, None).unwrap();
        let _ = a.draw_for(&sys, 11, None).unwrap();
        let _ = b.draw_for(&sys, 500, None).unwrap();
        let first_b = b.draw_for(&sys, 10, None).unwrap();
        assert_eq!(first_a, first_b);
    }

    #[test]
    fn worst_case_sign_requires_the_state() {
        let sys = scalar_gd();
        let mut src = DisturbanceSource::worst_case_sign(0.1, 1);
        assert!(src.draw_for(&sys, 0, None).is_err());
    }

    #[test]
    fn state_dependent_kinds_require_the_state() {
        let sys = scalar_gd();
        let mut feedback =
            DisturbanceSource::feedback(CouplingLaw::linear(0.5, 0.1), vec![0.0]);
        assert!(feedback.draw_for(&sys, 0, None).is_err());
        let mut static_map = DisturbanceSource::StaticMap {
            map: Arc::new(|z: &[f64]| vec![0.1 * z[0]]),
        };
        assert!(static_map.draw_for(&sys, 0, None).is_err());
    }

    #[test]
    fn constant_vector_kind_repeats_its_payload() {
        let sys = scalar_gd();
        let mut src = DisturbanceSource::ConstantVector {
            vector: vec![-0.05],
        };
        for k in 0..100 {
            assert_eq!(src.draw_for(&sys, k, None).unwrap(), vec![-0.05]);
        }
    }

    #[test]
    fn worst_case_sign_drives_to_the_steady_bound_not_past() {
        // Steady bound for the scalar system: L_V L_e delta / (1 - tau)
        // with unit Lipschitz certificate: 1 * 0.5 * 0.1 / 0.5 = 0.1.
        let sys = scalar_gd();
        let delta = 0.1;
        let steady = 0.1;
        let mut src = DisturbanceSource::worst_case_sign(delta, 1);
        let mut z = vec![1.0];
        let mut last = 0.0;
        for k in 0..300 {
            let e = src.draw_for(&sys, k, Some(&z)).unwrap();
            z = sys.step_disturbed(k, &z, &e).unwrap();
            last = z[0].abs();
            assert!(last <= steady * (1.0 + 1e-9) || last <= 1.0);
        }
        assert!(last <= steady * (1.0 + 1e-9));
        assert!(last >= 0.99 * steady, "adversary should saturate the bound");
    }

    #[test]
    fn dissipation_holds_for_linear_law_with_matched_constants() {
        let rho = 0.6;
        let gain = 0.3;
        let law = CouplingLaw::linear(rho, gain);
        let cert = DissipationCertificate::norm_storage(1.0 - rho, gain);
        let rng = CounterRng::new(2, stream::SAMPLING);
        let samples: Vec<(usize, Vec<f64>, Vec<f64>)> = (0..500u64)
            .map(|t| {
                (
                    t as usize % 7,
                    vec![rng.uniform_in(t, 0, -1.0, 1.0)],
                    vec![rng.uniform_in(t, 1, -1.0, 1.0)],
                )
            })
            .collect();
        let report = check_dissipation(&cert, &law, &samples, 1e-12);
        assert!(report.max_violation <= 1e-12, "violation {}", report.max_violation);
    }

    #[test]
    fn dissipation_equality_at_rest() {
        let law = CouplingLaw::linear(0.6, 0.3);
        let cert = DissipationCertificate::norm_storage(0.4, 0.3);
        let samples = vec![(0usize, vec![0.0], vec![0.0])];
        let report = check_dissipation(&cert, &law, &samples, 1e-12);
        assert_eq!(report.max_violation, 0.0);
    }

    #[test]
    fn overclaimed_decay_reports_positive_violation() {
        let rho = 0.6;
        let law = CouplingLaw::linear(rho, 0.3);
        // Claimed decay twice the true one.
        let cert = DissipationCertificate::norm_storage(2.0 * (1.0 - rho), 0.3);
        let samples = vec![(0usize, vec![1.0], vec![0.0])];
        let report = check_dissipation(&cert, &law, &samples, 1e-12);
        assert!(report.max_violation > 0.0);
        assert!(report.witness.is_some());
    }

    #[test]
    fn small_gain_midpoint_policy() {
        match small_gain_certificate(1.0, 0.01, 0.5, 0.5, 0.5, 1.0).unwrap() {
            SmallGainOutcome::Feasible {
                weight,
                interval_low,
                interval_high,
            } => {
                assert!((interval_low - 0.02).abs() < 1e-15);
                assert!((interval_high - 1.0).abs() < 1e-15);
                assert!((weight - 0.51).abs() < 1e-15);
            }
            other => panic!("expected feasible, got {other:?}"),
        }
    }

    #[test]
    fn small_gain_without_coupling_returns_unit_weight() {
        match small_gain_certificate(1.0, 0.0, 0.5, 0.5, 0.2, 1.0).unwrap() {
            SmallGainOutcome::Feasible { weight, .. } => assert_eq!(weight, 1.0),
            other => panic!("expected feasible, got {other:?}"),
        }
    }

    #[test]
    fn small_gain_infeasible_when_gain_product_too_large() {
        match small_gain_certificate(1.0, 2.0, 0.5, 0.5, 0.5, 1.0).unwrap() {
            SmallGainOutcome::Infeasible {
                required_at_least,
                allowed_below,
            } => {
                assert!(required_at_least >= allowed_below);
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    fn scalar_lyapunov() -> LyapunovEstimate {
        LyapunovEstimate::sup(
            scalar_gd(),
            PseudometricSpec::euclidean(),
            RateSchedule::constant(0.5, 1.0, 1).unwrap(),
            8,
        )
        .with_lipschitz(1.0)
    }

    #[test]
    fn interconnection_at_rest_stays_at_rest() {
        let lyap = scalar_lyapunov();
        let cert = DissipationCertificate::norm_storage(0.5, 0.01);
        let outcome = small_gain_certificate(1.0, 0.5, 0.5, 0.5, 0.01, 1.0).unwrap();
        let law = CouplingLaw::linear(0.5, 0.01);
        let run =
            run_interconnection(&lyap, &cert, &outcome, &law, &[0.0], &[0.0], 50).unwrap();
        assert!(run.certified);
        assert!(run.w_series.iter().all(|w| *w == 0.0));
        assert!(run.joint_norms.iter().all(|n| *n == 0.0));
    }

    #[test]
    fn interconnection_with_weak_coupling_converges() {
        let lyap = scalar_lyapunov();
        let rho = 0.5;
        let gain = 0.01;
        let cert = DissipationCertificate::norm_storage(1.0 - rho, gain);
        let outcome = small_gain_certificate(1.0, 0.5, 0.5, 1.0 - rho, gain, 1.0).unwrap();
        let law = CouplingLaw::linear(rho, gain);
        let run =
            run_interconnection(&lyap, &cert, &outcome, &law, &[1.0], &[0.5], 100).unwrap();
        assert!(run.certified);
        for k in 0..100 {
            if run.joint_norms[k] > 1e-10 {
                assert!(
                    run.w_series[k + 1] < run.w_series[k],
                    "composite storage failed to decrease at step {k}"
                );
            }
        }
        assert!(run.joint_norms[100] <= 1e-8, "final {}", run.joint_norms[100]);
    }

    #[test]
    fn static_map_coupling_reaches_the_joint_fixed_point() {
        let lyap = scalar_lyapunov();
        let cert = DissipationCertificate::norm_storage(1.0, 0.01);
        let outcome = small_gain_certificate(1.0, 0.5, 0.5, 1.0, 0.01, 1.0).unwrap();
        let law = CouplingLaw::static_gain(0.01);
        let run =
            run_interconnection(&lyap, &cert, &outcome, &law, &[1.0], &[0.0], 200).unwrap();
        // Independent oracle: iterate the closed-loop scalar map directly.
        let mut z = 1.0_f64;
        for _ in 0..200 {
            z = 0.5 * z - 0.5 * (0.01 * z);
        }
        let last = run.states.last().unwrap()[0];
        assert!((last - z).abs() <= 1e-12 * (1.0 + z.abs()));
        assert!(last.abs() < 1e-10);
    }

    #[test]
    fn infeasible_certificate_still_simulates_without_claims() {
        let lyap = scalar_lyapunov();
        let cert = DissipationCertificate::norm_storage(0.5, 60.0);
        let outcome = small_gain_certificate(1.0, 0.5, 0.5, 0.5, 60.0, 1.0).unwrap();
        assert!(outcome.weight().is_none());
        let law = CouplingLaw::linear(0.5, 60.0);
        let run = run_interconnection(&lyap, &cert, &outcome, &law, &[1.0], &[0.0], 10).unwrap();
        assert!(!run.certified);
        assert_eq!(run.states.len(), 11);
    }
}
