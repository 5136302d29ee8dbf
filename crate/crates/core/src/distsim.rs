//! Event-triggered relaxed consensus ADMM over multiple agents.
//!
//! Each round runs a local proximal step, relaxed averaging with parameter
//! `alpha`, and a dual ascent:
//!
//! ```text
//! x_i  = argmin_x l_i(x) + (rho/2) |x - z + u_i|^2
//! xh_i = alpha x_i + (1 - alpha) z
//! m_i  = xh_i + u_i
//! z'   = (1/N) sum_i (m_i + e_i)
//! u_i' = u_i + xh_i - z'
//! ```
//!
//! The coordinator consumes the last transmitted message per agent; an
//! agent transmits when its current message has drifted from that value by
//! at least the threshold (per-coordinate). The consumed-minus-current gap
//! is the disturbance `e_i`, so its max norm never exceeds the threshold,
//! and the threshold-zero run reproduces exact ADMM bitwise.
//!
//! The penalty follows `kappa^eps sqrt(gamma_l beta_l)` with the moduli of
//! the stacked local objective (the function the proximal steps actually
//! see); the decay target `1 - alpha / (4 kappa^{eps + 1/2})` keeps the
//! global condition number. Calibration flags configurations whose
//! simulated decay is slower than that target as errors.

use alloc::sync::Arc;
use alloc::vec::Vec;
use serde::Serialize;

use crate::dynamics::{DynamicalSystem, GainSchedule};
use crate::error::{Error, Result};
use crate::lyapunov;
use crate::metrics::{PseudometricSpec, RateSchedule};
use crate::region::Region;
use crate::rng::{stream, CounterRng};
use crate::vecops::Norm;

/// One agent's quadratic objective `0.5 (x - b)' diag(c) (x - b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalQuadratic {
    pub curvature: Vec<f64>,
    pub target: Vec<f64>,
}

/// A consensus network of quadratic agents with its tuning parameters.
#[derive(Debug, Clone)]
pub struct AgentNetwork {
    pub n_agents: usize,
    pub dim: usize,
    pub alpha: f64,
    pub epsilon_tuning: f64,
    /// Proximal penalty `kappa^eps sqrt(gamma_l beta_l)`.
    pub penalty: f64,
    /// Condition number of the global objective.
    pub kappa: f64,
    pub gamma: f64,
    pub beta: f64,
    pub locals: Vec<LocalQuadratic>,
    /// Minimizer of the summed objective.
    pub minimizer: Vec<f64>,
}

impl AgentNetwork {
    /// Build a network whose summed objective has the given curvature
    /// extremes. Per-coordinate curvatures interpolate geometrically from
    /// `gamma` to `beta` and are split across agents with seeded uneven
    /// weights; targets are seeded in `[-1, 1]`.
    pub fn quadratic(
        n_agents: usize,
        dim: usize,
        gamma: f64,
        beta: f64,
        alpha: f64,
        epsilon_tuning: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::InvalidInput(
                "relaxation parameter must lie in (0, 2)".into(),
            ));
        }
        if n_agents == 0 || dim == 0 {
            return Err(Error::InvalidInput("network must be nonempty".into()));
        }
        if !(gamma > 0.0 && beta >= gamma) {
            return Err(Error::InvalidInput("need 0 < gamma <= beta".into()));
        }
        let rng = CounterRng::new(seed, stream::DATASET);
        // Global per-coordinate curvatures from gamma to beta.
        let globals: Vec<f64> = (0..dim)
            .map(|j| {
                if dim == 1 {
                    beta
                } else {
                    gamma * libm::pow(beta / gamma, j as f64 / (dim as f64 - 1.0))
                }
            })
            .collect();
        // Uneven positive split weights summing to one.
        let raw: Vec<f64> = (0..n_agents)
            .map(|i| 1.0 + 0.5 * rng.uniform(i as u64, 0))
            .collect();
        let total: f64 = raw.iter().sum();
        let locals: Vec<LocalQuadratic> = (0..n_agents)
            .map(|i| LocalQuadratic {
                curvature: globals.iter().map(|c| c * raw[i] / total).collect(),
                target: (0..dim)
                    .map(|j| rng.uniform_in(i as u64, 10 + j as u64, -1.0, 1.0))
                    .collect(),
            })
            .collect();
        // Stacked local moduli drive the penalty.
        let mut local_min = f64::INFINITY;
        let mut local_max = 0.0_f64;
        for l in &locals {
            for c in &l.curvature {
                local_min = local_min.min(*c);
                local_max = local_max.max(*c);
            }
        }
        let kappa = beta / gamma;
        let penalty = libm::pow(kappa, epsilon_tuning) * libm::sqrt(local_min * local_max);
        // Minimizer of the sum: componentwise weighted average of targets.
        let minimizer: Vec<f64> = (0..dim)
            .map(|j| {
                let num: f64 = locals.iter().map(|l| l.curvature[j] * l.target[j]).sum();
                num / globals[j]
            })
            .collect();
        Ok(Self {
            n_agents,
            dim,
            alpha,
            epsilon_tuning,
            penalty,
            kappa,
            gamma,
            beta,
            locals,
            minimizer,
        })
    }

    /// Decay target `1 - alpha / (4 kappa^{eps + 1/2})`.
    pub fn decay_target(&self) -> f64 {
        1.0 - self.alpha / (4.0 * libm::pow(self.kappa, self.epsilon_tuning + 0.5))
    }

    /// Stacked state dimension: dual blocks plus the consensus variable.
    pub fn state_dim(&self) -> usize {
        (self.n_agents + 1) * self.dim
    }

    pub fn disturbance_dim(&self) -> usize {
        self.n_agents * self.dim
    }

    fn dual<'a>(&self, state: &'a [f64], i: usize) -> &'a [f64] {
        &state[i * self.dim..(i + 1) * self.dim]
    }

    fn consensus<'a>(&self, state: &'a [f64]) -> &'a [f64] {
        &state[self.n_agents * self.dim..]
    }

    /// Fixed point of the exact rounds: duals absorb the local gradients.
    pub fn equilibrium_state(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.state_dim());
        for l in &self.locals {
            for j in 0..self.dim {
                let grad = l.curvature[j] * (self.minimizer[j] - l.target[j]);
                s.push(-grad / self.penalty);
            }
        }
        s.extend_from_slice(&self.minimizer);
        s
    }

    /// Stacked start: zero duals, consensus variable at `z0`.
    pub fn initial_state(&self, z0: &[f64]) -> Result<Vec<f64>> {
        if z0.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: z0.len(),
            });
        }
        let mut s = alloc::vec![0.0; self.n_agents * self.dim];
        s.extend_from_slice(z0);
        Ok(s)
    }

    /// Per-agent messages `m_i = xh_i + u_i` for the current state.
    pub fn messages(&self, state: &[f64]) -> Vec<Vec<f64>> {
        let z = self.consensus(state);
        (0..self.n_agents)
            .map(|i| {
                let u = self.dual(state, i);
                let l = &self.locals[i];
                (0..self.dim)
                    .map(|j| {
                        // Closed-form proximal step for the diagonal quadratic.
                        let x = (l.curvature[j] * l.target[j]
                            + self.penalty * (z[j] - u[j]))
                            / (l.curvature[j] + self.penalty);
                        let xh = self.alpha * x + (1.0 - self.alpha) * z[j];
                        xh + u[j]
                    })
                    .collect()
            })
            .collect()
    }

    /// Advance one round given the messages the coordinator consumed.
    pub fn round_with_consumed(&self, state: &[f64], consumed: &[Vec<f64>]) -> Vec<f64> {
        let z = self.consensus(state);
        let mut z_next = alloc::vec![0.0; self.dim];
        for m in consumed {
            for j in 0..self.dim {
                z_next[j] += m[j] / self.n_agents as f64;
            }
        }
        let mut next = Vec::with_capacity(self.state_dim());
        for i in 0..self.n_agents {
            let u = self.dual(state, i);
            let l = &self.locals[i];
            for j in 0..self.dim {
                let x = (l.curvature[j] * l.target[j] + self.penalty * (z[j] - u[j]))
                    / (l.curvature[j] + self.penalty);
                let xh = self.alpha * x + (1.0 - self.alpha) * z[j];
                next.push(u[j] + xh - z_next[j]);
            }
        }
        next.extend_from_slice(&z_next);
        next
    }

    /// View the always-communicating rounds as a disturbed system: the
    /// disturbance shifts the consumed messages blockwise, measured in the
    /// max norm.
    pub fn as_system(&self) -> Result<DynamicalSystem> {
        let net_n = Arc::new(self.clone());
        let net_d = net_n.clone();
        let n = self.n_agents;
        let dim = self.dim;
        DynamicalSystem::new(
            self.state_dim(),
            self.disturbance_dim(),
            Arc::new(move |_k, s: &[f64]| {
                let consumed = net_n.messages(s);
                net_n.round_with_consumed(s, &consumed)
            }),
            Arc::new(move |_k, s: &[f64], e: &[f64]| {
                let mut consumed = net_d.messages(s);
                for i in 0..n {
                    for j in 0..dim {
                        consumed[i][j] += e[i * dim + j];
                    }
                }
                net_d.round_with_consumed(s, &consumed)
            }),
            self.equilibrium_state(),
            GainSchedule::Constant(0.0), // calibrated per network
        )
        .map(|sys| sys.with_norms(Norm::L2, Norm::LInf))
    }
}

/// Per-agent transmit memory with the communication threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct EventTrigger {
    pub delta: f64,
    pub last_sent: Vec<Option<Vec<f64>>>,
}

impl EventTrigger {
    pub fn new(delta: f64, n_agents: usize) -> Result<Self> {
        if delta < 0.0 {
            return Err(Error::InvalidInput("threshold must be nonnegative".into()));
        }
        Ok(Self {
            delta,
            last_sent: alloc::vec![None; n_agents],
        })
    }
}

/// One event-triggered round: agents whose message drifted by at least the
/// threshold (max norm, per agent) transmit and refresh their memory; the
/// coordinator consumes the transmit memory. Returns the next state and
/// the number of transmissions.
pub fn admm_step(
    net: &AgentNetwork,
    trigger: &mut EventTrigger,
    state: &[f64],
    _k: usize,
) -> Result<(Vec<f64>, usize)> {
    if state.len() != net.state_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.state_dim(),
            got: state.len(),
        });
    }
    if trigger.last_sent.len() != net.n_agents {
        return Err(Error::DimensionMismatch {
            expected: net.n_agents,
            got: trigger.last_sent.len(),
        });
    }
    let messages = net.messages(state);
    let mut comms = 0usize;
    let mut consumed = Vec::with_capacity(net.n_agents);
    for (i, m) in messages.iter().enumerate() {
        let should_send = match &trigger.last_sent[i] {
            None => true,
            Some(last) => Norm::LInf.dist(m, last) >= trigger.delta,
        };
        if should_send {
            trigger.last_sent[i] = Some(m.clone());
            comms += 1;
        }
        consumed.push(trigger.last_sent[i].clone().unwrap());
    }
    Ok((net.round_with_consumed(state, &consumed), comms))
}

/// Trace of one event-triggered run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRun {
    /// Distance of the consensus variable from the optimum, per round.
    pub error_series: Vec<f64>,
    /// Distance of the full stacked state from its fixed point, per round.
    pub full_distance_series: Vec<f64>,
    pub comms_per_round: Vec<usize>,
    pub total_comms: usize,
    /// Mean consensus error over the last tenth of the rounds.
    pub steady_state_error: f64,
    /// Max observed deviation between consumed and current messages.
    pub max_deviation: f64,
}

/// Simulate `n_iters` event-triggered rounds from zero duals and the given
/// consensus start.
pub fn run_event_based(
    net: &AgentNetwork,
    delta: f64,
    n_iters: usize,
    z0: &[f64],
) -> Result<EventRun> {
    if n_iters == 0 {
        return Err(Error::InvalidInput("need at least one round".into()));
    }
    let mut trigger = EventTrigger::new(delta, net.n_agents)?;
    let mut state = net.initial_state(z0)?;
    let target = net.equilibrium_state();
    let mut error_series = Vec::with_capacity(n_iters + 1);
    let mut full_distance_series = Vec::with_capacity(n_iters + 1);
    let mut comms_per_round = Vec::with_capacity(n_iters);
    let mut max_deviation = 0.0_f64;
    error_series.push(Norm::L2.dist(net.consensus(&state), &net.minimizer));
    full_distance_series.push(Norm::L2.dist(&state, &target));
    for k in 0..n_iters {
        let messages = net.messages(&state);
        let (next, comms) = admm_step(net, &mut trigger, &state, k)?;
        for (i, m) in messages.iter().enumerate() {
            if let Some(last) = &trigger.last_sent[i] {
                max_deviation = max_deviation.max(Norm::LInf.dist(m, last));
            }
        }
        state = next;
        comms_per_round.push(comms);
        error_series.push(Norm::L2.dist(net.consensus(&state), &net.minimizer));
        full_distance_series.push(Norm::L2.dist(&state, &target));
    }
    let tail = (n_iters / 10).max(1);
    let steady_state_error =
        error_series[error_series.len() - tail..].iter().sum::<f64>() / tail as f64;
    let total_comms = comms_per_round.iter().sum();
    Ok(EventRun {
        error_series,
        full_distance_series,
        comms_per_round,
        total_comms,
        steady_state_error,
        max_deviation,
    })
}

/// Constants calibrated once per network for bound evaluation. The state
/// and channel Lipschitz constants are sampled and inflated; the
/// construction constant applies the closed form to them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdmmConstants {
    pub tau_tilde: f64,
    pub c0: f64,
    pub horizon: usize,
    pub state_lipschitz: f64,
    pub lyapunov_lipschitz: f64,
    pub gain: f64,
}

/// Calibration probe radius around the network fixed point.
const PROBE_RADIUS: f64 = 1.0;

/// Calibrate the decay-target schedule against simulated rounds and sample
/// the Lipschitz constants. Errors when the simulated decay is slower than
/// the target rate (a configuration the bounds cannot certify).
pub fn calibrate(net: &AgentNetwork, seed: u64) -> Result<AdmmConstants> {
    let system = net.as_system()?;
    let metric = PseudometricSpec::euclidean();
    let tau_tilde = net.decay_target();
    let region = Region::around(&net.equilibrium_state(), PROBE_RADIUS);
    let starts: Vec<Vec<f64>> = (0..48)
        .map(|i| region.low_discrepancy_point(seed ^ 0xad33, i))
        .collect();
    let provisional = RateSchedule::constant(tau_tilde, 1.0, 1)?;
    let c0_probe = lyapunov::calibrate_overshoot(&system, &metric, &provisional, &starts, 400)?;
    let horizon = lyapunov::detect_horizon(&system, &metric, &provisional, &starts, 400)?;
    let l_f = crate::algozoo::EMPIRICAL_INFLATION
        * system.estimate_lipschitz_state(&region, 2048, 0..1, seed ^ 0x11f)?;
    let l_v = lyapunov::analytic_lipschitz(1.0, l_f, horizon, tau_tilde).value;
    let omega = Region::centered(net.disturbance_dim(), 0.1);
    let gain = crate::algozoo::EMPIRICAL_INFLATION
        * system.estimate_lipschitz_disturbance(0, &region, &omega, 1024, seed ^ 0x22f)?;
    Ok(AdmmConstants {
        tau_tilde,
        c0: c0_probe,
        horizon,
        state_lipschitz: l_f,
        lyapunov_lipschitz: l_v,
        gain,
    })
}

/// One row of the threshold sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeoffRow {
    pub delta: f64,
    pub steady_state_error: f64,
    pub total_comms: usize,
    pub bound_value: f64,
}

/// Run one event-triggered simulation per threshold and pair each steady
/// error with the certified cap `L_V L_e delta / (1 - tau)`.
pub fn tradeoff_sweep(
    net: &AgentNetwork,
    constants: &AdmmConstants,
    deltas: &[f64],
    n_iters: usize,
    z0: &[f64],
) -> Result<Vec<TradeoffRow>> {
    if deltas.is_empty() {
        return Err(Error::InvalidInput("threshold list must be nonempty".into()));
    }
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let run = run_event_based(net, delta, n_iters, z0)?;
        let bound_value = crate::bounds::steady_state_bound(
            constants.lyapunov_lipschitz,
            constants.gain,
            delta,
            constants.tau_tilde,
        )?;
        rows.push(TradeoffRow {
            delta,
            steady_state_error: run.steady_state_error,
            total_comms: run.total_comms,
            bound_value,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds;
    use alloc::vec;

    fn small_net() -> AgentNetwork {
        AgentNetwork::quadratic(5, 2, 1.0, 10.0, 1.0, 0.0, 7).unwrap()
    }

    #[test]
    fn network_rejects_bad_relaxation() {
        assert!(AgentNetwork::quadratic(5, 2, 1.0, 10.0, 0.0, 0.0, 7).is_err());
        assert!(AgentNetwork::quadratic(5, 2, 1.0, 10.0, 2.0, 0.0, 7).is_err());
    }

    #[test]
    fn network_curvatures_sum_to_global_extremes() {
        let net = small_net();
        for j in 0..net.dim {
            let total: f64 = net.locals.iter().map(|l| l.curvature[j]).sum();
            assert!(total >= net.gamma - 1e-12 && total <= net.beta + 1e-12);
        }
        let first: f64 = net.locals.iter().map(|l| l.curvature[0]).sum();
        let last: f64 = net.locals.iter().map(|l| l.curvature[net.dim - 1]).sum();
        assert!((first - net.gamma).abs() < 1e-12);
        assert!((last - net.beta).abs() < 1e-12);
    }

    #[test]
    fn equilibrium_state_is_a_fixed_point() {
        let net = small_net();
        let eq = net.equilibrium_state();
        let consumed = net.messages(&eq);
        let next = net.round_with_consumed(&eq, &consumed);
        assert!(Norm::L2.dist(&next, &eq) <= 1e-12);
    }

    #[test]
    fn exact_rounds_converge_to_the_minimizer() {
        let net = small_net();
        let mut state = net.initial_state(&[2.0, -1.0]).unwrap();
        for _ in 0..200 {
            let consumed = net.messages(&state);
            state = net.round_with_consumed(&state, &consumed);
        }
        let z = &state[net.n_agents * net.dim..];
        assert!(Norm::L2.dist(z, &net.minimizer) <= 1e-10);
    }

    #[test]
    fn zero_threshold_matches_exact_admm_bitwise() {
        let net = small_net();
        let mut trigger = EventTrigger::new(0.0, net.n_agents).unwrap();
        let mut ev = net.initial_state(&[2.0, -1.0]).unwrap();
        let mut exact = ev.clone();
        let mut total = 0usize;
        for k in 0..100 {
            let (next, comms) = admm_step(&net, &mut trigger, &ev, k).unwrap();
            ev = next;
            total += comms;
            let consumed = net.messages(&exact);
            exact = net.round_with_consumed(&exact, &consumed);
            assert_eq!(ev, exact, "event and exact runs diverged at round {k}");
        }
        // Zero threshold means every agent transmits every round.
        assert_eq!(total, 100 * net.n_agents);
    }

    #[test]
    fn infinite_threshold_freezes_the_consensus_iterate() {
        let net = small_net();
        let run = run_event_based(&net, f64::INFINITY, 50, &[2.0, -1.0]).unwrap();
        // One initial exchange, then silence.
        assert_eq!(run.total_comms, net.n_agents);
        let first = run.error_series[1];
        for k in 1..run.error_series.len() {
            assert!((run.error_series[k] - first).abs() <= 1e-12);
        }
    }

    #[test]
    fn deviations_never_exceed_the_threshold() {
        let net = small_net();
        for delta in [1e-3, 1e-2, 1e-1] {
            let run = run_event_based(&net, delta, 400, &[2.0, -1.0]).unwrap();
            assert!(
                run.max_deviation <= delta,
                "deviation {} above threshold {delta}",
                run.max_deviation
            );
        }
    }

    #[test]
    fn communications_drop_after_the_transient() {
        let net = small_net();
        let run = run_event_based(&net, 1e-2, 400, &[2.0, -1.0]).unwrap();
        let late = &run.comms_per_round[300..];
        let late_mean = late.iter().sum::<usize>() as f64 / late.len() as f64;
        assert!(
            late_mean < net.n_agents as f64,
            "no communication savings: {late_mean} per round"
        );
    }

    #[test]
    fn calibration_certifies_the_decay_target() {
        let net = small_net();
        let c = calibrate(&net, 3).unwrap();
        assert!((c.tau_tilde - (1.0 - 1.0 / (4.0 * libm::sqrt(10.0)))).abs() < 1e-12);
        assert!(c.c0 >= 1.0 && c.horizon >= 1);
        assert!(c.gain > 0.0 && c.lyapunov_lipschitz > 0.0);
    }

    #[test]
    fn event_error_stays_under_the_disturbance_bound_series() {
        let net = small_net();
        let c = calibrate(&net, 3).unwrap();
        let n_iters = 400;
        let run = run_event_based(&net, 1e-2, n_iters, &[2.0, -1.0]).unwrap();
        let schedule = RateSchedule::constant(c.tau_tilde, c.c0, c.horizon).unwrap();
        let gains = vec![c.gain; n_iters];
        let magnitudes = vec![1e-2; n_iters];
        let bound = bounds::deterministic_bound_series(
            c.c0,
            &schedule,
            run.full_distance_series[0],
            c.lyapunov_lipschitz,
            &gains,
            &magnitudes,
            n_iters,
        )
        .unwrap();
        for k in 0..=n_iters {
            assert!(
                run.full_distance_series[k] <= bound[k] * (1.0 + 1e-6),
                "full-state distance exceeded the bound at round {k}"
            );
            assert!(run.error_series[k] <= run.full_distance_series[k] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn sweep_is_monotone_and_sound() {
        let net = small_net();
        let c = calibrate(&net, 3).unwrap();
        let rows = tradeoff_sweep(&net, &c, &[1e-3, 1e-2, 1e-1], 400, &[2.0, -1.0]).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].steady_state_error >= 0.95 * w[0].steady_state_error);
            assert!(w[1].total_comms as f64 <= 1.05 * w[0].total_comms as f64);
        }
        for row in &rows {
            assert!(row.steady_state_error <= row.bound_value * (1.0 + 1e-6));
        }
    }

    #[test]
    fn steady_caps_scale_with_the_square_root_of_conditioning() {
        // Fixed gains, thresholds, and tuning: only the decay target moves
        // with the condition number.
        let bound_at = |kappa: f64| {
            let tau = 1.0 - 1.0 / (4.0 * libm::pow(kappa, 0.5));
            bounds::steady_state_bound(1.0, 1.0, 0.1, tau).unwrap()
        };
        let ratio = bound_at(100.0) / bound_at(10.0);
        let target = libm::sqrt(10.0);
        assert!(ratio <= 1.3 * target && ratio >= target / 1.3, "ratio {ratio}");
    }

    #[test]
    fn single_zero_threshold_row_is_exact_with_full_communication() {
        let net = small_net();
        let c = calibrate(&net, 3).unwrap();
        let n_iters = 200;
        let rows = tradeoff_sweep(&net, &c, &[0.0], n_iters, &[2.0, -1.0]).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].steady_state_error <= 1e-8, "{}", rows[0].steady_state_error);
        assert_eq!(rows[0].total_comms, net.n_agents * n_iters);
        assert_eq!(rows[0].bound_value, 0.0);
    }

    #[test]
    fn sweep_rejects_empty_threshold_list() {
        let net = small_net();
        let c = calibrate(&net, 3).unwrap();
        assert!(tradeoff_sweep(&net, &c, &[], 10, &[1.0, 1.0]).is_err());
    }
}
