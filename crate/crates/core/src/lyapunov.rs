//! Executable converse Lyapunov constructions.
//!
//! Given a system whose nominal iteration converges at a certified rate
//! schedule, two Lyapunov functions are built directly from trajectories:
//!
//! * the sup form `V(k, xi) = max_{k'} d(flow(k', k, xi), x*) * Phi(k, k')`,
//!   evaluated as a finite max over `[0, horizon]` — valid because past the
//!   settling horizon every weighted term is dominated by the first one;
//! * the sum form, the same terms summed up to a horizon `M`, which is
//!   smooth whenever the metric and flow are, and therefore supports a
//!   second-order (stochastic) decrease analysis.
//!
//! Both come with certified constants: a Lipschitz bound for the sup form
//! and a Hessian bound for the sum form. The closed-form Hessian constant
//! mirrors the textbook derivation; the series form evaluates the same
//! derivation term by term and is the one the factories certify, since the
//! closed form undershoots when the state Lipschitz constant is below one.

use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;
use serde::Serialize;

use crate::dynamics::DynamicalSystem;
use crate::error::{Error, Result};
use crate::metrics::{FlaggedValue, PseudometricSpec, RangeFlag, RateSchedule};
use crate::region::Region;
use crate::rng::{stream, CounterRng};
use crate::vecops::{self, Norm};

/// Which construction an estimate evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LyapunovForm {
    Sup,
    Sum,
}

/// An evaluable Lyapunov function with its certified constants.
#[derive(Clone)]
pub struct LyapunovEstimate {
    form: LyapunovForm,
    horizon: usize,
    system: DynamicalSystem,
    metric: PseudometricSpec,
    schedule: RateSchedule,
    /// Lipschitz certificate `L_V` (sup form).
    pub lipschitz: Option<f64>,
    /// Hessian certificate `L_H` (sum form).
    pub hessian: Option<f64>,
}

impl LyapunovEstimate {
    pub fn sup(
        system: DynamicalSystem,
        metric: PseudometricSpec,
        schedule: RateSchedule,
        horizon: usize,
    ) -> Self {
        Self {
            form: LyapunovForm::Sup,
            horizon,
            system,
            metric,
            schedule,
            lipschitz: None,
            hessian: None,
        }
    }

    /// Sum form over `M = horizon` terms; requires `horizon` at least the
    /// schedule's settling horizon so the decrease inequality holds.
    pub fn sum(
        system: DynamicalSystem,
        metric: PseudometricSpec,
        schedule: RateSchedule,
        horizon: usize,
    ) -> Result<Self> {
        if horizon < schedule.horizon {
            return Err(Error::InvalidInput(alloc::format!(
                "sum-form horizon {horizon} below the schedule settling horizon {}",
                schedule.horizon
            )));
        }
        Ok(Self {
            form: LyapunovForm::Sum,
            horizon,
            system,
            metric,
            schedule,
            lipschitz: None,
            hessian: None,
        })
    }

    pub fn with_lipschitz(mut self, l_v: f64) -> Self {
        self.lipschitz = Some(l_v);
        self
    }

    pub fn with_hessian(mut self, l_h: f64) -> Self {
        self.hessian = Some(l_h);
        self
    }

    pub fn form(&self) -> LyapunovForm {
        self.form
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn system(&self) -> &DynamicalSystem {
        &self.system
    }

    pub fn metric(&self) -> &PseudometricSpec {
        &self.metric
    }

    pub fn schedule(&self) -> &RateSchedule {
        &self.schedule
    }

    /// Upper sandwich constant: `c0` for the sup form, `(M + 1) c0` for the
    /// sum form (one factor per term of the sum).
    pub fn upper_constant(&self) -> f64 {
        match self.form {
            LyapunovForm::Sup => self.schedule.c0,
            LyapunovForm::Sum => (self.horizon as f64 + 1.0) * self.schedule.c0,
        }
    }

    /// Evaluate the construction at `(k, xi)`. Costs `horizon` flow steps.
    pub fn eval(&self, k: usize, xi: &[f64]) -> Result<f64> {
        Ok(self.eval_terms(k, xi, self.horizon)?.0)
    }

    /// Evaluate with an explicit horizon override (diagnostics).
    pub fn eval_with_horizon(&self, k: usize, xi: &[f64], horizon: usize) -> Result<f64> {
        Ok(self.eval_terms(k, xi, horizon)?.0)
    }

    /// Index attaining the max of the sup form (first index on ties).
    pub fn argmax_index(&self, k: usize, xi: &[f64], horizon: usize) -> Result<usize> {
        Ok(self.eval_terms(k, xi, horizon)?.1)
    }

    fn eval_terms(&self, k: usize, xi: &[f64], horizon: usize) -> Result<(f64, usize)> {
        let equilibrium = self.system.equilibrium().to_vec();
        let mut x = xi.to_vec();
        let mut log_weight = 0.0_f64;
        let mut best = 0.0_f64;
        let mut best_index = 0usize;
        let mut sum = 0.0_f64;
        for kprime in 0..=horizon {
            if kprime > 0 {
                x = self.system.step_nominal(k + kprime - 1, &x)?;
                let t = self.schedule.tau(k + kprime - 1);
                log_weight -= libm::log(t); // t == 0 drives the weight to +inf
            }
            let d = self.metric.eval(&x, &equilibrium);
            // A zero distance contributes nothing even under an unbounded weight.
            let term = if d == 0.0 { 0.0 } else { d * libm::exp(log_weight) };
            if term > best {
                best = term;
                best_index = kprime;
            }
            sum += term;
        }
        match self.form {
            LyapunovForm::Sup => Ok((best, best_index)),
            LyapunovForm::Sum => Ok((sum, best_index)),
        }
    }

    /// Sampled max secant slope of the construction over a region.
    pub fn empirical_lipschitz(
        &self,
        region: &Region,
        n_pairs: usize,
        k_range: Range<usize>,
        seed: u64,
    ) -> Result<f64> {
        if n_pairs == 0 {
            return Err(Error::InvalidInput("n_pairs must be at least 1".into()));
        }
        let ks: Vec<usize> = if k_range.is_empty() {
            alloc::vec![0]
        } else {
            k_range.collect()
        };
        let probe_scale = 1e-4 * region.diameter();
        let rng = CounterRng::new(seed ^ 0x11ff, stream::PROBE);
        let mut best = 0.0_f64;
        for i in 0..n_pairs {
            let k = ks[i % ks.len()];
            let x1 = region.low_discrepancy_point(seed, 2 * i as u64);
            let x2 = region.low_discrepancy_point(seed, 2 * i as u64 + 1);
            best = best.max(self.secant(k, &x1, &x2)?);
            let mut dir: Vec<f64> = (0..region.dim())
                .map(|j| rng.gaussian(i as u64, j as u64))
                .collect();
            let n = Norm::L2.eval(&dir);
            if n > 1e-300 {
                for v in dir.iter_mut() {
                    *v /= n;
                }
                let xp = vecops::axpy(&x1, probe_scale, &dir);
                best = best.max(self.secant(k, &x1, &xp)?);
            }
        }
        Ok(best)
    }

    fn secant(&self, k: usize, x1: &[f64], x2: &[f64]) -> Result<f64> {
        let denom = Norm::L2.dist(x1, x2);
        if denom < 1e-300 {
            return Ok(0.0);
        }
        let v1 = self.eval(k, x1)?;
        let v2 = self.eval(k, x2)?;
        Ok((v1 - v2).abs() / denom)
    }

    /// Max violation of the two-sided comparison with the metric:
    /// `d <= V <= upper_constant * d`.
    pub fn verify_sandwich(&self, samples: &[Vec<f64>], k_range: Range<usize>) -> Result<SandwichReport> {
        let ks: Vec<usize> = if k_range.is_empty() {
            alloc::vec![0]
        } else {
            k_range.collect()
        };
        let upper = self.upper_constant();
        let equilibrium = self.system.equilibrium().to_vec();
        let mut report = SandwichReport::default();
        for (i, xi) in samples.iter().enumerate() {
            let k = ks[i % ks.len()];
            let d = self.metric.eval(xi, &equilibrium);
            let v = self.eval(k, xi)?;
            report.max_lower_violation = report.max_lower_violation.max((d - v) / (1.0 + d));
            report.max_upper_violation = report
                .max_upper_violation
                .max((v - upper * d) / (1.0 + upper * d));
        }
        Ok(report)
    }

    /// Max violation of the per-step decrease along nominal updates:
    /// `V(k+1, f_k(xi)) <= tau(k) V(k, xi)`.
    pub fn verify_decrease(&self, samples: &[Vec<f64>], k_range: Range<usize>) -> Result<DecreaseReport> {
        let ks: Vec<usize> = if k_range.is_empty() {
            alloc::vec![0]
        } else {
            k_range.collect()
        };
        let mut report = DecreaseReport::default();
        for (i, xi) in samples.iter().enumerate() {
            let k = ks[i % ks.len()];
            let v_here = self.eval(k, xi)?;
            let next = self.system.step_nominal(k, xi)?;
            let v_next = self.eval(k + 1, &next)?;
            let violation = v_next - self.schedule.tau(k) * v_here;
            let relative = violation / (1.0 + v_here);
            if relative > report.max_relative_violation {
                report.max_relative_violation = relative;
                report.max_violation = violation;
                report.witness_step = k;
                report.witness_state = xi.clone();
            }
            report.samples_checked += 1;
        }
        Ok(report)
    }

    /// Monte Carlo check of the expected decrease under a mean-zero
    /// disturbance with second moment `sigma2`:
    ///
    /// `E V(k+1, g_k(z, n)) <= tau(k) V(k, z) + 0.5 L_H L_ek^2 sigma2`
    ///
    /// along a realized noisy path from `z0`. Requires the sum form, a
    /// Hessian certificate, and an affine disturbance channel; the left
    /// side is debited by a 99% confidence half-width before comparing.
    pub fn verify_stochastic_decrease(
        &self,
        sigma2: f64,
        n_mc: usize,
        n_steps: usize,
        z0: &[f64],
        seed: u64,
    ) -> Result<StochasticDecreaseReport> {
        if self.form != LyapunovForm::Sum {
            return Err(Error::InvalidInput(
                "stochastic decrease requires the sum form".into(),
            ));
        }
        let l_h = self.hessian.ok_or_else(|| {
            Error::InvalidInput("stochastic decrease requires a Hessian certificate".into())
        })?;
        if n_mc < 2 {
            return Err(Error::InvalidInput("n_mc must be at least 2".into()));
        }
        self.require_affine_channel(z0, seed)?;
        let dim_e = self.system.dim_disturbance();
        let rng = CounterRng::new(seed, stream::MONTE_CARLO);
        let mut z = z0.to_vec();
        let mut steps = Vec::with_capacity(n_steps);
        let mut holds = true;
        for k in 0..n_steps {
            let v_here = self.eval(k, &z)?;
            let l_ek = self.system.gain_bound(k);
            let rhs = self.schedule.tau(k) * v_here + 0.5 * l_h * l_ek * l_ek * sigma2;
            let mut mean = 0.0_f64;
            let mut m2 = 0.0_f64;
            for i in 0..n_mc {
                let noise = rng.gaussian_vec(k as u64, (i * dim_e) as u64, dim_e, sigma2);
                let v_next = self.eval(k + 1, &self.system.step_disturbed(k, &z, &noise)?)?;
                let delta = v_next - mean;
                mean += delta / (i as f64 + 1.0);
                m2 += delta * (v_next - mean);
            }
            let sd = libm::sqrt(m2 / (n_mc as f64 - 1.0));
            let half_width = 2.576 * sd / libm::sqrt(n_mc as f64);
            let slack = rhs - (mean - half_width);
            if slack < 0.0 {
                holds = false;
            }
            steps.push(StochasticStep {
                step: k,
                lhs_mean: mean,
                ci_half_width: half_width,
                rhs,
                slack,
            });
            // Advance along one designated noisy draw outside the MC block.
            let advance = rng.gaussian_vec(k as u64, (n_mc * dim_e) as u64, dim_e, sigma2);
            z = self.system.step_disturbed(k, &z, &advance)?;
        }
        Ok(StochasticDecreaseReport { steps, holds })
    }

    /// Sampled check that the disturbance enters affinely.
    fn require_affine_channel(&self, z0: &[f64], seed: u64) -> Result<()> {
        let dim_e = self.system.dim_disturbance();
        let rng = CounterRng::new(seed ^ 0xaff1, stream::PROBE);
        for trial in 0..16u64 {
            let z: Vec<f64> = z0
                .iter()
                .enumerate()
                .map(|(j, v)| v + rng.uniform_in(trial, j as u64, -1.0, 1.0))
                .collect();
            let e1: Vec<f64> = (0..dim_e)
                .map(|j| rng.uniform_in(trial, 100 + j as u64, -1.0, 1.0))
                .collect();
            let e2: Vec<f64> = (0..dim_e)
                .map(|j| rng.uniform_in(trial, 200 + j as u64, -1.0, 1.0))
                .collect();
            let base = self.system.step_disturbed(0, &z, &alloc::vec![0.0; dim_e])?;
            let g1 = self.system.step_disturbed(0, &z, &e1)?;
            let g2 = self.system.step_disturbed(0, &z, &e2)?;
            let both = self.system.step_disturbed(0, &z, &vecops::add(&e1, &e2))?;
            let scale = Norm::L2.eval(&base) + 1.0;
            for j in 0..z.len() {
                let additive = (both[j] - base[j]) - ((g1[j] - base[j]) + (g2[j] - base[j]));
                if additive.abs() > 1e-9 * scale {
                    return Err(Error::ContractViolation(String::from(
                        "disturbance channel is not affine",
                    )));
                }
            }
        }
        Ok(())
    }
}

impl core::fmt::Debug for LyapunovEstimate {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("LyapunovEstimate")
            .field("form", &self.form)
            .field("horizon", &self.horizon)
            .field("lipschitz", &self.lipschitz)
            .field("hessian", &self.hessian)
            .finish()
    }
}

/// Two-sided comparison violations (relative).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SandwichReport {
    pub max_lower_violation: f64,
    pub max_upper_violation: f64,
}

impl SandwichReport {
    pub fn max_violation(&self) -> f64 {
        self.max_lower_violation.max(self.max_upper_violation)
    }
}

/// Nominal decrease violations with the worst witness.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DecreaseReport {
    pub max_violation: f64,
    pub max_relative_violation: f64,
    pub witness_step: usize,
    pub witness_state: Vec<f64>,
    pub samples_checked: usize,
}

/// One step of the Monte Carlo expected-decrease check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StochasticStep {
    pub step: usize,
    pub lhs_mean: f64,
    pub ci_half_width: f64,
    pub rhs: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StochasticDecreaseReport {
    pub steps: Vec<StochasticStep>,
    pub holds: bool,
}

/// Smallest settling horizon `K <= k_max` such that for every sample and
/// every `k' in [K, k_max]` the flow satisfies the rate inequality without
/// the overshoot constant.
pub fn detect_horizon(
    system: &DynamicalSystem,
    metric: &PseudometricSpec,
    schedule: &RateSchedule,
    samples: &[Vec<f64>],
    k_max: usize,
) -> Result<usize> {
    if k_max == 0 {
        return Err(Error::InvalidInput("k_max must be at least 1".into()));
    }
    if samples.is_empty() {
        return Err(Error::InvalidInput("sample set must be nonempty".into()));
    }
    let equilibrium = system.equilibrium().to_vec();
    // Absolute allowance tied to the sample scale: trajectories bottom out
    // at the float noise floor, where no rate inequality is testable.
    let scale = samples
        .iter()
        .map(|xi| metric.eval(xi, &equilibrium))
        .fold(0.0_f64, f64::max);
    let noise_floor = 1e-13 * scale;
    let mut last_fail = 0usize;
    let mut worst_ratio = 0.0_f64;
    for xi in samples {
        let d0 = metric.eval(xi, &equilibrium);
        let mut x = xi.to_vec();
        let mut log_prod = 0.0_f64;
        for kprime in 1..=k_max {
            x = system.step_nominal(kprime - 1, &x)?;
            let t = schedule.tau(kprime - 1);
            log_prod += if t == 0.0 { f64::NEG_INFINITY } else { libm::log(t) };
            let d = metric.eval(&x, &equilibrium);
            let allowed = libm::exp(log_prod) * d0 * (1.0 + 1e-9) + noise_floor;
            let ok = if d0 == 0.0 {
                d <= noise_floor.max(1e-12)
            } else {
                d <= allowed
            };
            if !ok {
                last_fail = last_fail.max(kprime);
                if d0 > 0.0 {
                    let prod = libm::exp(log_prod);
                    if prod > 0.0 {
                        worst_ratio = worst_ratio.max(d / (prod * d0));
                    }
                }
            }
        }
    }
    if last_fail >= k_max {
        return Err(Error::HorizonNotFound { worst_ratio, k_max });
    }
    Ok(last_fail + 1)
}

/// Max over probe starts and horizons of the decay ratio against the
/// schedule's running product, with a 5% margin: a calibrated overshoot
/// constant. Starts and late-trajectory values at the numerical noise
/// floor are skipped, since no ratio is testable there.
pub fn calibrate_overshoot(
    system: &DynamicalSystem,
    metric: &PseudometricSpec,
    schedule: &RateSchedule,
    starts: &[Vec<f64>],
    k_max: usize,
) -> Result<f64> {
    let equilibrium = system.equilibrium().to_vec();
    let scale = starts
        .iter()
        .map(|xi| metric.eval(xi, &equilibrium))
        .fold(0.0_f64, f64::max);
    let mut worst = 1.0_f64;
    for xi in starts {
        let d0 = metric.eval(xi, &equilibrium);
        if d0 <= 1e-13 * scale {
            continue;
        }
        let mut x = xi.clone();
        let mut log_prod = 0.0_f64;
        for kprime in 1..=k_max {
            x = system.step_nominal(kprime - 1, &x)?;
            let t = schedule.tau(kprime - 1);
            if t == 0.0 {
                break;
            }
            log_prod += libm::log(t);
            let d = metric.eval(&x, &equilibrium);
            if d > 1e-13 * scale {
                worst = worst.max(d / (libm::exp(log_prod) * d0));
            }
        }
    }
    Ok(worst * 1.05)
}

/// Closed-form Lipschitz certificate `L_d * L_f^K / tau0^K` for the sup
/// form over a compact set.
pub fn analytic_lipschitz(l_d: f64, l_f: f64, horizon: usize, tau0: f64) -> FlaggedValue {
    let value = l_d * vecops::powi(l_f, horizon as u32) * libm::pow(tau0, -(horizon as f64));
    if value.is_finite() {
        FlaggedValue {
            value,
            flag: RangeFlag::Exact,
        }
    } else {
        FlaggedValue {
            value: f64::MAX,
            flag: RangeFlag::OverflowClamped,
        }
    }
}

/// Closed-form Hessian constant for the sum form:
/// `M tau0^-M (L_Hd L_f^{2M} + L_d L_Hphi L_f^M (L_f + M))`.
///
/// This is the coarse textbook constant; it is exact only when the state
/// Lipschitz constant is at least one. Prefer [`hessian_bound_series`] for
/// certification.
pub fn hessian_bound_closed(
    m: usize,
    tau0: f64,
    l_f: f64,
    l_d: f64,
    l_hd: f64,
    l_hphi: f64,
) -> FlaggedValue {
    let mf = m as f64;
    let value = mf
        * libm::pow(tau0, -mf)
        * (l_hd * vecops::powi(l_f, 2 * m as u32)
            + l_d * l_hphi * vecops::powi(l_f, m as u32) * (l_f + mf));
    if value.is_finite() {
        FlaggedValue {
            value,
            flag: RangeFlag::Exact,
        }
    } else {
        FlaggedValue {
            value: f64::MAX,
            flag: RangeFlag::OverflowClamped,
        }
    }
}

/// Term-by-term Hessian constant for the sum form:
///
/// `sum_{k'=0}^{M} Phi(0, k') (L_Hd L_f^{2k'} + L_d P_{k'})`
///
/// where `P` bounds the flow's second derivative through the recursion
/// `P_0 = 0`, `P_{j+1} = L_f P_j + L_Hphi L_f^{2j}`. Dominates the true
/// Hessian of the sum form for systems matching the declared constants.
pub fn hessian_bound_series(
    schedule: &RateSchedule,
    m: usize,
    l_f: f64,
    l_d: f64,
    l_hd: f64,
    l_hphi: f64,
) -> f64 {
    let mut total = 0.0_f64;
    let mut flow_hessian = 0.0_f64; // P_{k'}
    let mut lf_even = 1.0_f64; // L_f^{2k'}
    for kprime in 0..=m {
        let phi = schedule.phi_weight(0, kprime);
        total += phi * (l_hd * lf_even + l_d * flow_hessian);
        flow_hessian = l_f * flow_hessian + l_hphi * lf_even;
        lf_even *= l_f * l_f;
    }
    total
}
