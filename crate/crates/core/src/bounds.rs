//! Disturbance bounds evaluated as explicit series, and checks of simulated
//! trajectories against them.

use alloc::string::String;
use alloc::vec::Vec;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::RateSchedule;

/// Running products of rate factors with exact handling of zero factors.
struct RateProducts {
    log_prefix: Vec<f64>,
    zero_prefix: Vec<usize>,
}

impl RateProducts {
    fn new(schedule: &RateSchedule, up_to: usize) -> Self {
        let mut log_prefix = Vec::with_capacity(up_to + 1);
        let mut zero_prefix = Vec::with_capacity(up_to + 1);
        log_prefix.push(0.0);
        zero_prefix.push(0);
        for i in 0..up_to {
            let t = schedule.tau(i);
            let (dl, dz) = if t == 0.0 { (0.0, 1) } else { (libm::log(t), 0) };
            log_prefix.push(log_prefix[i] + dl);
            zero_prefix.push(zero_prefix[i] + dz);
        }
        Self {
            log_prefix,
            zero_prefix,
        }
    }

    /// Product of factors over `[a, b)`.
    fn product(&self, a: usize, b: usize) -> f64 {
        debug_assert!(a <= b && b < self.log_prefix.len() + 1);
        if a >= b {
            return 1.0;
        }
        if self.zero_prefix[b] > self.zero_prefix[a] {
            return 0.0;
        }
        libm::exp(self.log_prefix[b] - self.log_prefix[a])
    }
}

fn check_lengths(l_e: &[f64], e_norms: Option<&[f64]>, k: usize) -> Result<()> {
    if l_e.len() < k {
        return Err(Error::InvalidInput(alloc::format!(
            "gain sequence has length {} but {k} steps were requested",
            l_e.len()
        )));
    }
    if let Some(e) = e_norms {
        if e.len() < k {
            return Err(Error::InvalidInput(alloc::format!(
                "disturbance-norm sequence has length {} but {k} steps were requested",
                e.len()
            )));
        }
    }
    Ok(())
}

/// Deterministic disturbance bound at step `k`:
///
/// `c0 * prod_{i<k} tau(i) * d0 + L_V * sum_{j<k} (prod_{i=j+1}^{k-1} tau(i)) L_ej |e_j|`
pub fn deterministic_bound(
    c0: f64,
    schedule: &RateSchedule,
    d0: f64,
    l_v: f64,
    l_e: &[f64],
    e_norms: &[f64],
    k: usize,
) -> Result<f64> {
    check_lengths(l_e, Some(e_norms), k)?;
    let products = RateProducts::new(schedule, k);
    let mut sum = 0.0_f64;
    for j in 0..k {
        sum += products.product(j + 1, k) * l_e[j] * e_norms[j];
    }
    Ok(c0 * products.product(0, k) * d0 + l_v * sum)
}

/// Deterministic bound at every step `0..=k_max`, via the exact one-step
/// recursion `b(k+1) = tau(k) b(k) + L_V L_ek |e_k|`.
pub fn deterministic_bound_series(
    c0: f64,
    schedule: &RateSchedule,
    d0: f64,
    l_v: f64,
    l_e: &[f64],
    e_norms: &[f64],
    k_max: usize,
) -> Result<Vec<f64>> {
    check_lengths(l_e, Some(e_norms), k_max)?;
    let mut out = Vec::with_capacity(k_max + 1);
    let mut value = c0 * d0;
    out.push(value);
    for k in 0..k_max {
        value = schedule.tau(k) * value + l_v * l_e[k] * e_norms[k];
        out.push(value);
    }
    Ok(out)
}

/// Conjugate-pair split of the deterministic bound: the disturbance terms
/// are separated from the rate weights with exponents `p` and `q`
/// satisfying `1/p + 1/q = 1` (`p` may be infinite). Always dominates
/// [`deterministic_bound`] on the same inputs.
pub fn holder_bound(
    c0: f64,
    schedule: &RateSchedule,
    d0: f64,
    l_v: f64,
    l_e: &[f64],
    e_norms: &[f64],
    k: usize,
    p: f64,
) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidInput("exponent p must be at least 1".into()));
    }
    check_lengths(l_e, Some(e_norms), k)?;
    let products = RateProducts::new(schedule, k);
    let weights: Vec<f64> = (0..k).map(|j| products.product(j + 1, k)).collect();
    let signal: Vec<f64> = (0..k).map(|j| l_e[j] * e_norms[j]).collect();
    let q = if p.is_infinite() {
        1.0
    } else if p == 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    };
    Ok(c0 * products.product(0, k) * d0 + l_v * seq_norm(&signal, p) * seq_norm(&weights, q))
}

fn seq_norm(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    if p.is_infinite() {
        values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    } else {
        libm::pow(
            values.iter().map(|v| libm::pow(v.abs(), p)).sum::<f64>(),
            1.0 / p,
        )
    }
}

/// Expected-value bound under mean-zero noise with second moment `sigma2`;
/// the gain enters squared:
///
/// `cbar0 * d0 * prod_{i<k} tau(i) + 0.5 L_H sigma2 sum_{j<k} (prod_{i=j+1}^{k-1} tau(i)) L_ej^2`
pub fn stochastic_bound(
    cbar0: f64,
    schedule: &RateSchedule,
    d0: f64,
    l_h: f64,
    sigma2: f64,
    l_e: &[f64],
    k: usize,
) -> Result<f64> {
    check_lengths(l_e, None, k)?;
    let products = RateProducts::new(schedule, k);
    let mut sum = 0.0_f64;
    for j in 0..k {
        sum += products.product(j + 1, k) * l_e[j] * l_e[j];
    }
    Ok(cbar0 * d0 * products.product(0, k) + 0.5 * l_h * sigma2 * sum)
}

/// Stochastic bound at every step `0..=k_max` via the exact recursion.
pub fn stochastic_bound_series(
    cbar0: f64,
    schedule: &RateSchedule,
    d0: f64,
    l_h: f64,
    sigma2: f64,
    l_e: &[f64],
    k_max: usize,
) -> Result<Vec<f64>> {
    check_lengths(l_e, None, k_max)?;
    let mut out = Vec::with_capacity(k_max + 1);
    let mut value = cbar0 * d0;
    out.push(value);
    for k in 0..k_max {
        value = schedule.tau(k) * value + 0.5 * l_h * sigma2 * l_e[k] * l_e[k];
        out.push(value);
    }
    Ok(out)
}

/// Limit of the deterministic bound under a constant rate `tau < 1` and a
/// constant disturbance magnitude: `L_V L_e Delta / (1 - tau)`.
pub fn steady_state_bound(l_v: f64, l_e: f64, delta: f64, tau: f64) -> Result<f64> {
    if !(tau < 1.0) {
        return Err(Error::InvalidInput(
            "steady state requires a rate strictly below 1".into(),
        ));
    }
    Ok(l_v * l_e * delta / (1.0 - tau))
}

/// Where the constants used by a bound came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ConstantProvenance {
    Analytic,
    /// Sampled estimates inflated by the given factor.
    Empirical { inflation: f64 },
}

/// Record of the constants behind an evaluated bound series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantsUsed {
    /// Overshoot constant (`c0` for deterministic checks, its sum-form
    /// counterpart for stochastic ones).
    pub c0: f64,
    /// `L_V` for deterministic bounds, `L_H` for stochastic ones.
    pub lyapunov_constant: f64,
    /// Min and max per-step disturbance gain over the evaluated window.
    pub gain_min: f64,
    pub gain_max: f64,
    pub sigma2: Option<f64>,
    /// Short human-readable description of the rate schedule.
    pub tau_summary: String,
    pub provenance: ConstantProvenance,
}

impl ConstantsUsed {
    pub fn analytic(c0: f64, lyapunov_constant: f64, l_e: &[f64], sigma2: Option<f64>, tau_summary: String) -> Self {
        let gain_min = l_e.iter().fold(f64::INFINITY, |m, v| m.min(*v));
        let gain_max = l_e.iter().fold(0.0_f64, |m, v| m.max(*v));
        Self {
            c0,
            lyapunov_constant,
            gain_min: if gain_min.is_finite() { gain_min } else { 0.0 },
            gain_max,
            sigma2,
            tau_summary,
            provenance: ConstantProvenance::Analytic,
        }
    }

    pub fn empirical(mut self, inflation: f64) -> Self {
        self.provenance = ConstantProvenance::Empirical { inflation };
        self
    }
}

/// A theoretical bound series paired with empirical values and the places
/// where the empirical side exceeded it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub bound_series: Vec<f64>,
    pub empirical_series: Vec<f64>,
    pub violations: Vec<Violation>,
    pub constants_used: ConstantsUsed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub k: usize,
    pub excess: f64,
}

/// Relative tolerance for deterministic trajectory checks.
pub const DETERMINISTIC_TOL: f64 = 1e-6;

/// Compare an empirical series against a bound series pointwise, recording
/// every index where the empirical value exceeds `bound * (1 + tol)`.
pub fn verify_trajectory_bound(
    empirical: &[f64],
    bound: &[f64],
    constants: ConstantsUsed,
    tol: f64,
) -> Result<BoundReport> {
    if empirical.len() != bound.len() {
        return Err(Error::InvalidInput(alloc::format!(
            "series lengths differ: empirical {}, bound {}",
            empirical.len(),
            bound.len()
        )));
    }
    let violations = empirical
        .iter()
        .zip(bound)
        .enumerate()
        .filter(|(_, (emp, b))| **emp > **b * (1.0 + tol))
        .map(|(k, (emp, b))| Violation { k, excess: emp - b })
        .collect();
    Ok(BoundReport {
        bound_series: bound.to_vec(),
        empirical_series: empirical.to_vec(),
        violations,
        constants_used: constants,
    })
}

/// Ensemble variant: the empirical side is a Monte Carlo mean debited by
/// its one-sided confidence half-width before comparison.
pub fn verify_ensemble_bound(
    means: &[f64],
    ci_half_widths: &[f64],
    bound: &[f64],
    constants: ConstantsUsed,
) -> Result<BoundReport> {
    if means.len() != bound.len() || ci_half_widths.len() != bound.len() {
        return Err(Error::InvalidInput("series lengths differ".into()));
    }
    let adjusted: Vec<f64> = means
        .iter()
        .zip(ci_half_widths)
        .map(|(m, h)| m - h)
        .collect();
    let violations = adjusted
        .iter()
        .zip(bound)
        .enumerate()
        .filter(|(_, (lo, b))| **lo > **b)
        .map(|(k, (lo, b))| Violation { k, excess: lo - b })
        .collect();
    Ok(BoundReport {
        bound_series: bound.to_vec(),
        empirical_series: means.to_vec(),
        violations,
        constants_used: constants,
    })
}
