//! Pseudometrics with norm bounds, and per-step rate schedules with their
//! reciprocal weights.

use alloc::sync::Arc;
use alloc::vec::Vec;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::region::Region;
use crate::rng::{stream, CounterRng};
use crate::vecops::Norm;

pub type MetricFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
pub type LossFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// What a pseudometric measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MetricKind {
    /// Distance in parameter space.
    Euclidean,
    /// Objective-value gap `|l(x) - l(y)|`.
    LossGap,
    /// Objective-value gap evaluated at a momentum-shifted point.
    ShiftedLossGap,
    Custom,
}

/// A distance-like function `d` together with its norm-bound constant and,
/// when available, a bound on its Hessian (used by the stochastic theory).
#[derive(Clone)]
pub struct PseudometricSpec {
    eval: MetricFn,
    norm_bound: f64,
    hessian_bound: Option<f64>,
    kind: MetricKind,
}

impl core::fmt::Debug for PseudometricSpec {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("PseudometricSpec")
            .field("kind", &self.kind)
            .field("norm_bound", &self.norm_bound)
            .field("hessian_bound", &self.hessian_bound)
            .finish()
    }
}

impl PseudometricSpec {
    /// Euclidean distance; norm-bound constant 1.
    pub fn euclidean() -> Self {
        Self {
            eval: Arc::new(|x, y| Norm::L2.dist(x, y)),
            norm_bound: 1.0,
            hessian_bound: None,
            kind: MetricKind::Euclidean,
        }
    }

    /// Symmetric objective gap `|l(x) - l(y)|`. `norm_bound` is the
    /// gradient bound of `l` on the working region; `hessian_bound` its
    /// curvature bound when the gap is smooth along the pairs of interest.
    pub fn loss_gap(loss: LossFn, norm_bound: f64, hessian_bound: Option<f64>) -> Self {
        Self {
            eval: Arc::new(move |x, y| (loss(x) - loss(y)).abs()),
            norm_bound,
            hessian_bound,
            kind: MetricKind::LossGap,
        }
    }

    /// Objective gap on stacked `(theta, p)` states, evaluated at
    /// `theta + shift * p`.
    pub fn shifted_loss_gap(
        loss: LossFn,
        shift: f64,
        half_dim: usize,
        norm_bound: f64,
        hessian_bound: Option<f64>,
    ) -> Self {
        let eval = move |s: &[f64]| -> f64 {
            let (theta, p) = s.split_at(half_dim);
            let probe: Vec<f64> = theta.iter().zip(p).map(|(t, pi)| t + shift * pi).collect();
            loss(&probe)
        };
        Self {
            eval: Arc::new(move |x, y| (eval(x) - eval(y)).abs()),
            norm_bound,
            hessian_bound,
            kind: MetricKind::ShiftedLossGap,
        }
    }

    pub fn custom(eval: MetricFn, norm_bound: f64, hessian_bound: Option<f64>) -> Self {
        Self {
            eval,
            norm_bound,
            hessian_bound,
            kind: MetricKind::Custom,
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        (self.eval)(x, y)
    }

    /// Norm-bound constant `L_d` in `d(x, y) <= L_d |x - y|`.
    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    /// Hessian bound of the metric, when declared.
    pub fn hessian_bound(&self) -> Option<f64> {
        self.hessian_bound
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    /// Sampled max violations of the pseudometric axioms and the norm
    /// bound. Violations are reported, not thrown.
    pub fn check_axioms(&self, region: &Region, n_samples: usize, seed: u64) -> Result<AxiomReport> {
        if n_samples == 0 {
            return Err(Error::InvalidInput("n_samples must be at least 1".into()));
        }
        let rng = CounterRng::new(seed, stream::SAMPLING);
        let mut report = AxiomReport::default();
        for i in 0..n_samples {
            let k = i as u64;
            let x = region.uniform_point(&rng, k, 0);
            let y = region.uniform_point(&rng, k, 100);
            let z = region.uniform_point(&rng, k, 200);
            let dxx = self.eval(&x, &x);
            let dxy = self.eval(&x, &y);
            let dyx = self.eval(&y, &x);
            let dxz = self.eval(&x, &z);
            let dyz = self.eval(&y, &z);
            report.identity = report.identity.max(dxx.abs());
            report.symmetry = report.symmetry.max((dxy - dyx).abs());
            report.triangle = report.triangle.max(dxz - (dxy + dyz));
            report.nonnegativity = report.nonnegativity.max(-dxy);
            report.norm_bound = report
                .norm_bound
                .max(dxy - self.norm_bound * Norm::L2.dist(&x, &y));
        }
        Ok(report)
    }
}

/// Max sampled violation per axiom; all entries are tiny for a valid spec.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct AxiomReport {
    pub identity: f64,
    pub symmetry: f64,
    pub triangle: f64,
    pub nonnegativity: f64,
    pub norm_bound: f64,
}

impl AxiomReport {
    pub fn max_violation(&self) -> f64 {
        self.identity
            .max(self.symmetry)
            .max(self.triangle)
            .max(self.nonnegativity)
            .max(self.norm_bound)
    }
}

/// Status of a product/weight evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RangeFlag {
    Exact,
    /// Product fell below the smallest positive normal and was clamped up.
    UnderflowClamped,
    /// Weight exceeded the float range and was clamped down.
    OverflowClamped,
    /// A rate factor was exactly zero, making the product exactly zero.
    Zero,
}

/// Value plus range diagnostics for long products.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlaggedValue {
    pub value: f64,
    pub flag: RangeFlag,
}

/// Nondecreasing per-step rate factors with their overshoot constant and
/// settling horizon: after `horizon` steps the decay inequality holds
/// without the overshoot constant.
#[derive(Clone)]
pub struct RateSchedule {
    tau: Arc<dyn Fn(usize) -> f64 + Send + Sync>,
    pub c0: f64,
    pub horizon: usize,
}

impl core::fmt::Debug for RateSchedule {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("RateSchedule")
            .field("c0", &self.c0)
            .field("horizon", &self.horizon)
            .field("tau(0)", &self.tau(0))
            .finish()
    }
}

impl RateSchedule {
    pub fn new(tau: Arc<dyn Fn(usize) -> f64 + Send + Sync>, c0: f64, horizon: usize) -> Result<Self> {
        if !(c0 > 0.0) {
            return Err(Error::InvalidInput("overshoot constant must be positive".into()));
        }
        Ok(Self { tau, c0, horizon })
    }

    /// Constant factor `tau` per step.
    pub fn constant(tau: f64, c0: f64, horizon: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::InvalidInput("rate factor must lie in [0, 1]".into()));
        }
        Self::new(Arc::new(move |_| tau), c0, horizon)
    }

    /// Sublinear family `tau(i) = 1 - 1/(i + offset)`; its running product
    /// from zero telescopes to `(offset - 1) / (k + offset - 1)`.
    pub fn inverse_time(offset: f64, c0: f64, horizon: usize) -> Result<Self> {
        if offset <= 1.0 {
            return Err(Error::InvalidInput("offset must exceed 1".into()));
        }
        Self::new(Arc::new(move |i| 1.0 - 1.0 / (i as f64 + offset)), c0, horizon)
    }

    /// Damped sublinear family `tau(i) = (1 - 1/(i + offset))^exponent`
    /// for exponents in `(0, 1]`; slows the inverse-time decay enough to
    /// absorb transient overshoot.
    pub fn inverse_time_power(offset: f64, exponent: f64, c0: f64, horizon: usize) -> Result<Self> {
        if offset <= 1.0 {
            return Err(Error::InvalidInput("offset must exceed 1".into()));
        }
        if !(exponent > 0.0 && exponent <= 1.0) {
            return Err(Error::InvalidInput("exponent must lie in (0, 1]".into()));
        }
        Self::new(
            Arc::new(move |i| libm::pow(1.0 - 1.0 / (i as f64 + offset), exponent)),
            c0,
            horizon,
        )
    }

    /// Piecewise-constant factors from a table, extending the last entry.
    pub fn from_table(values: Vec<f64>, c0: f64, horizon: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("rate table must be nonempty".into()));
        }
        if values.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::InvalidInput("rate factors must lie in [0, 1]".into()));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidInput("rate table must be nondecreasing".into()));
        }
        Self::new(
            Arc::new(move |i| values[i.min(values.len() - 1)]),
            c0,
            horizon,
        )
    }

    /// Rate factor at step `i`.
    pub fn tau(&self, i: usize) -> f64 {
        (self.tau)(i)
    }

    /// Running product of rate factors over `[k, k + kprime)`; the empty
    /// product is 1. Computed in log space; underflow clamps to the
    /// smallest positive normal.
    pub fn rate_product(&self, k: usize, kprime: usize) -> f64 {
        self.rate_product_flagged(k, kprime).value
    }

    pub fn rate_product_flagged(&self, k: usize, kprime: usize) -> FlaggedValue {
        let mut log_sum = 0.0_f64;
        for i in k..k + kprime {
            let t = self.tau(i);
            if t == 0.0 {
                return FlaggedValue {
                    value: 0.0,
                    flag: RangeFlag::Zero,
                };
            }
            log_sum += libm::log(t);
        }
        let value = libm::exp(log_sum);
        if value < f64::MIN_POSITIVE {
            FlaggedValue {
                value: f64::MIN_POSITIVE,
                flag: RangeFlag::UnderflowClamped,
            }
        } else {
            FlaggedValue {
                value,
                flag: RangeFlag::Exact,
            }
        }
    }

    /// Reciprocal weight of the running product; equals 1 at `kprime = 0`
    /// and is bounded by `tau(0)^-kprime` for nondecreasing factors.
    pub fn phi_weight(&self, k: usize, kprime: usize) -> f64 {
        self.phi_weight_flagged(k, kprime).value
    }

    pub fn phi_weight_flagged(&self, k: usize, kprime: usize) -> FlaggedValue {
        let mut log_sum = 0.0_f64;
        for i in k..k + kprime {
            let t = self.tau(i);
            if t == 0.0 {
                return FlaggedValue {
                    value: f64::MAX,
                    flag: RangeFlag::OverflowClamped,
                };
            }
            log_sum -= libm::log(t);
        }
        let value = libm::exp(log_sum);
        if value.is_infinite() || value > f64::MAX {
            FlaggedValue {
                value: f64::MAX,
                flag: RangeFlag::OverflowClamped,
            }
        } else {
            FlaggedValue {
                value,
                flag: RangeFlag::Exact,
            }
        }
    }

    /// Sampled validation: factors lie in `[0, 1]` and are nondecreasing.
    pub fn validate(&self, up_to: usize) -> Result<()> {
        check_dim(1, 1)?; // no dimensional content; kept for signature symmetry
        let mut prev = self.tau(0);
        for i in 0..up_to {
            let t = self.tau(i);
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidInput(alloc::format!(
                    "rate factor {t} at step {i} outside [0, 1]"
                )));
            }
            if t + 1e-15 < prev {
                return Err(Error::InvalidInput(alloc::format!(
                    "rate factors decrease at step {i}"
                )));
            }
            prev = t;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn euclidean_identity_is_zero() {
        let d = PseudometricSpec::euclidean();
        assert_eq!(d.eval(&[2.0, -1.0], &[2.0, -1.0]), 0.0);
    }

    #[test]
    fn loss_gap_on_scalar_quadratic() {
        let d = PseudometricSpec::loss_gap(Arc::new(|x: &[f64]| 0.5 * x[0] * x[0]), 10.0, Some(1.0));
        assert_eq!(d.eval(&[2.0], &[0.0]), 2.0);
    }

    #[test]
    fn shifted_loss_gap_matches_direct_evaluation() {
        // Quadratic objective evaluated at theta + shift * p.
        let loss: LossFn = Arc::new(|x: &[f64]| 0.5 * (x[0] * x[0] + 2.0 * x[1] * x[1]));
        let shift = 0.25;
        let d = PseudometricSpec::shifted_loss_gap(loss.clone(), shift, 2, 10.0, None);
        let state = vec![1.0, -2.0, 0.5, 3.0]; // (theta, p)
        let target = vec![0.0, 0.0, 0.0, 0.0];
        let probe = vec![1.0 + shift * 0.5, -2.0 + shift * 3.0];
        let expected = (loss(&probe) - loss(&[0.0, 0.0])).abs();
        assert!((d.eval(&state, &target) - expected).abs() < 1e-15);
    }

    #[test]
    fn euclidean_axioms_hold_exactly() {
        let d = PseudometricSpec::euclidean();
        let region = Region::centered(3, 2.0);
        let report = d.check_axioms(&region, 500, 1).unwrap();
        assert_eq!(report.max_violation(), 0.0);
    }

    #[test]
    fn loss_gap_norm_bound_holds_with_gradient_constant() {
        // l(x) = 0.5|x|^2 on [-2, 2]^2 has gradient bound 2*sqrt(2) there.
        let d = PseudometricSpec::loss_gap(
            Arc::new(|x: &[f64]| 0.5 * (x[0] * x[0] + x[1] * x[1])),
            2.0 * libm::sqrt(2.0) * 2.0,
            None,
        );
        let region = Region::centered(2, 2.0);
        let report = d.check_axioms(&region, 1000, 3).unwrap();
        assert!(report.norm_bound <= 0.0 + 1e-12);
        assert!(report.identity == 0.0 && report.symmetry == 0.0);
        assert!(report.triangle <= 1e-15);
    }

    #[test]
    fn broken_metric_reports_identity_violation() {
        let d = PseudometricSpec::custom(
            Arc::new(|x: &[f64], y: &[f64]| Norm::L2.dist(x, y) - 0.1),
            1.0,
            None,
        );
        let region = Region::centered(1, 1.0);
        let report = d.check_axioms(&region, 100, 5).unwrap();
        assert!((report.identity - 0.1).abs() < 1e-12);
    }

    #[test]
    fn rate_product_telescopes_for_inverse_time_schedule() {
        let s = RateSchedule::inverse_time(5.0, 1.0, 1).unwrap();
        // (4/5)(5/6)(6/7)(7/8) = 1/2
        assert!((s.rate_product(0, 4) - 0.5).abs() < 1e-14);
        assert!((s.phi_weight(0, 4) - 2.0).abs() < 1e-13);
    }

    #[test]
    fn rate_product_constant_power() {
        let s = RateSchedule::constant(0.9, 1.0, 1).unwrap();
        assert!((s.rate_product(3, 2) - 0.81).abs() < 1e-15);
        assert!((s.phi_weight(0, 2) - 1.0 / 0.81).abs() < 1e-13);
    }

    #[test]
    fn empty_product_is_one() {
        let s = RateSchedule::inverse_time(5.0, 1.0, 1).unwrap();
        assert_eq!(s.rate_product(7, 0), 1.0);
        assert_eq!(s.phi_weight(7, 0), 1.0);
    }

    #[test]
    fn long_product_underflow_is_clamped_and_flagged() {
        let s = RateSchedule::constant(0.5, 1.0, 1).unwrap();
        let fv = s.rate_product_flagged(0, 2000);
        assert_eq!(fv.flag, RangeFlag::UnderflowClamped);
        assert_eq!(fv.value, f64::MIN_POSITIVE);
        let wv = s.phi_weight_flagged(0, 2000);
        assert_eq!(wv.flag, RangeFlag::OverflowClamped);
        assert_eq!(wv.value, f64::MAX);
    }

    #[test]
    fn zero_rate_factor_zeroes_the_product() {
        let s = RateSchedule::constant(0.0, 1.0, 1).unwrap();
        let fv = s.rate_product_flagged(0, 3);
        assert_eq!(fv.flag, RangeFlag::Zero);
        assert_eq!(fv.value, 0.0);
    }

    #[test]
    fn weight_product_inverse_identity() {
        let s = RateSchedule::inverse_time(5.0, 1.0, 1).unwrap();
        for (k, kp) in [(0usize, 7usize), (3, 11), (10, 25)] {
            let prod = s.rate_product(k, kp) * s.phi_weight(k, kp);
            assert!((prod - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn shifted_weight_identity() {
        // Weight started one step later equals the longer weight times the
        // leading factor.
        let s = RateSchedule::inverse_time(5.0, 1.0, 1).unwrap();
        let rng = CounterRng::new(11, stream::SAMPLING);
        for trial in 0..200u64 {
            let k = (rng.uniform(trial, 0) * 50.0) as usize;
            let kp = (rng.uniform(trial, 1) * 50.0) as usize;
            let lhs = s.phi_weight(k + 1, kp);
            let rhs = s.phi_weight(k, kp + 1) * s.tau(k);
            let rel = (lhs - rhs).abs() / lhs.max(1e-300);
            assert!(rel <= 1e-12, "identity failed at k={k}, kp={kp}: rel {rel}");
        }
    }

    #[test]
    fn weight_bounded_by_first_factor_power() {
        let s = RateSchedule::inverse_time(5.0, 1.0, 1).unwrap();
        let tau0 = s.tau(0);
        for kp in 0..=50usize {
            let phi = s.phi_weight(0, kp);
            let cap = libm::pow(tau0, -(kp as f64));
            assert!(phi <= cap * (1.0 + 1e-12));
        }
    }

    #[test]
    fn damped_inverse_time_is_slower_but_still_a_rate() {
        let base = RateSchedule::inverse_time(5.0, 1.0, 1).unwrap();
        let damped = RateSchedule::inverse_time_power(5.0, 0.5, 1.0, 1).unwrap();
        for i in 0..100 {
            assert!(damped.tau(i) >= base.tau(i));
            assert!(damped.tau(i) <= 1.0);
        }
        assert!(damped.validate(10_000).is_ok());
    }

    #[test]
    fn table_schedule_extends_its_last_entry() {
        let s = RateSchedule::from_table(vec![0.5, 0.75, 0.9], 1.0, 1).unwrap();
        assert_eq!(s.tau(0), 0.5);
        assert_eq!(s.tau(2), 0.9);
        assert_eq!(s.tau(100), 0.9);
        assert!(RateSchedule::from_table(vec![0.9, 0.5], 1.0, 1).is_err());
        assert!(RateSchedule::from_table(vec![], 1.0, 1).is_err());
    }

    #[test]
    fn validate_rejects_decreasing_factors() {
        let s = RateSchedule::new(
            Arc::new(|i| if i == 0 { 0.9 } else { 0.5 }),
            1.0,
            1,
        )
        .unwrap();
        assert!(s.validate(10).is_err());
    }

    #[test]
    fn validate_accepts_inverse_time_up_to_ten_thousand() {
        let s = RateSchedule::inverse_time(5.0, 1.0, 1).unwrap();
        assert!(s.validate(10_000).is_ok());
    }
}
