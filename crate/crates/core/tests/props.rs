//! Property tests over randomized systems, schedules, and disturbance
//! profiles.

use std::ops::Range;
use std::sync::Arc;

use proptest::prelude::*;

use iterstab_core::bounds;
use iterstab_core::dynamics::DynamicalSystem;
use iterstab_core::metrics::{PseudometricSpec, RateSchedule};
use iterstab_core::region::Region;
use iterstab_core::rng::{stream, CounterRng};

fn time_varying_system(decay: f64) -> DynamicalSystem {
    DynamicalSystem::autonomous(
        2,
        Arc::new(move |k, x: &[f64]| {
            let f = decay + 0.3 / (k as f64 + 2.0);
            vec![f * x[0] + 0.1 * x[1], f * x[1]]
        }),
        vec![0.0, 0.0],
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flow_semigroup_for_random_splits(
        a in 0usize..20,
        b in 0usize..20,
        k0 in 0usize..10,
        x0 in -5.0f64..5.0,
        x1 in -5.0f64..5.0,
        decay in 0.2f64..0.9,
    ) {
        let sys = time_varying_system(decay);
        let xi = vec![x0, x1];
        let whole = sys.flow(a + b, k0, &xi).unwrap();
        let mid = sys.flow(a, k0, &xi).unwrap();
        let split = sys.flow(b, k0 + a, &mid).unwrap();
        for (w, s) in whole.iter().zip(&split) {
            prop_assert!((w - s).abs() <= 1e-10 * (1.0 + w.abs()));
        }
    }

    #[test]
    fn weight_and_product_stay_inverse(
        k in 0usize..60,
        kp in 0usize..60,
        offset in 2.0f64..9.0,
    ) {
        let s = RateSchedule::inverse_time(offset, 1.0, 1).unwrap();
        let prod = s.rate_product(k, kp) * s.phi_weight(k, kp);
        prop_assert!((prod - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn shifted_weight_identity_holds(
        k in 0usize..50,
        kp in 0usize..50,
        tau in 0.3f64..0.99,
    ) {
        let s = RateSchedule::constant(tau, 1.0, 1).unwrap();
        let lhs = s.phi_weight(k + 1, kp);
        let rhs = s.phi_weight(k, kp + 1) * s.tau(k);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1.0));
    }

    #[test]
    fn exact_bound_monotone_in_each_disturbance(
        seed in 0u64..1000,
        bump_at in 0usize..8,
        bump in 0.0f64..0.5,
    ) {
        let s = RateSchedule::inverse_time(5.0, 1.0, 1).unwrap();
        let rng = CounterRng::new(seed, stream::SAMPLING);
        let k = 8usize;
        let l_e: Vec<f64> = (0..k).map(|j| 0.2 + rng.uniform(j as u64, 0)).collect();
        let mut e: Vec<f64> = (0..k).map(|j| 0.3 * rng.uniform(j as u64, 1)).collect();
        let before = bounds::deterministic_bound(1.3, &s, 0.7, 2.0, &l_e, &e, k).unwrap();
        e[bump_at] += bump;
        let after = bounds::deterministic_bound(1.3, &s, 0.7, 2.0, &l_e, &e, k).unwrap();
        prop_assert!(after >= before);
    }

    #[test]
    fn conjugate_split_dominates_exact_bound(
        seed in 0u64..1000,
        p_index in 0usize..4,
    ) {
        let p = [1.5, 2.0, 4.0, f64::INFINITY][p_index];
        let s = RateSchedule::constant(0.8, 1.0, 1).unwrap();
        let rng = CounterRng::new(seed, stream::SAMPLING);
        let k = 10usize;
        let l_e: Vec<f64> = (0..k).map(|j| 0.2 + rng.uniform(j as u64, 0)).collect();
        let e: Vec<f64> = (0..k).map(|j| 0.3 * rng.uniform(j as u64, 1)).collect();
        let exact = bounds::deterministic_bound(1.0, &s, 1.0, 1.0, &l_e, &e, k).unwrap();
        let split = bounds::holder_bound(1.0, &s, 1.0, 1.0, &l_e, &e, k, p).unwrap();
        prop_assert!(split >= exact * (1.0 - 1e-12));
    }

    #[test]
    fn loss_gap_axioms_hold_for_random_quadratics(
        lam0 in 0.1f64..3.0,
        lam1 in 0.1f64..3.0,
        seed in 0u64..100,
    ) {
        let loss = Arc::new(move |x: &[f64]| 0.5 * (lam0 * x[0] * x[0] + lam1 * x[1] * x[1]));
        // Gradient bound on the box [-2, 2]^2 at the corners.
        let l_d = 2.0 * libm::hypot(lam0, lam1) * 2.0;
        let d = PseudometricSpec::loss_gap(loss, l_d, None);
        let region = Region::centered(2, 2.0);
        let report = d.check_axioms(&region, 200, seed).unwrap();
        prop_assert!(report.max_violation() <= 1e-9);
    }

    #[test]
    fn counter_rng_is_order_free(
        seed in 0u64..10_000,
        k in 0u64..1000,
        draw in 0u64..1000,
        other in 0u64..1000,
    ) {
        let rng = CounterRng::new(seed, stream::MONTE_CARLO);
        let direct = rng.uniform(k, draw);
        let _ = rng.uniform(other, draw ^ 0x55);
        let again = rng.uniform(k, draw);
        prop_assert_eq!(direct, again);
    }

    #[test]
    fn lipschitz_estimate_is_monotone_in_sample_count(
        seed in 0u64..200,
    ) {
        let sys = time_varying_system(0.5);
        let region = Region::centered(2, 1.5);
        let ranges: [Range<usize>; 1] = [0..3];
        let mut prev = 0.0;
        for n in [8usize, 32, 128] {
            let est = sys
                .estimate_lipschitz_state(&region, n, ranges[0].clone(), seed)
                .unwrap();
            prop_assert!(est >= prev);
            prev = est;
        }
    }
}
