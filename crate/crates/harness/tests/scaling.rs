//! Scaling checks that need the fitting helpers on top of the core
//! simulators.

use iterstab_core::distsim::{run_event_based, AgentNetwork};
use iterstab_harness::config::Overrides;
use iterstab_harness::fit::fit_powerlaw;
use iterstab_harness::runner;

#[test]
fn doubling_the_threshold_roughly_doubles_the_steady_error() {
    // Individual doubling pairs jitter with the trigger's limit cycles, so
    // the doubling factor comes from a regression over a doubling ladder.
    let net = AgentNetwork::quadratic(5, 2, 1.0, 10.0, 1.0, 0.0, 7).unwrap();
    let ladder = [5e-3, 1e-2, 2e-2, 4e-2, 8e-2];
    let errors: Vec<f64> = ladder
        .iter()
        .map(|d| {
            run_event_based(&net, *d, 600, &[2.0, -1.0])
                .unwrap()
                .steady_state_error
        })
        .collect();
    let (slope, _, _) = fit_powerlaw(&ladder, &errors).unwrap();
    let doubling_factor = libm::pow(2.0, slope);
    assert!(
        (1.5..=2.5).contains(&doubling_factor),
        "doubling factor {doubling_factor} (slope {slope})"
    );
}

#[test]
fn zero_disturbance_bound_check_reduces_to_nominal_decay() {
    let dir = std::env::temp_dir().join("iterstab_zero_delta");
    let _ = std::fs::remove_dir_all(&dir);
    let config = serde_json::json!({
        "experiment": "bound_check",
        "seed": 5,
        "output_dir": dir.display().to_string(),
        "parameters": {"delta": 0.0, "n_random": 50}
    });
    let outcome = runner::execute(&config, &Overrides::default()).unwrap();
    assert!(outcome.violations.is_empty(), "{:?}", outcome.violations);
    // With no disturbance the bound column is exactly the nominal decay.
    let csv = std::fs::read_to_string(dir.join("bound_check.csv")).unwrap();
    let mut lines = csv.lines().skip(1);
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    let bound: f64 = first[1].parse().unwrap();
    let empirical: f64 = first[2].parse().unwrap();
    assert_eq!(bound, empirical);
}
