//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line. Every tolerance is pinned here, in code.

use std::fs;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use iterstab_core::algozoo::{make_noisy_gd, ProblemSpec};
use iterstab_core::bounds::{deterministic_bound, holder_bound};
use iterstab_core::dynamics::{DynamicalSystem, GainSchedule};
use iterstab_core::lyapunov::LyapunovEstimate;
use iterstab_core::metrics::{PseudometricSpec, RateSchedule};
use iterstab_core::region::Region;
use iterstab_core::rng::{stream, CounterRng};

use iterstab_harness::config::Overrides;
use iterstab_harness::runner;

fn pass(criterion: &str, detail: String) {
    println!("[acceptance] {criterion}: PASS ({detail})");
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("iterstab_acceptance_{tag}"));
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn run_experiment(tag: &str, config: serde_json::Value) -> runner::RunOutcome {
    let mut config = config;
    config["output_dir"] = serde_json::json!(temp_dir(tag).display().to_string());
    runner::execute(&config, &Overrides { jobs: 2, ..Overrides::default() })
        .expect("experiment must execute")
}

#[test]
fn criterion_01_converse_lyapunov_audit() {
    let start = Instant::now();
    let outcome = run_experiment(
        "c1",
        serde_json::json!({
            "experiment": "lyapunov_audit",
            "seed": 11,
            "parameters": {"n_samples": 500, "k_max": 50}
        }),
    );
    assert!(
        outcome.violations.is_empty(),
        "audit violations: {:?}",
        outcome.violations
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 30, "audit took {elapsed:?}");
    pass(
        "criterion 1 (converse-Lyapunov audit, all factories, tol 1e-9)",
        format!("{elapsed:?}"),
    );
}

#[test]
fn criterion_02_exact_contraction_identity() {
    let rho = 0.5;
    let sys = DynamicalSystem::new(
        1,
        1,
        Arc::new(move |_k, x: &[f64]| vec![rho * x[0]]),
        Arc::new(move |_k, z: &[f64], e: &[f64]| vec![rho * z[0] - 0.5 * e[0]]),
        vec![0.0],
        GainSchedule::Constant(0.5),
    )
    .unwrap();
    let est = LyapunovEstimate::sup(
        sys,
        PseudometricSpec::euclidean(),
        RateSchedule::constant(rho, 1.0, 1).unwrap(),
        10,
    );
    let rng = CounterRng::new(2, stream::SAMPLING);
    for trial in 0..500u64 {
        let xi = rng.uniform_in(trial, 0, -4.0, 4.0);
        let k = (rng.uniform(trial, 1) * 40.0) as usize;
        let v = est.eval(k, &[xi]).unwrap();
        assert!(
            (v - xi.abs()).abs() <= 1e-12 * (1.0 + xi.abs()),
            "V({k}, {xi}) = {v}"
        );
    }
    let region = Region::centered(1, 3.0);
    let slope = est.empirical_lipschitz(&region, 1024, 0..8, 5).unwrap();
    assert!((slope - 1.0).abs() <= 1e-3, "sampled slope {slope}");
    pass(
        "criterion 2 (exact contraction: V = |xi| to 1e-12, slope 1 +- 1e-3)",
        format!("slope {slope:.6}"),
    );
}

#[test]
fn criterion_03_deterministic_bound_soundness() {
    let start = Instant::now();
    let outcome = run_experiment(
        "c3",
        serde_json::json!({
            "experiment": "bound_check",
            "seed": 17,
            "parameters": {"gamma": 1.0, "beta": 3.0, "delta": 0.1, "n_random": 1000}
        }),
    );
    assert!(
        outcome.violations.is_empty(),
        "bound violations: {:?}",
        outcome.violations
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 30, "bound check took {elapsed:?}");
    pass(
        "criterion 3 (adversarial + 1000 random bounded runs under the bound)",
        format!("{elapsed:?}"),
    );
}

#[test]
fn criterion_04_conjugate_split_dominance() {
    let schedule = RateSchedule::inverse_time(5.0, 1.0, 1).unwrap();
    let rng = CounterRng::new(23, stream::SAMPLING);
    let k = 12usize;
    for profile in 0..100u64 {
        let l_e: Vec<f64> = (0..k)
            .map(|j| 0.3 + rng.uniform(profile, j as u64))
            .collect();
        let e: Vec<f64> = (0..k)
            .map(|j| 0.2 * rng.uniform(profile, 100 + j as u64))
            .collect();
        let exact = deterministic_bound(1.0, &schedule, 1.0, 1.0, &l_e, &e, k).unwrap();
        for p in [1.5, 2.0, 4.0, f64::INFINITY] {
            let split = holder_bound(1.0, &schedule, 1.0, 1.0, &l_e, &e, k, p).unwrap();
            assert!(
                split >= exact * (1.0 - 1e-12),
                "profile {profile}, p={p}: {split} < {exact}"
            );
        }
    }
    // Constant profiles meet the max-based split exactly.
    let l_e = vec![0.7; k];
    let e = vec![0.05; k];
    let exact = deterministic_bound(1.0, &schedule, 1.0, 1.0, &l_e, &e, k).unwrap();
    let split = holder_bound(1.0, &schedule, 1.0, 1.0, &l_e, &e, k, f64::INFINITY).unwrap();
    assert!(
        (split - exact).abs() <= 1e-12,
        "constant-profile gap {}",
        (split - exact).abs()
    );
    pass(
        "criterion 4 (split bound dominates at p in {1.5, 2, 4, inf}; equality at inf)",
        format!("constant-profile gap {:.2e}", (split - exact).abs()),
    );
}

#[test]
fn criterion_05_stochastic_decrease_recursion() {
    let start = Instant::now();
    let problem = ProblemSpec::quadratic(vec![1.0, 3.0], vec![0.0, 0.0], 2.0).unwrap();
    let bundle = make_noisy_gd(&problem, 0.01, 0.5).unwrap();
    let estimate = bundle.sum_estimate().unwrap();
    let report = estimate
        .verify_stochastic_decrease(bundle.sigma2, 10_000, 20, &[1.5, -1.0], 31)
        .unwrap();
    assert!(report.holds, "failing steps: {:?}", report.steps);
    let min_slack = report
        .steps
        .iter()
        .map(|s| s.slack)
        .fold(f64::INFINITY, f64::min);
    let elapsed = start.elapsed();
    pass(
        "criterion 5 (expected decrease holds at every of 20 steps, 1e4 draws)",
        format!("min slack {min_slack:.3e}, {elapsed:?}"),
    );
}

#[test]
fn criterion_06_last_iterate_utility_bound_and_scaling() {
    let start = Instant::now();
    let outcome = run_experiment(
        "c6",
        serde_json::json!({
            "experiment": "privacy_utility",
            "seed": 41,
            "n_mc": 200,
            "parameters": {"gamma": 1.0, "beta": 3.0, "sigma2": 0.01,
                            "n_values": [250, 500, 1000, 2000]}
        }),
    );
    assert!(
        outcome.violations.is_empty(),
        "utility violations: {:?}",
        outcome.violations
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 120, "utility run took {elapsed:?}");
    pass(
        "criterion 6 (mean suboptimality under the expected-value bound, r2 >= 0.9)",
        format!("{elapsed:?}"),
    );
}

#[test]
fn criterion_07_accelerated_versus_plain_coefficients() {
    use iterstab_harness::experiments::privacy_utility::asymptotic_coefficients;
    let kappa = 100.0;
    let (plain, accelerated) = asymptotic_coefficients(1.0, kappa, 0.01);
    let ratio = plain / accelerated;
    assert!(
        ratio >= kappa / 2.0 && ratio <= 2.0 * kappa,
        "ratio {ratio} outside [{}, {}]",
        kappa / 2.0,
        2.0 * kappa
    );
    pass(
        "criterion 7 (plain/accelerated asymptotic coefficient ratio near kappa)",
        format!("ratio {ratio}"),
    );
}

#[test]
fn criterion_08_event_triggered_admm_tradeoff() {
    let start = Instant::now();
    let outcome = run_experiment(
        "c8",
        serde_json::json!({
            "experiment": "admm_tradeoff",
            "seed": 47,
            "parameters": {"n_agents": 5, "gamma": 1.0, "beta": 10.0, "alpha": 1.0,
                            "epsilon_tuning": 0.0, "deltas": [1e-3, 1e-2, 1e-1]}
        }),
    );
    assert!(
        outcome.violations.is_empty(),
        "sweep violations: {:?}",
        outcome.violations
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 120, "sweep took {elapsed:?}");
    pass(
        "criterion 8 (threshold sweep: sound caps, monotone, unit slope +- 0.3)",
        format!("{elapsed:?}"),
    );
}

#[test]
fn criterion_09_stability_scaling() {
    let start = Instant::now();
    let outcome = run_experiment(
        "c9",
        serde_json::json!({
            "experiment": "stability_scaling",
            "seed": 53,
            "parameters": {"n_values": [50, 100, 200, 400, 800, 1600],
                            "n_draws": 100}
        }),
    );
    assert!(
        outcome.violations.is_empty(),
        "stability violations: {:?}",
        outcome.violations
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 120, "stability run took {elapsed:?}");
    pass(
        "criterion 9 (estimates under caps, slope -1 +- 0.15, r2 >= 0.9)",
        format!("{elapsed:?}"),
    );
}

#[test]
fn criterion_10_small_gain_interconnection() {
    let outcome = run_experiment(
        "c10",
        serde_json::json!({
            "experiment": "small_gain",
            "seed": 59,
            "parameters": {"feasible_coupling": 0.01, "infeasible_coupling": 1.0,
                            "n_steps": 100, "convergence_cap": 1e-8}
        }),
    );
    assert!(
        outcome.violations.is_empty(),
        "small-gain violations: {:?}",
        outcome.violations
    );
    pass(
        "criterion 10 (weak coupling contracts below 1e-8 by step 100; strong coupling infeasible)",
        String::new(),
    );
}

#[test]
fn criterion_11_reproducibility() {
    let configs = [
        ("lyapunov_audit", serde_json::json!({"n_samples": 200, "k_max": 20})),
        ("bound_check", serde_json::json!({"n_random": 100})),
        ("admm_tradeoff", serde_json::json!({"iters": 300})),
        ("stability_scaling", serde_json::json!({"n_values": [50, 100, 200], "n_draws": 25})),
        ("privacy_utility", serde_json::json!({"n_values": [250, 500, 1000]})),
        ("small_gain", serde_json::json!({})),
    ];
    for (name, params) in configs {
        let make = |tag: &str| {
            run_experiment(
                tag,
                serde_json::json!({
                    "experiment": name,
                    "seed": 101,
                    "n_mc": 50,
                    "parameters": params.clone()
                }),
            )
        };
        let first = make(&format!("c11_{name}_a"));
        let second = make(&format!("c11_{name}_b"));
        assert_eq!(
            first.manifest.config_hash, second.manifest.config_hash,
            "{name}: config hashes differ"
        );
        assert_eq!(
            first.manifest.outputs_digest(),
            second.manifest.outputs_digest(),
            "{name}: output digests differ"
        );
        for record in &first.manifest.outputs {
            if record.path.ends_with(".csv") {
                let a = fs::read(first.output_dir.join(&record.path)).unwrap();
                let b = fs::read(second.output_dir.join(&record.path)).unwrap();
                assert_eq!(a, b, "{name}: {} differs between reruns", record.path);
            }
        }
    }
    pass(
        "criterion 11 (byte-identical CSVs and manifest digests on rerun, all experiments)",
        String::new(),
    );
}
