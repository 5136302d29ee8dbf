//! Command-line entry point.
//!
//! ```text
//! iterstab run <config.json> [--seed N] [--out DIR] [--jobs N] [--strict]
//! iterstab verify-bound <config.json> ...      (bound_check configs)
//! iterstab estimate-lyapunov <config.json> ... (lyapunov_audit configs)
//! iterstab sweep <config.json> ...             (admm_tradeoff configs)
//! ```
//!
//! Exit codes: 0 pass, 2 assertion violations (or warnings under
//! `--strict`), 64 usage error, 74 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use iterstab_harness::config::Overrides;
use iterstab_harness::error::{HarnessError, EXIT_VIOLATIONS};
use iterstab_harness::runner;

struct Cli {
    subcommand: String,
    config_path: PathBuf,
    overrides: Overrides,
}

const USAGE: &str = "usage: iterstab <run|verify-bound|estimate-lyapunov|sweep> <config.json> \
[--seed N] [--out DIR] [--jobs N] [--strict]";

fn parse_args(args: Vec<String>) -> Result<Cli, String> {
    let mut it = args.into_iter();
    let subcommand = it.next().ok_or(USAGE)?;
    if !matches!(
        subcommand.as_str(),
        "run" | "verify-bound" | "estimate-lyapunov" | "sweep"
    ) {
        return Err(format!("unknown subcommand '{subcommand}'\n{USAGE}"));
    }
    let config_path = PathBuf::from(it.next().ok_or(USAGE)?);
    let mut overrides = Overrides {
        jobs: 1,
        ..Overrides::default()
    };
    while let Some(flag) = it.next() {
        match flag.as_str() {
            "--seed" => {
                let v = it.next().ok_or("--seed needs a value")?;
                overrides.seed =
                    Some(v.parse().map_err(|_| format!("bad seed '{v}'"))?);
            }
            "--out" => {
                let v = it.next().ok_or("--out needs a value")?;
                overrides.output_dir = Some(PathBuf::from(v));
            }
            "--jobs" => {
                let v = it.next().ok_or("--jobs needs a value")?;
                overrides.jobs = v.parse().map_err(|_| format!("bad job count '{v}'"))?;
                if overrides.jobs == 0 {
                    return Err("--jobs must be at least 1".into());
                }
            }
            "--strict" => overrides.strict = true,
            other => return Err(format!("unknown flag '{other}'\n{USAGE}")),
        }
    }
    Ok(Cli {
        subcommand,
        config_path,
        overrides,
    })
}

fn expected_experiment(subcommand: &str) -> Option<&'static str> {
    match subcommand {
        "verify-bound" => Some("bound_check"),
        "estimate-lyapunov" => Some("lyapunov_audit"),
        "sweep" => Some("admm_tradeoff"),
        _ => None,
    }
}

fn run(cli: Cli) -> Result<ExitCode, HarnessError> {
    let outcome = runner::execute_file(&cli.config_path, &cli.overrides)?;
    if let Some(expected) = expected_experiment(&cli.subcommand) {
        if outcome.experiment != expected {
            return Err(HarnessError::Usage(format!(
                "subcommand '{}' expects a {expected} config, got {}",
                cli.subcommand, outcome.experiment
            )));
        }
    }
    println!(
        "{}: wrote {} outputs to {} (config {})",
        outcome.experiment,
        outcome.manifest.outputs.len(),
        outcome.output_dir.display(),
        &outcome.manifest.config_hash[..12],
    );
    for warning in &outcome.warnings {
        println!("warning: {warning}");
    }
    for violation in &outcome.violations {
        println!("violation: {violation}");
    }
    if !outcome.violations.is_empty() {
        println!("result: FAIL ({} violations)", outcome.violations.len());
        return Ok(ExitCode::from(EXIT_VIOLATIONS as u8));
    }
    if cli.overrides.strict && !outcome.warnings.is_empty() {
        println!("result: FAIL (strict mode, {} warnings)", outcome.warnings.len());
        return Ok(ExitCode::from(EXIT_VIOLATIONS as u8));
    }
    println!("result: PASS");
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cli = match parse_args(args) {
        Ok(cli) => cli,
        Err(msg) => {
            eprintln!("{msg}");
            return ExitCode::from(64);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
