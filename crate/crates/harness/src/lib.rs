//! Experiment harness: config parsing, deterministic CSV/JSON/SVG output,
//! run manifests, and the experiment implementations behind the CLI.

pub mod config;
pub mod csvout;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod manifest;
pub mod parallel;
pub mod runner;
pub mod specs;
pub mod svg;
