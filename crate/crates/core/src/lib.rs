//! Core library for analyzing iterative algorithms as discrete-time
//! dynamical systems under disturbances.
//!
//! An algorithm is a nominal update family `x_{k+1} = f_k(x_k)` together
//! with a disturbed family `z_{k+1} = g_k(z_k, e_k)` that agrees with the
//! nominal one at zero disturbance. Convergence of the nominal iteration is
//! expressed through a pseudometric and a per-step rate schedule; from these
//! the [`lyapunov`] module builds executable sup-form and sum-form Lyapunov
//! functions with certified constants, and [`bounds`] evaluates the
//! resulting disturbance bounds as explicit series.
//!
//! [`disturbance`] provides seeded disturbance generators and the
//! small-gain machinery for feedback interconnections, [`algozoo`] factories
//! produce system/metric/schedule triples with analytic constants for
//! first-order optimizers, and [`distsim`] simulates event-triggered
//! consensus ADMM over multiple agents.
//!
//! The crate is `no_std` (alloc only); all IO lives in the companion
//! harness crate.

#![no_std]

extern crate alloc;

pub mod algozoo;
pub mod bounds;
pub mod distsim;
pub mod disturbance;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod lyapunov;
pub mod metrics;
pub mod region;
pub mod rng;
pub mod vecops;

pub use dynamics::{DynamicalSystem, Trajectory};
pub use error::{Error, Result};
pub use lyapunov::{LyapunovEstimate, LyapunovForm};
pub use metrics::{MetricKind, PseudometricSpec, RateSchedule};
pub use region::Region;
pub use vecops::Norm;
