//! Nominal and disturbed discrete-time systems, flow maps, and sampled
//! Lipschitz-constant estimation.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{check_dim, Error, Result};
use crate::region::Region;
use crate::rng::{stream, CounterRng};
use crate::vecops::{self, Norm};

/// Nominal update family `(k, x) -> f_k(x)`.
pub type UpdateFn = Arc<dyn Fn(usize, &[f64]) -> Vec<f64> + Send + Sync>;
/// Disturbed update family `(k, z, e) -> g_k(z, e)`.
pub type DisturbedFn = Arc<dyn Fn(usize, &[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// Per-step disturbance gain `L_ek`, either constant or a closed form in `k`.
#[derive(Clone)]
pub enum GainSchedule {
    Constant(f64),
    Varying(Arc<dyn Fn(usize) -> f64 + Send + Sync>),
}

impl GainSchedule {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            GainSchedule::Constant(g) => *g,
            GainSchedule::Varying(f) => f(k),
        }
    }

    /// First `n` gains as a slice-friendly vector.
    pub fn series(&self, n: usize) -> Vec<f64> {
        (0..n).map(|k| self.at(k)).collect()
    }
}

impl core::fmt::Debug for GainSchedule {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            GainSchedule::Constant(g) => write!(f, "GainSchedule::Constant({g})"),
            GainSchedule::Varying(_) => write!(f, "GainSchedule::Varying(..)"),
        }
    }
}

/// A discrete-time system: nominal updates, a disturbed counterpart that
/// reduces to them at zero disturbance, an equilibrium of the nominal
/// dynamics, and per-step disturbance gains.
#[derive(Clone)]
pub struct DynamicalSystem {
    dim_state: usize,
    dim_disturbance: usize,
    nominal: UpdateFn,
    disturbed: DisturbedFn,
    equilibrium: Vec<f64>,
    gain: GainSchedule,
    state_norm: Norm,
    disturbance_norm: Norm,
}

impl core::fmt::Debug for DynamicalSystem {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("DynamicalSystem")
            .field("dim_state", &self.dim_state)
            .field("dim_disturbance", &self.dim_disturbance)
            .field("equilibrium", &self.equilibrium)
            .field("gain", &self.gain)
            .field("state_norm", &self.state_norm)
            .field("disturbance_norm", &self.disturbance_norm)
            .finish()
    }
}

impl DynamicalSystem {
    pub fn new(
        dim_state: usize,
        dim_disturbance: usize,
        nominal: UpdateFn,
        disturbed: DisturbedFn,
        equilibrium: Vec<f64>,
        gain: GainSchedule,
    ) -> Result<Self> {
        if dim_state == 0 {
            return Err(Error::InvalidInput("state dimension must be positive".into()));
        }
        check_dim(dim_state, equilibrium.len())?;
        Ok(Self {
            dim_state,
            dim_disturbance,
            nominal,
            disturbed,
            equilibrium,
            gain,
            state_norm: Norm::L2,
            disturbance_norm: Norm::L2,
        })
    }

    /// System without a disturbance channel (`g_k(z, e) = f_k(z)`).
    pub fn autonomous(dim_state: usize, nominal: UpdateFn, equilibrium: Vec<f64>) -> Result<Self> {
        let f = nominal.clone();
        Self::new(
            dim_state,
            dim_state,
            nominal,
            Arc::new(move |k, z, _e| f(k, z)),
            equilibrium,
            GainSchedule::Constant(0.0),
        )
    }

    pub fn with_norms(mut self, state_norm: Norm, disturbance_norm: Norm) -> Self {
        self.state_norm = state_norm;
        self.disturbance_norm = disturbance_norm;
        self
    }

    pub fn dim_state(&self) -> usize {
        self.dim_state
    }

    pub fn dim_disturbance(&self) -> usize {
        self.dim_disturbance
    }

    pub fn equilibrium(&self) -> &[f64] {
        &self.equilibrium
    }

    pub fn state_norm(&self) -> Norm {
        self.state_norm
    }

    pub fn disturbance_norm(&self) -> Norm {
        self.disturbance_norm
    }

    /// Disturbance gain `L_ek` at step `k`.
    pub fn gain_bound(&self, k: usize) -> f64 {
        self.gain.at(k)
    }

    pub fn gain_schedule(&self) -> &GainSchedule {
        &self.gain
    }

    /// One nominal update `f_k(x)`.
    pub fn step_nominal(&self, k: usize, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim_state, x.len())?;
        Ok((self.nominal)(k, x))
    }

    /// One disturbed update `g_k(z, e)`.
    pub fn step_disturbed(&self, k: usize, z: &[f64], e: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim_state, z.len())?;
        check_dim(self.dim_disturbance, e.len())?;
        Ok((self.disturbed)(k, z, e))
    }

    /// `kprime`-fold nominal composition starting at index `k`.
    pub fn flow(&self, kprime: usize, k: usize, xi: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim_state, xi.len())?;
        let mut x = xi.to_vec();
        for i in 0..kprime {
            x = (self.nominal)(k + i, &x);
        }
        Ok(x)
    }

    /// Max sampled secant slope of the nominal update over a region: a
    /// lower estimate of the uniform state Lipschitz constant, converging
    /// from below as `n_pairs` grows. Deterministic given the seed, and
    /// nondecreasing in `n_pairs` for a fixed seed.
    pub fn estimate_lipschitz_state(
        &self,
        region: &Region,
        n_pairs: usize,
        k_range: Range<usize>,
        seed: u64,
    ) -> Result<f64> {
        if n_pairs == 0 {
            return Err(Error::InvalidInput("n_pairs must be at least 1".into()));
        }
        check_dim(self.dim_state, region.dim())?;
        if region.is_degenerate() {
            return Err(Error::InvalidInput("degenerate sampling region".into()));
        }
        let ks: Vec<usize> = if k_range.is_empty() {
            alloc::vec![0]
        } else {
            k_range.collect()
        };
        let probe_scale = 1e-4 * region.diameter();
        let rng = CounterRng::new(seed ^ 0x5eed, stream::PROBE);
        let mut best = 0.0_f64;
        for i in 0..n_pairs {
            let k = ks[i % ks.len()];
            let x1 = region.low_discrepancy_point(seed, 2 * i as u64);
            let x2 = region.low_discrepancy_point(seed, 2 * i as u64 + 1);
            if let Some(r) = self.secant_state(k, &x1, &x2)? {
                best = best.max(r);
            }
            // Local probe in a quasi-random direction at finite-difference scale.
            let dir = unit_direction(&rng, i as u64, self.dim_state);
            let xp = vecops::axpy(&x1, probe_scale, &dir);
            if let Some(r) = self.secant_state(k, &x1, &xp)? {
                best = best.max(r);
            }
        }
        Ok(best)
    }

    fn secant_state(&self, k: usize, x1: &[f64], x2: &[f64]) -> Result<Option<f64>> {
        let denom = self.state_norm.dist(x1, x2);
        if denom < 1e-300 {
            return Ok(None); // degenerate pair: skipped, never divided by zero
        }
        let y1 = self.step_nominal(k, x1)?;
        let y2 = self.step_nominal(k, x2)?;
        Ok(Some(self.state_norm.dist(&y1, &y2) / denom))
    }

    /// Max sampled secant slope of the disturbed update in the disturbance
    /// argument at fixed step `k`: an empirical `L_ek`.
    pub fn estimate_lipschitz_disturbance(
        &self,
        k: usize,
        region_x: &Region,
        region_e: &Region,
        n_pairs: usize,
        seed: u64,
    ) -> Result<f64> {
        if n_pairs == 0 {
            return Err(Error::InvalidInput("n_pairs must be at least 1".into()));
        }
        check_dim(self.dim_state, region_x.dim())?;
        check_dim(self.dim_disturbance, region_e.dim())?;
        if region_e.is_degenerate() {
            return Err(Error::InvalidInput("degenerate disturbance region".into()));
        }
        // The disturbance set must contain the rest point of the channel.
        if !region_e.contains(&alloc::vec![0.0; self.dim_disturbance]) {
            return Err(Error::InvalidInput(
                "disturbance region must contain the origin".into(),
            ));
        }
        let probe_scale = 1e-4 * region_e.diameter();
        let rng = CounterRng::new(seed ^ 0xd157, stream::PROBE);
        let mut best = 0.0_f64;
        for i in 0..n_pairs {
            let x = region_x.low_discrepancy_point(seed ^ 0xa11ce, i as u64);
            let e1 = region_e.low_discrepancy_point(seed, 2 * i as u64);
            let e2 = region_e.low_discrepancy_point(seed, 2 * i as u64 + 1);
            if let Some(r) = self.secant_disturbance(k, &x, &e1, &e2)? {
                best = best.max(r);
            }
            let dir = unit_direction(&rng, i as u64, self.dim_disturbance);
            let ep = vecops::axpy(&e1, probe_scale, &dir);
            if let Some(r) = self.secant_disturbance(k, &x, &e1, &ep)? {
                best = best.max(r);
            }
        }
        Ok(best)
    }

    fn secant_disturbance(&self, k: usize, x: &[f64], e1: &[f64], e2: &[f64]) -> Result<Option<f64>> {
        let denom = self.disturbance_norm.dist(e1, e2);
        if denom < 1e-300 {
            return Ok(None);
        }
        let y1 = self.step_disturbed(k, x, e1)?;
        let y2 = self.step_disturbed(k, x, e2)?;
        Ok(Some(self.state_norm.dist(&y1, &y2) / denom))
    }

    /// Max relative mismatch of `g_k(z, 0)` against `f_k(z)` over sampled
    /// `(k, z)`; both invariants of the type are sampled here.
    pub fn validate_consistency(&self, region: &Region, n_samples: usize, seed: u64) -> Result<ConsistencyReport> {
        check_dim(self.dim_state, region.dim())?;
        let zero_e = alloc::vec![0.0; self.dim_disturbance];
        let mut worst_zero_gap = 0.0_f64;
        let mut worst_equilibrium_drift = 0.0_f64;
        for i in 0..n_samples {
            let k = i % 17;
            let z = region.low_discrepancy_point(seed, i as u64);
            let f = self.step_nominal(k, &z)?;
            let g = self.step_disturbed(k, &z, &zero_e)?;
            let gap = self.state_norm.dist(&f, &g) / (1.0 + self.state_norm.eval(&z));
            worst_zero_gap = worst_zero_gap.max(gap);

            let fe = self.step_nominal(k, &self.equilibrium)?;
            let drift = self.state_norm.dist(&fe, &self.equilibrium)
                / (1.0 + self.state_norm.eval(&self.equilibrium));
            worst_equilibrium_drift = worst_equilibrium_drift.max(drift);
        }
        Ok(ConsistencyReport {
            max_zero_disturbance_gap: worst_zero_gap,
            max_equilibrium_drift: worst_equilibrium_drift,
        })
    }
}

/// Sampled consistency check results for a [`DynamicalSystem`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyReport {
    /// Max of `|g_k(z,0) - f_k(z)| / (1 + |z|)` over the samples.
    pub max_zero_disturbance_gap: f64,
    /// Max of `|f_k(x*) - x*| / (1 + |x*|)` over the sampled steps.
    pub max_equilibrium_drift: f64,
}

fn unit_direction(rng: &CounterRng, k: u64, dim: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|j| rng.gaussian(k, j as u64)).collect();
    let n = Norm::L2.eval(&v);
    if n < 1e-300 {
        v[0] = 1.0;
        return v;
    }
    for x in v.iter_mut() {
        *x /= n;
    }
    v
}

/// A realized run of the disturbed dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub start_index: usize,
    pub states: Vec<Vec<f64>>,
    pub disturbances: Vec<Vec<f64>>,
    pub metric_values: Vec<f64>,
}

impl Trajectory {
    /// Number of recorded states.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Max relative step mismatch `|states[i+1] - g(k0+i, states[i], e_i)|`.
    pub fn validate(&self, sys: &DynamicalSystem) -> Result<f64> {
        if self.disturbances.len() + 1 != self.states.len() {
            return Err(Error::InvalidInput(String::from(
                "trajectory must have one more state than disturbances",
            )));
        }
        let mut worst = 0.0_f64;
        for i in 0..self.disturbances.len() {
            let next = sys.step_disturbed(self.start_index + i, &self.states[i], &self.disturbances[i])?;
            let gap = sys.state_norm.dist(&next, &self.states[i + 1])
                / (1.0 + sys.state_norm.eval(&self.states[i + 1]));
            worst = worst.max(gap);
        }
        Ok(worst)
    }
}

/// Roll the nominal dynamics out for `steps` updates, recording metric
/// distances to the equilibrium when a metric is supplied.
pub fn simulate_nominal(
    sys: &DynamicalSystem,
    start_index: usize,
    x0: &[f64],
    steps: usize,
    metric: Option<&crate::metrics::PseudometricSpec>,
) -> Result<Trajectory> {
    let mut states = Vec::with_capacity(steps + 1);
    let mut disturbances = Vec::with_capacity(steps);
    states.push(x0.to_vec());
    for i in 0..steps {
        let next = sys.step_nominal(start_index + i, states.last().unwrap())?;
        states.push(next);
        disturbances.push(alloc::vec![0.0; sys.dim_disturbance]);
    }
    let metric_values = metric_series(sys, metric, &states);
    Ok(Trajectory {
        start_index,
        states,
        disturbances,
        metric_values,
    })
}

/// Roll the disturbed dynamics out, drawing `e_k` from the supplied source.
pub fn simulate_disturbed(
    sys: &DynamicalSystem,
    source: &mut crate::disturbance::DisturbanceSource,
    start_index: usize,
    z0: &[f64],
    steps: usize,
    metric: Option<&crate::metrics::PseudometricSpec>,
) -> Result<Trajectory> {
    let mut states = Vec::with_capacity(steps + 1);
    let mut disturbances = Vec::with_capacity(steps);
    states.push(z0.to_vec());
    for i in 0..steps {
        let k = start_index + i;
        let z = states.last().unwrap();
        let e = source.draw_for(sys, k, Some(z))?;
        let next = sys.step_disturbed(k, z, &e)?;
        states.push(next);
        disturbances.push(e);
    }
    let metric_values = metric_series(sys, metric, &states);
    Ok(Trajectory {
        start_index,
        states,
        disturbances,
        metric_values,
    })
}

fn metric_series(
    sys: &DynamicalSystem,
    metric: Option<&crate::metrics::PseudometricSpec>,
    states: &[Vec<f64>],
) -> Vec<f64> {
    match metric {
        Some(m) => states
            .iter()
            .map(|s| m.eval(s, &sys.equilibrium))
            .collect(),
        None => states
            .iter()
            .map(|s| sys.state_norm.dist(s, &sys.equilibrium))
            .collect(),
    }
}
