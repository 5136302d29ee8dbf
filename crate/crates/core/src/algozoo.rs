//! Factories producing system / pseudometric / rate-schedule bundles with
//! certified constants for the first-order optimizers under study, plus the
//! replace-one-record stability experiment.
//!
//! Quadratic problems carry their curvature spectrum explicitly, so the
//! factories can hand out analytic constants and exact probe directions.
//! For other problem kinds the settling horizon and overshoot constant are
//! calibrated from trajectory probes and inflated by a safety margin.
//!
//! The accelerated factory samples its working region on the zero-momentum
//! slice: the shifted objective gap can vanish at nonzero momentum states,
//! where no finite overshoot constant exists. All certified inequalities
//! are along trajectories launched from that slice.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::dynamics::{DynamicalSystem, GainSchedule};
use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix};
use crate::lyapunov::{self, LyapunovEstimate};
use crate::metrics::{LossFn, PseudometricSpec, RateSchedule};
use crate::region::Region;
use crate::rng::{stream, CounterRng};
use crate::vecops::{self, Norm};

pub type GradFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Quadratic,
    LogisticRegression,
    Custom,
}

/// Feature/label records backing dataset problems.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// A smooth objective with its curvature moduli, gradient bound on the
/// working region, and minimizer.
#[derive(Clone)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub gamma: f64,
    pub beta: f64,
    pub l_ell: f64,
    pub dataset: Option<Dataset>,
    pub minimizer: Vec<f64>,
    pub region: Region,
    loss: LossFn,
    grad: GradFn,
    /// Diagonal curvature spectrum when the problem is an axis-aligned
    /// quadratic; enables exact probe directions.
    axes: Option<Vec<f64>>,
}

impl core::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("kind", &self.kind)
            .field("gamma", &self.gamma)
            .field("beta", &self.beta)
            .field("l_ell", &self.l_ell)
            .field("minimizer", &self.minimizer)
            .finish()
    }
}

impl ProblemSpec {
    /// Axis-aligned quadratic `0.5 * sum lam_i (x_i - m_i)^2` on a box of
    /// the given radius around the minimizer.
    pub fn quadratic(eigenvalues: Vec<f64>, minimizer: Vec<f64>, radius: f64) -> Result<Self> {
        if eigenvalues.len() != minimizer.len() {
            return Err(Error::DimensionMismatch {
                expected: eigenvalues.len(),
                got: minimizer.len(),
            });
        }
        if eigenvalues.iter().any(|l| *l < 0.0) {
            return Err(Error::InvalidInput("curvatures must be nonnegative".into()));
        }
        let beta = eigenvalues.iter().fold(0.0_f64, |m, l| m.max(*l));
        if beta <= 0.0 {
            return Err(Error::InvalidInput(
                "at least one curvature must be positive".into(),
            ));
        }
        let gamma = eigenvalues.iter().fold(f64::INFINITY, |m, l| m.min(*l));
        // Gradient bound at the box corners.
        let l_ell = radius * libm::sqrt(eigenvalues.iter().map(|l| l * l).sum::<f64>());
        let region = Region::around(&minimizer, radius);
        let lams = eigenvalues.clone();
        let center = minimizer.clone();
        let loss: LossFn = {
            let lams = lams.clone();
            let center = center.clone();
            Arc::new(move |x: &[f64]| {
                x.iter()
                    .zip(&center)
                    .zip(&lams)
                    .map(|((xi, mi), li)| 0.5 * li * (xi - mi) * (xi - mi))
                    .sum()
            })
        };
        let grad: GradFn = Arc::new(move |x: &[f64]| {
            x.iter()
                .zip(&center)
                .zip(&lams)
                .map(|((xi, mi), li)| li * (xi - mi))
                .collect()
        });
        Ok(Self {
            kind: ProblemKind::Quadratic,
            gamma,
            beta,
            l_ell,
            dataset: None,
            minimizer,
            region,
            loss,
            grad,
            axes: Some(eigenvalues),
        })
    }

    /// Ridge regression `(1/n) sum_i [0.5 (x_i' th - y_i)^2 + 0.5 mu |th|^2]`,
    /// collapsed to its quadratic form for exact gradients.
    pub fn ridge(dataset: Dataset, mu: f64, radius: f64) -> Result<Self> {
        let task = RidgeTask::build(&dataset, mu)?;
        let minimizer = task.minimizer()?;
        let eigs = task.hessian.eigenvalues();
        let gamma = eigs[0];
        let beta = eigs[eigs.len() - 1];
        if gamma <= 0.0 {
            return Err(Error::InvalidInput(
                "ridge problem must be strongly convex".into(),
            ));
        }
        let dim = minimizer.len();
        let l_ell = beta * radius * libm::sqrt(dim as f64);
        let region = Region::around(&minimizer, radius);
        let t1 = task.clone();
        let t2 = task;
        Ok(Self {
            kind: ProblemKind::Quadratic,
            gamma,
            beta,
            l_ell,
            dataset: Some(dataset),
            minimizer,
            region,
            loss: Arc::new(move |x: &[f64]| t1.loss(x)),
            grad: Arc::new(move |x: &[f64]| t2.grad(x)),
            axes: None,
        })
    }

    /// Regularized logistic regression on labels in `{-1, +1}`. The
    /// minimizer is located numerically; curvature moduli come from the
    /// regularizer and the Gram spectrum.
    pub fn logistic_regression(dataset: Dataset, mu: f64, radius: f64) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::InvalidInput("dataset must be nonempty".into()));
        }
        if mu <= 0.0 {
            return Err(Error::InvalidInput("regularizer must be positive".into()));
        }
        let n = dataset.len();
        let dim = dataset.features[0].len();
        let mut gram = SymMatrix::zeros(dim);
        for x in &dataset.features {
            gram.add_outer(x, 1.0 / n as f64);
        }
        let gram_eigs = gram.eigenvalues();
        let gamma = mu;
        let beta = mu + gram_eigs[dim - 1] / 4.0;
        let data = dataset.clone();
        let loss: LossFn = {
            let data = data.clone();
            Arc::new(move |th: &[f64]| {
                let fit: f64 = data
                    .features
                    .iter()
                    .zip(&data.labels)
                    .map(|(x, y)| {
                        let margin = -y * vecops::dot(x, th);
                        // log(1 + exp(m)) without overflow
                        if margin > 30.0 {
                            margin
                        } else {
                            libm::log(1.0 + libm::exp(margin))
                        }
                    })
                    .sum::<f64>()
                    / data.features.len() as f64;
                fit + 0.5 * mu * vecops::dot(th, th)
            })
        };
        let grad: GradFn = {
            let data = data.clone();
            Arc::new(move |th: &[f64]| {
                let n = data.features.len() as f64;
                let mut g = vecops::scale(th, mu);
                for (x, y) in data.features.iter().zip(&data.labels) {
                    let margin = -y * vecops::dot(x, th);
                    let sig = 1.0 / (1.0 + libm::exp(-margin));
                    for (gj, xj) in g.iter_mut().zip(x) {
                        *gj += -y * sig * xj / n;
                    }
                }
                g
            })
        };
        // Locate the minimizer by descent at the optimal smooth step.
        let mut th = alloc::vec![0.0; dim];
        let h = 2.0 / (beta + gamma);
        for _ in 0..50_000 {
            let g = grad(&th);
            if Norm::L2.eval(&g) <= 1e-14 {
                break;
            }
            th = vecops::axpy(&th, -h, &g);
        }
        if Norm::L2.eval(&grad(&th)) > 1e-10 {
            return Err(Error::InvalidInput(
                "logistic minimizer did not converge".into(),
            ));
        }
        let reach = Norm::L2.eval(&th) + radius * libm::sqrt(dim as f64);
        let max_feature = data
            .features
            .iter()
            .map(|x| Norm::L2.eval(x))
            .fold(0.0_f64, f64::max);
        let l_ell = max_feature + mu * reach;
        let region = Region::around(&th, radius);
        Ok(Self {
            kind: ProblemKind::LogisticRegression,
            gamma,
            beta,
            l_ell,
            dataset: Some(dataset),
            minimizer: th,
            region,
            loss,
            grad,
            axes: None,
        })
    }

    pub fn custom(
        loss: LossFn,
        grad: GradFn,
        gamma: f64,
        beta: f64,
        l_ell: f64,
        minimizer: Vec<f64>,
        region: Region,
    ) -> Result<Self> {
        if gamma > beta {
            return Err(Error::InvalidInput("gamma must not exceed beta".into()));
        }
        let g = grad(&minimizer);
        if Norm::L2.eval(&g) > 1e-10 {
            return Err(Error::InvalidInput("minimizer gradient is not zero".into()));
        }
        Ok(Self {
            kind: ProblemKind::Custom,
            gamma,
            beta,
            l_ell,
            dataset: None,
            minimizer,
            region,
            loss,
            grad,
            axes: None,
        })
    }

    pub fn loss(&self, x: &[f64]) -> f64 {
        (self.loss)(x)
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        (self.grad)(x)
    }

    pub fn dim(&self) -> usize {
        self.minimizer.len()
    }

    pub fn condition_number(&self) -> f64 {
        self.beta / self.gamma
    }

    fn loss_fn(&self) -> LossFn {
        self.loss.clone()
    }

    fn grad_fn(&self) -> GradFn {
        self.grad.clone()
    }
}

/// Constants certified by a factory for downstream bound evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct CertifiedConstants {
    /// Uniform state Lipschitz constant of one nominal update.
    pub state_lipschitz: f64,
    /// True when `state_lipschitz` came from sampling (already inflated).
    pub state_lipschitz_empirical: bool,
    /// Disturbance channel gain per step.
    pub gain: f64,
    /// Norm bound of the pseudometric on the working region.
    pub metric_norm_bound: f64,
    pub metric_hessian_bound: Option<f64>,
    pub flow_hessian_bound: Option<f64>,
    /// Closed-form Lipschitz certificate of the sup-form construction.
    pub lyapunov_lipschitz: f64,
    /// Series Hessian certificate of the sum-form construction.
    pub sum_hessian_bound: Option<f64>,
}

/// Inflation applied to sampled constants before certification.
pub const EMPIRICAL_INFLATION: f64 = 1.1;

/// A system / metric / schedule triple with its constants and the sampling
/// region used for audits.
#[derive(Clone)]
pub struct AlgoBundle {
    pub system: DynamicalSystem,
    pub metric: PseudometricSpec,
    pub schedule: RateSchedule,
    pub constants: CertifiedConstants,
    pub region: Region,
    pub step_size: f64,
    pub sigma2: f64,
    pub notes: Vec<String>,
}

impl AlgoBundle {
    /// Sup-form construction at the calibrated settling horizon, carrying
    /// the Lipschitz certificate.
    pub fn sup_estimate(&self) -> LyapunovEstimate {
        LyapunovEstimate::sup(
            self.system.clone(),
            self.metric.clone(),
            self.schedule.clone(),
            self.schedule.horizon,
        )
        .with_lipschitz(self.constants.lyapunov_lipschitz)
    }

    /// Sum-form construction at the same horizon, carrying the series
    /// Hessian certificate when the metric supports one.
    pub fn sum_estimate(&self) -> Result<LyapunovEstimate> {
        let est = LyapunovEstimate::sum(
            self.system.clone(),
            self.metric.clone(),
            self.schedule.clone(),
            self.schedule.horizon,
        )?;
        Ok(match self.constants.sum_hessian_bound {
            Some(l_h) => est.with_hessian(l_h),
            None => est,
        })
    }

    /// Audit sample set: low-discrepancy points in the working region.
    pub fn sample_states(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        (0..count)
            .map(|i| self.region.low_discrepancy_point(seed, i as u64))
            .collect()
    }
}

/// Probe set for calibration: box corners along each axis plus a
/// low-discrepancy fill, `total` points overall.
fn probe_starts(region: &Region, total: usize, seed: u64) -> Vec<Vec<f64>> {
    let dim = region.dim();
    let center: Vec<f64> = (0..dim)
        .map(|i| 0.5 * (region.lower[i] + region.upper[i]))
        .collect();
    let scale = region.diameter().max(1e-12);
    let mut out = Vec::with_capacity(total);
    for j in 0..dim {
        for corner in [&region.lower, &region.upper] {
            let mut x = center.clone();
            x[j] = corner[j];
            // Zero-width coordinates reproduce the center; those probes
            // carry no decay information.
            if Norm::L2.dist(&x, &center) > 1e-12 * scale {
                out.push(x);
            }
        }
    }
    let mut i = 0u64;
    while out.len() < total {
        out.push(region.low_discrepancy_point(seed, i));
        i += 1;
    }
    out.truncate(total);
    out
}

/// Plain gradient-descent system `x - h (grad l(x) + e)`.
fn gd_system(problem: &ProblemSpec, h: f64) -> Result<DynamicalSystem> {
    let dim = problem.dim();
    let grad_n = problem.grad_fn();
    let grad_d = problem.grad_fn();
    DynamicalSystem::new(
        dim,
        dim,
        Arc::new(move |_k, x: &[f64]| {
            let g = grad_n(x);
            x.iter().zip(&g).map(|(xi, gi)| xi - h * gi).collect()
        }),
        Arc::new(move |_k, z: &[f64], e: &[f64]| {
            let g = grad_d(z);
            z.iter()
                .zip(&g)
                .zip(e)
                .map(|((zi, gi), ei)| zi - h * (gi + ei))
                .collect()
        }),
        problem.minimizer.clone(),
        GainSchedule::Constant(h),
    )
}

/// Step tuned to a known horizon: `(beta + gamma) / (2 gamma beta) * log(N) / N`.
pub fn horizon_tuned_step(gamma: f64, beta: f64, n_total: usize) -> f64 {
    (beta + gamma) / (2.0 * gamma * beta) * libm::log(n_total as f64) / n_total as f64
}

/// Gradient descent on a smooth convex objective at step `1/beta`, measured
/// by the objective gap under the sublinear schedule whose running product
/// is `4 / (k + 4)`. The overshoot constant is calibrated from a probe and
/// carries a 5% margin.
pub fn make_gd_convex(problem: &ProblemSpec) -> Result<AlgoBundle> {
    let h = 1.0 / problem.beta;
    let system = gd_system(problem, h)?;
    let metric = PseudometricSpec::loss_gap(problem.loss_fn(), problem.l_ell, Some(problem.beta));
    let starts = probe_starts(&problem.region, 100, 23);
    let k_max = 600usize;
    let provisional = RateSchedule::inverse_time(5.0, 1.0, 1)?;
    let c0 = lyapunov::calibrate_overshoot(&system, &metric, &provisional, &starts, k_max)?;
    let probe_schedule = RateSchedule::inverse_time(5.0, c0, 1)?;
    let horizon = lyapunov::detect_horizon(&system, &metric, &probe_schedule, &starts, k_max)?;
    let schedule = RateSchedule::inverse_time(5.0, c0, horizon)?;
    let mut notes = Vec::new();
    if problem.gamma > 0.0 {
        notes.push(String::from(
            "problem is strongly convex; the strongly convex factory gives a linear rate",
        ));
    }
    // Descent at 1/beta never expands distances for a convex smooth
    // objective; a known spectrum gives the tight value.
    let l_f = match &problem.axes {
        Some(axes) => axes
            .iter()
            .fold(0.0_f64, |m, lam| m.max((1.0 - h * lam).abs())),
        None => 1.0,
    };
    let tau0 = schedule.tau(0);
    let l_v = lyapunov::analytic_lipschitz(metric.norm_bound(), l_f, horizon, tau0).value;
    let constants = CertifiedConstants {
        state_lipschitz: l_f,
        state_lipschitz_empirical: false,
        gain: h,
        metric_norm_bound: metric.norm_bound(),
        metric_hessian_bound: metric.hessian_bound(),
        flow_hessian_bound: Some(0.0),
        lyapunov_lipschitz: l_v,
        sum_hessian_bound: Some(lyapunov::hessian_bound_series(
            &schedule,
            horizon,
            l_f,
            metric.norm_bound(),
            problem.beta,
            0.0,
        )),
    };
    Ok(AlgoBundle {
        system,
        metric,
        schedule,
        constants,
        region: problem.region.clone(),
        step_size: h,
        sigma2: 0.0,
        notes,
    })
}

/// Gradient descent on a strongly convex objective at step
/// `2 / (beta + gamma)`: Euclidean metric, constant rate
/// `(beta - gamma) / (beta + gamma)`, unit overshoot, settling horizon 1.
pub fn make_gd_strongly_convex(problem: &ProblemSpec) -> Result<AlgoBundle> {
    if problem.gamma <= 0.0 {
        return Err(Error::InvalidInput(
            "strongly convex factory requires gamma > 0".into(),
        ));
    }
    let h = 2.0 / (problem.beta + problem.gamma);
    let tau = (problem.beta - problem.gamma) / (problem.beta + problem.gamma);
    let system = gd_system(problem, h)?;
    let metric = PseudometricSpec::euclidean();
    let schedule = RateSchedule::constant(tau, 1.0, 1)?;
    let l_f = tau;
    // Degenerate tau = 0 (perfect conditioning): one-step convergence, the
    // construction collapses to the metric itself.
    let l_v = if tau == 0.0 {
        metric.norm_bound()
    } else {
        lyapunov::analytic_lipschitz(metric.norm_bound(), l_f, 1, tau).value
    };
    let constants = CertifiedConstants {
        state_lipschitz: l_f,
        state_lipschitz_empirical: false,
        gain: h,
        metric_norm_bound: metric.norm_bound(),
        metric_hessian_bound: None,
        flow_hessian_bound: Some(0.0),
        lyapunov_lipschitz: l_v,
        sum_hessian_bound: None,
    };
    Ok(AlgoBundle {
        system,
        metric,
        schedule,
        constants,
        region: problem.region.clone(),
        step_size: h,
        sigma2: 0.0,
        notes: Vec::new(),
    })
}

/// Gradient descent with mean-zero noise on the gradient channel, measured
/// by the objective gap: constant rate `1 - 2 h gamma beta / (beta + gamma)`,
/// overshoot `beta / gamma`, affine channel with gain `h`.
pub fn make_noisy_gd(problem: &ProblemSpec, sigma2: f64, h: f64) -> Result<AlgoBundle> {
    if problem.gamma <= 0.0 {
        return Err(Error::InvalidInput("noisy descent requires gamma > 0".into()));
    }
    if !(h > 0.0 && h <= 2.0 / (problem.beta + problem.gamma)) {
        return Err(Error::InvalidInput(format!(
            "step {h} outside (0, {}]",
            2.0 / (problem.beta + problem.gamma)
        )));
    }
    if sigma2 < 0.0 {
        return Err(Error::InvalidInput("noise level must be nonnegative".into()));
    }
    let tau = 1.0 - 2.0 * h * problem.gamma * problem.beta / (problem.beta + problem.gamma);
    let c0 = problem.condition_number();
    let system = gd_system(problem, h)?;
    let metric = PseudometricSpec::loss_gap(problem.loss_fn(), problem.l_ell, Some(problem.beta));
    // For quadratic objectives the per-step gap contraction matches the
    // rate analytically; otherwise calibrate from probes.
    let horizon = if problem.kind == ProblemKind::Quadratic {
        1
    } else {
        let starts = probe_starts(&problem.region, 64, 31);
        let probe_schedule = RateSchedule::constant(tau, c0, 1)?;
        lyapunov::detect_horizon(&system, &metric, &probe_schedule, &starts, 400)?
    };
    let schedule = RateSchedule::constant(tau, c0, horizon)?;
    let l_f = match &problem.axes {
        Some(axes) => axes
            .iter()
            .fold(0.0_f64, |m, lam| m.max((1.0 - h * lam).abs())),
        None => (1.0 - h * problem.gamma).max(h * problem.beta - 1.0),
    };
    let flow_hessian = if problem.kind == ProblemKind::Quadratic {
        Some(0.0)
    } else {
        None
    };
    let sum_hessian = flow_hessian.map(|lhphi| {
        lyapunov::hessian_bound_series(
            &schedule,
            horizon,
            l_f,
            metric.norm_bound(),
            problem.beta,
            lhphi,
        )
    });
    let l_v = if tau == 0.0 {
        metric.norm_bound()
    } else {
        lyapunov::analytic_lipschitz(metric.norm_bound(), l_f, horizon, tau).value
    };
    let constants = CertifiedConstants {
        state_lipschitz: l_f,
        state_lipschitz_empirical: false,
        gain: h,
        metric_norm_bound: metric.norm_bound(),
        metric_hessian_bound: metric.hessian_bound(),
        flow_hessian_bound: flow_hessian,
        lyapunov_lipschitz: l_v,
        sum_hessian_bound: sum_hessian,
    };
    Ok(AlgoBundle {
        system,
        metric,
        schedule,
        constants,
        region: problem.region.clone(),
        step_size: h,
        sigma2,
        notes: Vec::new(),
    })
}

/// Damping parameters of the accelerated scheme.
pub fn acceleration_damping(gamma: f64, beta: f64) -> (f64, f64) {
    let d = 1.0 / (1.0 + libm::sqrt(beta / gamma));
    (d, 1.0 - 2.0 * d)
}

/// Momentum shift of the accelerated metric: `bbar / (1 - 2 d h) - h`.
pub fn acceleration_shift(gamma: f64, beta: f64, h: f64) -> f64 {
    let (d, bbar) = acceleration_damping(gamma, beta);
    bbar / (1.0 - 2.0 * d * h) - h
}

/// Accelerated gradient descent on stacked `(theta, p)` states with noise
/// on the gradient channel, measured by the momentum-shifted objective gap:
/// constant rate `1 - d h`, overshoot at least `beta / gamma`. The working
/// region fixes the momentum at zero; the state Lipschitz constant is
/// sampled and inflated.
pub fn make_accelerated_gd(problem: &ProblemSpec, h: f64, sigma2: f64) -> Result<AlgoBundle> {
    if problem.gamma <= 0.0 {
        return Err(Error::InvalidInput("acceleration requires gamma > 0".into()));
    }
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::InvalidInput(format!("step {h} outside (0, 1]")));
    }
    if sigma2 < 0.0 {
        return Err(Error::InvalidInput("noise level must be nonnegative".into()));
    }
    let dim = problem.dim();
    let beta = problem.beta;
    let (damping, bbar) = acceleration_damping(problem.gamma, beta);
    let shift = acceleration_shift(problem.gamma, beta, h);
    let tau = 1.0 - damping * h;
    let grad_n = problem.grad_fn();
    let grad_d = problem.grad_fn();
    let momentum_decay = 1.0 - 2.0 * damping * h;
    let update = move |grad: &GradFn, s: &[f64], e: Option<&[f64]>| -> Vec<f64> {
        let (theta, p) = s.split_at(dim);
        let probe: Vec<f64> = theta.iter().zip(p).map(|(t, pi)| t + bbar * pi).collect();
        let mut g = grad(&probe);
        if let Some(e) = e {
            for (gj, ej) in g.iter_mut().zip(e) {
                *gj += ej;
            }
        }
        let p_next: Vec<f64> = p
            .iter()
            .zip(&g)
            .map(|(pi, gi)| momentum_decay * pi - h * gi / beta)
            .collect();
        let theta_next: Vec<f64> =
            theta.iter().zip(&p_next).map(|(t, pn)| t + h * pn).collect();
        theta_next.into_iter().chain(p_next).collect()
    };
    let u1 = update;
    let mut equilibrium = problem.minimizer.clone();
    equilibrium.extend(core::iter::repeat_n(0.0, dim));
    let gain = h / beta * libm::sqrt(1.0 + h * h);
    let system = DynamicalSystem::new(
        2 * dim,
        dim,
        Arc::new(move |_k, s: &[f64]| u1(&grad_n, s, None)),
        Arc::new(move |_k, s: &[f64], e: &[f64]| update(&grad_d, s, Some(e))),
        equilibrium,
        GainSchedule::Constant(gain),
    )?;
    let l_d = problem.l_ell * libm::sqrt(1.0 + shift * shift);
    let l_hd = beta * (1.0 + shift * shift);
    let metric =
        PseudometricSpec::shifted_loss_gap(problem.loss_fn(), shift, dim, l_d, Some(l_hd));
    // Zero-momentum slice of the box region.
    let mut lower = problem.region.lower.clone();
    let mut upper = problem.region.upper.clone();
    lower.extend(core::iter::repeat_n(0.0, dim));
    upper.extend(core::iter::repeat_n(0.0, dim));
    let slice = Region::new(lower, upper)?;
    let starts = probe_starts(&slice, 100, 29);
    let c0_claimed = problem.condition_number();
    let provisional = RateSchedule::constant(tau, 1.0, 1)?;
    let c0_probe = lyapunov::calibrate_overshoot(&system, &metric, &provisional, &starts, 600)?;
    let c0 = c0_claimed.max(c0_probe);
    let probe_schedule = RateSchedule::constant(tau, c0, 1)?;
    let horizon = lyapunov::detect_horizon(&system, &metric, &probe_schedule, &starts, 600)?;
    let schedule = RateSchedule::constant(tau, c0, horizon)?;
    let sample_box = Region::new(
        vecops::sub(system.equilibrium(), &alloc::vec![1.0; 2 * dim]),
        vecops::add(system.equilibrium(), &alloc::vec![1.0; 2 * dim]),
    )?;
    let l_f_sample = system.estimate_lipschitz_state(&sample_box, 2048, 0..1, 41)?;
    let l_f = EMPIRICAL_INFLATION * l_f_sample;
    let l_v = lyapunov::analytic_lipschitz(l_d, l_f, horizon, tau).value;
    let flow_hessian = if problem.kind == ProblemKind::Quadratic {
        Some(0.0)
    } else {
        None
    };
    let sum_hessian = flow_hessian
        .map(|lhphi| lyapunov::hessian_bound_series(&schedule, horizon, l_f, l_d, l_hd, lhphi));
    let constants = CertifiedConstants {
        state_lipschitz: l_f,
        state_lipschitz_empirical: true,
        gain,
        metric_norm_bound: l_d,
        metric_hessian_bound: Some(l_hd),
        flow_hessian_bound: flow_hessian,
        lyapunov_lipschitz: l_v,
        sum_hessian_bound: sum_hessian,
    };
    Ok(AlgoBundle {
        system,
        metric,
        schedule,
        constants,
        region: slice,
        step_size: h,
        sigma2,
        notes: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// Replace-one-record stability experiment
// ---------------------------------------------------------------------------

/// Ridge objective collapsed to `0.5 th' H th - c' th + const` with exact
/// per-record replacement updates.
#[derive(Debug, Clone)]
pub struct RidgeTask {
    pub hessian: SymMatrix,
    pub linear: Vec<f64>,
    pub offset: f64,
    pub n: usize,
    pub mu: f64,
}

impl RidgeTask {
    pub fn build(dataset: &Dataset, mu: f64) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::InvalidInput("dataset must be nonempty".into()));
        }
        let n = dataset.len();
        let dim = dataset.features[0].len();
        let mut hessian = SymMatrix::zeros(dim);
        let mut linear = alloc::vec![0.0; dim];
        let mut offset = 0.0;
        for (x, y) in dataset.features.iter().zip(&dataset.labels) {
            hessian.add_outer(x, 1.0 / n as f64);
            for (lj, xj) in linear.iter_mut().zip(x) {
                *lj += y * xj / n as f64;
            }
            offset += 0.5 * y * y / n as f64;
        }
        hessian.add_diag(mu);
        Ok(Self {
            hessian,
            linear,
            offset,
            n,
            mu,
        })
    }

    /// Swap record `index` for `(new_x, new_y)`.
    pub fn replace(&self, dataset: &Dataset, index: usize, new_x: &[f64], new_y: f64) -> Self {
        let n = self.n as f64;
        let mut out = self.clone();
        let old_x = &dataset.features[index];
        let old_y = dataset.labels[index];
        out.hessian.add_outer(new_x, 1.0 / n);
        out.hessian.add_outer(old_x, -1.0 / n);
        for j in 0..out.linear.len() {
            out.linear[j] += (new_y * new_x[j] - old_y * old_x[j]) / n;
        }
        out.offset += 0.5 * (new_y * new_y - old_y * old_y) / n;
        out
    }

    pub fn loss(&self, th: &[f64]) -> f64 {
        0.5 * vecops::dot(&self.hessian.matvec(th), th) - vecops::dot(&self.linear, th)
            + self.offset
    }

    pub fn grad(&self, th: &[f64]) -> Vec<f64> {
        vecops::sub(&self.hessian.matvec(th), &self.linear)
    }

    pub fn minimizer(&self) -> Result<Vec<f64>> {
        linalg::solve(&self.hessian, &self.linear)
    }

    /// Run descent for `iters` steps from the origin.
    pub fn descend(&self, h: f64, iters: usize) -> Vec<f64> {
        let mut th = alloc::vec![0.0; self.linear.len()];
        for _ in 0..iters {
            th = vecops::axpy(&th, -h, &self.grad(&th));
        }
        th
    }
}

/// Per-record loss `0.5 (x' th - y)^2 + 0.5 mu |th|^2`.
pub fn record_loss(x: &[f64], y: f64, mu: f64, th: &[f64]) -> f64 {
    let r = vecops::dot(x, th) - y;
    0.5 * r * r + 0.5 * mu * vecops::dot(th, th)
}

/// Synthetic ridge data: clipped Gaussian features, bounded labels from a
/// fixed seeded regressor plus noise.
pub fn synthetic_ridge_dataset(
    n: usize,
    dim: usize,
    seed: u64,
    feature_clip: f64,
    label_clip: f64,
) -> Dataset {
    let rng = CounterRng::new(seed, stream::DATASET);
    let weights: Vec<f64> = (0..dim).map(|j| rng.gaussian(u64::MAX, j as u64)).collect();
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let mut x: Vec<f64> = (0..dim).map(|j| rng.gaussian(i as u64, j as u64)).collect();
        let norm = Norm::L2.eval(&x);
        if norm > feature_clip {
            for v in x.iter_mut() {
                *v *= feature_clip / norm;
            }
        }
        let mut y = vecops::dot(&weights, &x) + 0.1 * rng.gaussian(i as u64, (dim + 7) as u64);
        y = y.clamp(-label_clip, label_clip);
        features.push(x);
        labels.push(y);
    }
    Dataset { features, labels }
}

/// Step-size policies for the stability experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepPolicy {
    /// `2 / (beta + gamma)`.
    Optimal,
    Fixed(f64),
    /// Horizon-tuned `(beta + gamma) / (2 gamma beta) * log(N) / N`.
    HorizonTuned { n_total: usize },
}

/// Configuration of a replace-one-record run.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityConfig {
    pub n_records: usize,
    pub dim: usize,
    pub mu: f64,
    pub feature_clip: f64,
    pub label_clip: f64,
    pub n_draws: usize,
    pub iters: usize,
    pub step: StepPolicy,
    /// Slack factor in the adjusted rate `(beta - delta gamma) / (beta + gamma)`.
    pub slack_delta: f64,
    pub seed: u64,
}

impl StabilityConfig {
    pub fn desk_scale(n_records: usize, seed: u64) -> Self {
        Self {
            n_records,
            dim: 5,
            mu: 0.3,
            feature_clip: 2.0,
            label_clip: 3.0,
            n_draws: 100,
            iters: 200,
            step: StepPolicy::Optimal,
            slack_delta: 0.5,
            seed,
        }
    }
}

/// Outcome of the stability experiment: the held-out sensitivity estimate
/// against its certified cap.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityOutcome {
    /// Mean over replaced-record draws of the max held-out loss difference.
    pub estimate: f64,
    pub max_estimate: f64,
    /// `2 L_V L_ell^2 / (gamma n)`.
    pub bound: f64,
    pub gamma: f64,
    pub beta: f64,
    pub l_ell: f64,
    pub lyapunov_lipschitz: f64,
    pub mean_parameter_gap: f64,
}

/// Train on a dataset and on neighbors differing in one record, then
/// measure how far the held-out losses move. Record draws are seeded and
/// independent of evaluation order.
pub fn run_stability_experiment(config: &StabilityConfig) -> Result<StabilityOutcome> {
    if config.n_records < 2 {
        return Err(Error::InvalidInput("need at least 2 records".into()));
    }
    if config.n_draws == 0 {
        return Err(Error::InvalidInput("need at least 1 draw".into()));
    }
    let dataset = synthetic_ridge_dataset(
        config.n_records,
        config.dim,
        config.seed,
        config.feature_clip,
        config.label_clip,
    );
    let task = RidgeTask::build(&dataset, config.mu)?;
    let eigs = task.hessian.eigenvalues();
    let (gamma, beta) = (eigs[0], eigs[config.dim - 1]);
    let h = match config.step {
        StepPolicy::Optimal => 2.0 / (beta + gamma),
        StepPolicy::Fixed(h) => h,
        StepPolicy::HorizonTuned { n_total } => horizon_tuned_step(gamma, beta, n_total),
    };
    if !(h > 0.0 && h <= 2.0 / (beta + gamma)) {
        return Err(Error::InvalidInput(
            "step size outside the contractive range".into(),
        ));
    }
    let base_theta = task.descend(h, config.iters);

    // Reach bound for the gradient constant: descent from the origin stays
    // within twice the minimizer ball.
    let minimizer = task.minimizer()?;
    let reach = 2.0 * Norm::L2.eval(&minimizer) + 1.0;
    let per_record = config.feature_clip * (config.feature_clip * reach + config.label_clip)
        + config.mu * reach;
    let l_ell = 2.0 * per_record;

    let tau = (beta - gamma) / (beta + gamma);
    let tau_slack = (beta - config.slack_delta * gamma) / (beta + gamma);
    let l_v = if tau == 0.0 { 1.0 } else { tau / tau_slack };
    let bound = 2.0 * l_v * l_ell * l_ell / (gamma * config.n_records as f64);

    // Held-out pool from an independent stream.
    let test_pool = synthetic_ridge_dataset(
        16,
        config.dim,
        config.seed ^ 0x7e57,
        config.feature_clip,
        config.label_clip,
    );
    let replacement_rng = CounterRng::new(config.seed ^ 0x0d9a, stream::DATASET);
    let mut total = 0.0;
    let mut max_estimate = 0.0_f64;
    let mut total_param_gap = 0.0;
    for draw in 0..config.n_draws {
        let index =
            (replacement_rng.uniform(draw as u64, 0) * config.n_records as f64) as usize;
        let index = index.min(config.n_records - 1);
        let fresh = synthetic_ridge_dataset(
            1,
            config.dim,
            config.seed ^ (0x5a5a + draw as u64),
            config.feature_clip,
            config.label_clip,
        );
        let neighbor = task.replace(&dataset, index, &fresh.features[0], fresh.labels[0]);
        let neighbor_theta = neighbor.descend(h, config.iters);
        let mut worst = 0.0_f64;
        for (x, y) in test_pool.features.iter().zip(&test_pool.labels) {
            let gap = (record_loss(x, *y, config.mu, &neighbor_theta)
                - record_loss(x, *y, config.mu, &base_theta))
            .abs();
            worst = worst.max(gap);
        }
        total += worst;
        max_estimate = max_estimate.max(worst);
        total_param_gap += Norm::L2.dist(&neighbor_theta, &base_theta);
    }
    Ok(StabilityOutcome {
        estimate: total / config.n_draws as f64,
        max_estimate,
        bound,
        gamma,
        beta,
        l_ell,
        lyapunov_lipschitz: l_v,
        mean_parameter_gap: total_param_gap / config.n_draws as f64,
    })
}

/// Stability cap series for diminishing steps on a merely convex problem:
/// `(L_V L_ell^2 / n) * sum_{j <= k} h_j` per step.
pub fn stability_bound_convex_series(l_v: f64, l_ell: f64, n: usize, steps: &[f64]) -> Vec<f64> {
    let scale = l_v * l_ell * l_ell / n as f64;
    let mut acc = 0.0;
    steps
        .iter()
        .map(|h| {
            acc += h;
            scale * acc
        })
        .collect()
}
