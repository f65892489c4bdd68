//! MCMC transition kernels and chain driver.
//!
//! Three kernels share one driver:
//!
//! * `hmc`: identity mass, standard leapfrog;
//! * `rmhmc`: momentum drawn from `N(0, G(θ))`, generalized leapfrog;
//! * `fim_rwmh`: random walk with proposal covariance `s² G(θ)⁻¹` and the
//!   full Metropolis–Hastings ratio (the proposal is not symmetric because
//!   `G` moves with the state).
//!
//! Randomness comes from [`ChainStreams`]: one root seed split into separate
//! momentum, acceptance and proposal streams.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::diagnostics::Estimate;
use crate::error::{Error, Result};
use crate::integrators::{generalized_trajectory, standard_trajectory, IntegratorConfig, PhaseState, TrajectoryPoint};
use crate::model::{RiemannianTarget, Target};
use crate::smallmat::{axpy, dot, standard_normal_vec};
use crate::streams::{self, Purpose};

/// Per-step `|ΔH|` above which a step is flagged as a Hamiltonian jump.
pub const H_JUMP_THRESHOLD: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kernel {
    Hmc,
    Rmhmc,
    FimRwmh,
}

impl Kernel {
    pub const ALL: [Kernel; 3] = [Kernel::Hmc, Kernel::Rmhmc, Kernel::FimRwmh];

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Hmc => "hmc",
            Kernel::Rmhmc => "rmhmc",
            Kernel::FimRwmh => "fim_rwmh",
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hmc" => Ok(Kernel::Hmc),
            "rmhmc" => Ok(Kernel::Rmhmc),
            "fim_rwmh" | "fim-rwmh" => Ok(Kernel::FimRwmh),
            other => Err(Error::InvalidConfig(format!("unknown kernel '{other}'"))),
        }
    }
}

/// Independent random streams of one chain.
#[derive(Clone, Debug)]
pub struct ChainStreams {
    pub momentum: ChaCha20Rng,
    pub accept: ChaCha20Rng,
    pub proposal: ChaCha20Rng,
}

impl ChainStreams {
    pub fn new(seed: u64) -> Self {
        ChainStreams {
            momentum: streams::stream(seed, Purpose::Momentum),
            accept: streams::stream(seed, Purpose::Accept),
            proposal: streams::stream(seed, Purpose::Proposal),
        }
    }

    /// Metropolis–Hastings decision. One uniform is consumed per call so the
    /// stream stays aligned across kernels and outcomes.
    fn accept(&mut self, log_ratio: f64) -> bool {
        let u: f64 = self.accept.random();
        !log_ratio.is_nan() && u.ln() < log_ratio
    }
}

/// What happened in one transition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransitionRecord {
    pub accepted: bool,
    /// `log` of the Metropolis–Hastings ratio; for the Hamiltonian kernels
    /// this is `H(start) − H(end)`, i.e. `−ΔH`.
    pub log_accept_ratio: f64,
    /// Leapfrog steps whose fixed-point solves did not converge.
    pub fpi_divergences: usize,
    /// Some step changed `H` by more than [`H_JUMP_THRESHOLD`].
    pub h_jump: bool,
}

impl TransitionRecord {
    pub fn delta_h(&self) -> f64 {
        -self.log_accept_ratio
    }
}

/// A transition together with the trajectory it integrated (empty for the
/// random-walk kernel).
#[derive(Clone, Debug, PartialEq)]
pub struct Transition<const D: usize> {
    pub next: [f64; D],
    pub record: TransitionRecord,
    pub path: Vec<TrajectoryPoint<D>>,
}

fn finish_hamiltonian<const D: usize>(
    current: &[f64; D],
    path: Vec<TrajectoryPoint<D>>,
    n_leapfrog: usize,
    streams: &mut ChainStreams,
) -> Transition<D> {
    let start_h = path[0].hamiltonian;
    let end = path.last().expect("trajectory always holds its start");
    let complete = path.len() == n_leapfrog + 1 && end.state.is_finite() && end.hamiltonian.is_finite();
    let log_ratio = if complete {
        start_h - end.hamiltonian
    } else {
        f64::NEG_INFINITY
    };
    let fpi_divergences = path.iter().filter(|pt| pt.fpi_diverged()).count();
    let h_jump = path
        .iter()
        .skip(1)
        .any(|pt| !(pt.delta_h.abs() <= H_JUMP_THRESHOLD));
    let accepted = streams.accept(log_ratio);
    let next = if accepted { end.state.theta } else { *current };
    Transition {
        next,
        record: TransitionRecord {
            accepted,
            log_accept_ratio: log_ratio,
            fpi_divergences,
            h_jump,
        },
        path,
    }
}

/// RMHMC proposal with its trajectory.
pub fn rmhmc_step<T: RiemannianTarget<D>, const D: usize>(
    target: &T,
    current: &[f64; D],
    config: &IntegratorConfig,
    streams: &mut ChainStreams,
) -> Result<Transition<D>> {
    let bundle = target.metric(current)?;
    let p = bundle.chol.sample_gaussian(&mut streams.momentum);
    let path = generalized_trajectory(target, &PhaseState::new(*current, p), config)?;
    Ok(finish_hamiltonian(current, path, config.n_leapfrog, streams))
}

/// HMC proposal with its trajectory.
pub fn hmc_step<T: Target<D>, const D: usize>(
    target: &T,
    current: &[f64; D],
    config: &IntegratorConfig,
    streams: &mut ChainStreams,
) -> Transition<D> {
    let p = standard_normal_vec::<D, _>(&mut streams.momentum);
    let path = standard_trajectory(target, &PhaseState::new(*current, p), config);
    finish_hamiltonian(current, path, config.n_leapfrog, streams)
}

pub fn rmhmc_transition<T: RiemannianTarget<D>, const D: usize>(
    target: &T,
    current: &[f64; D],
    config: &IntegratorConfig,
    streams: &mut ChainStreams,
) -> Result<([f64; D], TransitionRecord)> {
    rmhmc_step(target, current, config, streams).map(|t| (t.next, t.record))
}

pub fn hmc_transition<T: Target<D>, const D: usize>(
    target: &T,
    current: &[f64; D],
    config: &IntegratorConfig,
    streams: &mut ChainStreams,
) -> ([f64; D], TransitionRecord) {
    let t = hmc_step(target, current, config, streams);
    (t.next, t.record)
}

/// Random-walk Metropolis–Hastings with proposal `N(θ, s² G(θ)⁻¹)`.
pub fn fim_rwmh_transition<T: RiemannianTarget<D>, const D: usize>(
    target: &T,
    current: &[f64; D],
    scale: f64,
    streams: &mut ChainStreams,
) -> Result<([f64; D], TransitionRecord)> {
    let here = target.metric(current)?;
    let z = standard_normal_vec::<D, _>(&mut streams.proposal);
    // w ~ N(0, G⁻¹) and θ' = θ + s·w, so δᵀG(θ)δ/s² = zᵀz.
    let w = here.chol.backward(&z);
    let proposal = axpy(current, scale, &w);
    let log_ratio = match target.metric(&proposal) {
        Ok(there) => {
            // log q(θ'|θ) − log q(θ|θ'); the −D log s terms cancel.
            let forward = 0.5 * here.log_det - 0.5 * dot(&z, &z);
            let backward = 0.5 * there.log_det - 0.5 * there.g.quad_form(&w);
            target.log_density(&proposal) - target.log_density(current) + backward - forward
        }
        Err(_) => f64::NEG_INFINITY,
    };
    let accepted = streams.accept(log_ratio);
    let next = if accepted { proposal } else { *current };
    Ok((
        next,
        TransitionRecord {
            accepted,
            log_accept_ratio: log_ratio,
            fpi_divergences: 0,
            h_jump: false,
        },
    ))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainConfig<const D: usize> {
    pub n_iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub integrator: IntegratorConfig,
    pub kernel: Kernel,
    pub init: [f64; D],
    /// Proposal scale `s` of the random-walk kernel.
    pub rwmh_scale: f64,
}

impl<const D: usize> ChainConfig<D> {
    /// 5000 iterations, 500 burn-in, default integrator, `s = 2.38/√D`.
    pub fn new(kernel: Kernel, init: [f64; D]) -> Self {
        ChainConfig {
            n_iterations: 5000,
            burn_in: 500,
            seed: 0,
            integrator: IntegratorConfig::default(),
            kernel,
            init,
            rwmh_scale: 2.38 / (D as f64).sqrt(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_iterations(mut self, n_iterations: usize, burn_in: usize) -> Self {
        self.n_iterations = n_iterations;
        self.burn_in = burn_in;
        self
    }

    pub fn with_integrator(mut self, integrator: IntegratorConfig) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.n_iterations {
            return Err(Error::InvalidConfig(format!(
                "burn_in ({}) must be below n_iterations ({})",
                self.burn_in, self.n_iterations
            )));
        }
        if !self.init.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidConfig("initial position must be finite".into()));
        }
        match self.kernel {
            Kernel::Hmc | Kernel::Rmhmc => {
                self.integrator.validate()?;
                if !(self.integrator.epsilon > 0.0) {
                    return Err(Error::InvalidConfig("epsilon must be positive".into()));
                }
                if self.integrator.n_leapfrog == 0 {
                    return Err(Error::InvalidConfig("n_leapfrog must be at least 1".into()));
                }
            }
            Kernel::FimRwmh => {
                if !(self.rwmh_scale >= 0.0 && self.rwmh_scale.is_finite()) {
                    return Err(Error::InvalidConfig(format!("invalid rwmh scale {}", self.rwmh_scale)));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ChainOutput<const D: usize> {
    /// Post burn-in states.
    pub samples: Vec<[f64; D]>,
    /// Accepted fraction of post burn-in transitions.
    pub accept_rate: f64,
    /// One record per iteration, burn-in included.
    pub records: Vec<TransitionRecord>,
    pub burn_in: usize,
    pub elapsed: Duration,
}

impl<const D: usize> ChainOutput<D> {
    pub fn retained_records(&self) -> &[TransitionRecord] {
        &self.records[self.burn_in..]
    }

    pub fn fpi_divergences(&self) -> usize {
        self.records.iter().map(|r| r.fpi_divergences).sum()
    }

    /// Equality of everything except wall-clock timing.
    pub fn same_draws(&self, other: &Self) -> bool {
        self.samples == other.samples
            && self.records == other.records
            && self.accept_rate == other.accept_rate
            && self.burn_in == other.burn_in
    }
}

/// One transition of the selected kernel.
pub fn transition<T: RiemannianTarget<D>, const D: usize>(
    target: &T,
    current: &[f64; D],
    config: &ChainConfig<D>,
    streams: &mut ChainStreams,
) -> Result<([f64; D], TransitionRecord)> {
    match config.kernel {
        Kernel::Hmc => Ok(hmc_transition(target, current, &config.integrator, streams)),
        Kernel::Rmhmc => rmhmc_transition(target, current, &config.integrator, streams),
        Kernel::FimRwmh => fim_rwmh_transition(target, current, config.rwmh_scale, streams),
    }
}

pub fn run_chain<T: RiemannianTarget<D>, const D: usize>(target: &T, config: &ChainConfig<D>) -> Result<ChainOutput<D>> {
    config.validate()?;
    let started = Instant::now();
    let mut streams = ChainStreams::new(config.seed);
    let mut current = config.init;
    let mut samples = Vec::with_capacity(config.n_iterations - config.burn_in);
    let mut records = Vec::with_capacity(config.n_iterations);
    for it in 0..config.n_iterations {
        let (next, record) = transition(target, &current, config, &mut streams)?;
        current = next;
        records.push(record);
        if it >= config.burn_in {
            samples.push(current);
        }
    }
    let retained = &records[config.burn_in..];
    let accepted = retained.iter().filter(|r| r.accepted).count();
    Ok(ChainOutput {
        samples,
        accept_rate: accepted as f64 / retained.len() as f64,
        records,
        burn_in: config.burn_in,
        elapsed: started.elapsed(),
    })
}

/// Runs independent chains in parallel; output order follows `configs`.
pub fn run_chains<T, const D: usize>(target: &T, configs: &[ChainConfig<D>]) -> Vec<Result<ChainOutput<D>>>
where
    T: RiemannianTarget<D> + Sync,
{
    configs.par_iter().map(|c| run_chain(target, c)).collect()
}

/// Chain estimates of the warped-Gaussian summaries the quadrature oracle
/// also computes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PosteriorSummary {
    pub mean_theta1: Estimate,
    pub mean_theta2_sq: Estimate,
    /// `E[θ₁ + θ₂²]`.
    pub mean_ridge: Estimate,
    pub prob_theta2_pos: Estimate,
}

/// `1` above zero, `½` at zero, `0` below.
pub fn heaviside(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x == 0.0 {
        0.5
    } else {
        0.0
    }
}

pub fn summarize(samples: &[[f64; 2]]) -> PosteriorSummary {
    let col = |f: &dyn Fn(&[f64; 2]) -> f64| -> Vec<f64> { samples.iter().map(f).collect() };
    PosteriorSummary {
        mean_theta1: Estimate::from_draws(&col(&|t| t[0])),
        mean_theta2_sq: Estimate::from_draws(&col(&|t| t[1] * t[1])),
        mean_ridge: Estimate::from_draws(&col(&|t| t[0] + t[1] * t[1])),
        prob_theta2_pos: Estimate::from_draws(&col(&|t| heaviside(t[1]))),
    }
}
