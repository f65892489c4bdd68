//! Where does the implicit momentum half-step work?
//!
//! For a start point `θ₀` and a momentum `p₀ ~ N(0, G(θ₀))` the half-step
//! solves `p = p₀ − ε/2 ∇θH(θ₀, p)`. Two questions are asked independently:
//!
//! 1. does a solution exist at all (multi-start damped Newton), and
//! 2. does fixed-point iteration find it, with the iteration map's Jacobian
//!    norm at the solution no larger than the contraction threshold?
//!
//! [`stability_map`] estimates both probabilities on a grid of start points.
//! Every cell draws from its own stream derived from the root seed and the
//! cell index, so the map is identical whether cells run serially or in
//! parallel.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrators::{Existence, IntegratorConfig, MomentumEquation};
use crate::model::RiemannianTarget;
use crate::roots::ExistenceVerdict;
use crate::smallmat::{inf_norm, sub};
use crate::streams::{self, Purpose};

/// Agreement required between a converged fixed-point iteration and the
/// Newton root it should coincide with.
pub const SOLVER_AGREEMENT_TOL: f64 = 1e-6;

/// Damped-Newton existence check for the momentum half-step at `(θ₀, p₀)`.
pub fn newton_existence_oracle<T: RiemannianTarget<D>, const D: usize>(
    target: &T,
    theta0: &[f64; D],
    p0: &[f64; D],
    epsilon: f64,
) -> Result<ExistenceVerdict<D>> {
    let bundle = target.metric(theta0)?;
    let grad = target.grad_log_density(theta0);
    Ok(MomentumEquation::new(&bundle, &grad, *p0, epsilon).newton_existence())
}

/// Outcome of [`classify_half_step`].
#[derive(Clone, Debug, PartialEq)]
pub struct HalfStepClass<const D: usize> {
    pub exists: Existence,
    pub fpi_converged: bool,
    pub fpi_iterations: usize,
    pub fpi_result: [f64; D],
    /// Jacobian norm of the iteration map, at the Newton root nearest the
    /// last iterate when one was found, otherwise at the last iterate.
    pub contraction: f64,
    /// Converged and `contraction ≤ threshold`.
    pub convergent: bool,
    pub newton: ExistenceVerdict<D>,
}

impl<const D: usize> HalfStepClass<D> {
    /// A converged iteration must be matched by a Newton root within
    /// [`SOLVER_AGREEMENT_TOL`] (relative to the root's scale).
    pub fn solvers_agree(&self) -> bool {
        if !self.fpi_converged {
            return true;
        }
        match self.newton.root_nearest(&self.fpi_result) {
            Some(root) => inf_norm(&sub(&root, &self.fpi_result)) <= SOLVER_AGREEMENT_TOL * (1.0 + inf_norm(&root)),
            None => false,
        }
    }
}

pub fn classify_half_step<T: RiemannianTarget<D>, const D: usize>(
    target: &T,
    theta0: &[f64; D],
    p0: &[f64; D],
    config: &IntegratorConfig,
) -> Result<HalfStepClass<D>> {
    config.validate()?;
    let bundle = target.metric(theta0)?;
    let grad = target.grad_log_density(theta0);
    Ok(classify_equation(&MomentumEquation::new(&bundle, &grad, *p0, config.epsilon), config))
}

fn classify_equation<const D: usize>(eq: &MomentumEquation<'_, D>, config: &IntegratorConfig) -> HalfStepClass<D> {
    let run = eq.fixed_point(config);
    let newton = eq.newton_existence();
    let at = newton.root_nearest(&run.result).unwrap_or(run.result);
    let contraction = eq.contraction(&at);
    HalfStepClass {
        exists: newton.existence,
        fpi_converged: run.converged,
        fpi_iterations: run.iterations,
        fpi_result: run.result,
        contraction,
        convergent: run.converged && contraction <= config.contraction_threshold,
        newton,
    }
}

/// `lo:hi:n`: `n` equal cells over `[lo, hi]`, evaluated at their centers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisRange {
    pub lo: f64,
    pub hi: f64,
    pub n_cells: usize,
}

impl AxisRange {
    pub fn new(lo: f64, hi: f64, n_cells: usize) -> Self {
        AxisRange { lo, hi, n_cells }
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * (self.hi - self.lo) / self.n_cells as f64
    }

    fn validate(&self, axis: &str) -> Result<()> {
        if !(self.lo < self.hi) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::InvalidConfig(format!("{axis}: need lo < hi, got {}..{}", self.lo, self.hi)));
        }
        if self.n_cells == 0 {
            return Err(Error::InvalidConfig(format!("{axis}: need at least one cell")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityGridConfig {
    pub theta1: AxisRange,
    pub theta2: AxisRange,
    /// Momentum draws per cell (`M`).
    pub samples_per_cell: usize,
    /// Step size, fixed-point limits and contraction threshold.
    pub integrator: IntegratorConfig,
    pub seed: u64,
    /// Worker threads; `1` runs serially, `0` uses the global pool.
    pub threads: usize,
}

impl Default for StabilityGridConfig {
    /// `[−2, 2]²` with 81×81 cells and 200 draws per cell.
    fn default() -> Self {
        StabilityGridConfig {
            theta1: AxisRange::new(-2.0, 2.0, 81),
            theta2: AxisRange::new(-2.0, 2.0, 81),
            samples_per_cell: 200,
            integrator: IntegratorConfig::default(),
            seed: 0,
            threads: 0,
        }
    }
}

impl StabilityGridConfig {
    pub fn validate(&self) -> Result<()> {
        self.theta1.validate("theta1")?;
        self.theta2.validate("theta2")?;
        if self.samples_per_cell == 0 {
            return Err(Error::InvalidConfig("samples_per_cell must be at least 1".into()));
        }
        self.integrator.validate()
    }

    pub fn n_cells(&self) -> usize {
        self.theta1.n_cells * self.theta2.n_cells
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityCell {
    pub theta_center: [f64; 2],
    /// Fraction of draws where the Newton oracle found a fixed point.
    pub p_exists: f64,
    /// Fraction of draws where the iteration converged with a small enough
    /// Jacobian norm.
    pub p_converges: f64,
    /// Mean contraction over draws where it is finite (NaN if none).
    pub mean_contraction: f64,
    /// Draws the oracle could not decide.
    pub unresolved: usize,
    pub samples: usize,
    /// Converged iterations without a matching Newton root.
    pub solver_mismatches: usize,
}

impl StabilityCell {
    /// Binomial standard error of `p_converges`.
    pub fn converges_std_error(&self) -> f64 {
        let p = self.p_converges;
        (p * (1.0 - p) / self.samples as f64).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityMap {
    pub config: StabilityGridConfig,
    /// Row major in `θ₁`: index `i1 * n2 + i2`.
    pub cells: Vec<StabilityCell>,
}

impl StabilityMap {
    pub fn cell(&self, i1: usize, i2: usize) -> &StabilityCell {
        &self.cells[i1 * self.config.theta2.n_cells + i2]
    }
}

fn compute_cell<T: RiemannianTarget<2>>(target: &T, config: &StabilityGridConfig, index: usize) -> Result<StabilityCell> {
    let n2 = config.theta2.n_cells;
    let theta = [config.theta1.center(index / n2), config.theta2.center(index % n2)];
    let bundle = target.metric(&theta)?;
    let grad = target.grad_log_density(&theta);
    let mut rng = streams::stream(config.seed, Purpose::Cell(index as u64));
    let m = config.samples_per_cell;
    let (mut exists, mut converges, mut unresolved, mut mismatches) = (0usize, 0usize, 0usize, 0usize);
    let (mut contraction_sum, mut contraction_count) = (0.0, 0usize);
    for _ in 0..m {
        let p0 = bundle.chol.sample_gaussian(&mut rng);
        let c = classify_equation(&MomentumEquation::new(&bundle, &grad, p0, config.integrator.epsilon), &config.integrator);
        match c.exists {
            Existence::Yes => exists += 1,
            Existence::Unknown => unresolved += 1,
            Existence::No => {}
        }
        if c.convergent {
            converges += 1;
        }
        if !c.solvers_agree() {
            mismatches += 1;
        }
        if c.contraction.is_finite() {
            contraction_sum += c.contraction;
            contraction_count += 1;
        }
    }
    Ok(StabilityCell {
        theta_center: theta,
        p_exists: exists as f64 / m as f64,
        p_converges: converges as f64 / m as f64,
        mean_contraction: if contraction_count > 0 {
            contraction_sum / contraction_count as f64
        } else {
            f64::NAN
        },
        unresolved,
        samples: m,
        solver_mismatches: mismatches,
    })
}

/// Monte Carlo stability map over start points `θ(0)`.
pub fn stability_map<T>(target: &T, config: &StabilityGridConfig) -> Result<StabilityMap>
where
    T: RiemannianTarget<2> + Sync,
{
    config.validate()?;
    let n = config.n_cells();
    let cells: Result<Vec<StabilityCell>> = match config.threads {
        1 => (0..n).map(|i| compute_cell(target, config, i)).collect(),
        0 => (0..n).into_par_iter().map(|i| compute_cell(target, config, i)).collect(),
        threads => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            pool.install(|| (0..n).into_par_iter().map(|i| compute_cell(target, config, i)).collect())
        }
    };
    Ok(StabilityMap {
        config: *config,
        cells: cells?,
    })
}
