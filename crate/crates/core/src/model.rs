//! Targets: the traits the dynamics consume, and the warped Gaussian model.
//!
//! The warped Gaussian observes `y₁..yₙ ~ N(θ₁ + θ₂², σ_y²)` under the prior
//! `θ₁, θ₂ ~ N(0, σ_θ²)`. Only `θ₁ + θ₂²` is identified by the likelihood, so
//! the posterior concentrates on the ridge `θ₁ + θ₂² ≈ ȳ`. Log densities are
//! unnormalized.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::smallmat::{cholesky, Cholesky, SymMatrix};
use crate::streams::{self, Purpose};

/// A differentiable log density on `R^D`.
pub trait Target<const D: usize> {
    fn log_density(&self, theta: &[f64; D]) -> f64;
    fn grad_log_density(&self, theta: &[f64; D]) -> [f64; D];

    fn dim(&self) -> usize {
        D
    }
}

/// A target that also supplies a position-dependent metric `G(θ)`.
pub trait RiemannianTarget<const D: usize>: Target<D> {
    fn metric(&self, theta: &[f64; D]) -> Result<MetricBundle<D>>;
}

/// The metric at one point with everything the dynamics need from it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricBundle<const D: usize> {
    pub g: SymMatrix<D>,
    pub chol: Cholesky<D>,
    pub g_inv: SymMatrix<D>,
    pub log_det: f64,
    /// `d_g[i] = ∂G/∂θᵢ`.
    pub d_g: [SymMatrix<D>; D],
}

impl<const D: usize> MetricBundle<D> {
    pub fn new(g: SymMatrix<D>, d_g: [SymMatrix<D>; D]) -> Result<Self> {
        let chol = cholesky(&g)?;
        Ok(MetricBundle {
            g,
            chol,
            g_inv: chol.inverse(),
            log_det: chol.log_det(),
            d_g,
        })
    }

    pub fn constant(g: SymMatrix<D>) -> Result<Self> {
        Self::new(g, [SymMatrix::zeros(); D])
    }
}

/// Wraps any [`Target`] with the identity metric, which turns the
/// generalized leapfrog into the standard one.
#[derive(Clone, Debug)]
pub struct IdentityMetric<T>(pub T);

impl<T: Target<D>, const D: usize> Target<D> for IdentityMetric<T> {
    fn log_density(&self, theta: &[f64; D]) -> f64 {
        self.0.log_density(theta)
    }

    fn grad_log_density(&self, theta: &[f64; D]) -> [f64; D] {
        self.0.grad_log_density(theta)
    }
}

impl<T: Target<D>, const D: usize> RiemannianTarget<D> for IdentityMetric<T> {
    fn metric(&self, _theta: &[f64; D]) -> Result<MetricBundle<D>> {
        MetricBundle::constant(SymMatrix::identity())
    }
}

/// Model size and scales, without data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelHyper {
    pub n: usize,
    pub sigma_y: f64,
    pub sigma_theta: f64,
}

impl ModelHyper {
    pub fn new(n: usize, sigma_y: f64, sigma_theta: f64) -> Self {
        ModelHyper {
            n,
            sigma_y,
            sigma_theta,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidModel("n must be at least 1".into()));
        }
        if !(self.sigma_y > 0.0 && self.sigma_y.is_finite()) {
            return Err(Error::InvalidModel(format!("sigma_y must be positive, got {}", self.sigma_y)));
        }
        if !(self.sigma_theta > 0.0 && self.sigma_theta.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "sigma_theta must be positive, got {}",
                self.sigma_theta
            )));
        }
        Ok(())
    }
}

/// Warped bivariate Gaussian posterior, stored through the data's
/// sufficient statistics `(n, Σy, Σy²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WarpedGaussian {
    n: usize,
    sigma_y: f64,
    sigma_theta: f64,
    sum_y: f64,
    sum_y_sq: f64,
    // Σ(y - ȳ)², kept separately so the likelihood avoids cancellation.
    scatter: f64,
    mean_y: f64,
}

impl WarpedGaussian {
    pub fn new(hyper: ModelHyper, sum_y: f64, sum_y_sq: f64) -> Result<Self> {
        hyper.validate()?;
        if !sum_y.is_finite() || !sum_y_sq.is_finite() {
            return Err(Error::InvalidModel("sufficient statistics must be finite".into()));
        }
        let n = hyper.n as f64;
        let mean_y = sum_y / n;
        let scatter = sum_y_sq - sum_y * mean_y;
        // Cauchy–Schwarz, up to rounding in the accumulated sums.
        if scatter < -1e-12 * sum_y_sq.abs().max(1.0) {
            return Err(Error::InvalidModel(format!(
                "sum_y_sq = {sum_y_sq} is below sum_y^2 / n = {}",
                sum_y * mean_y
            )));
        }
        Ok(WarpedGaussian {
            n: hyper.n,
            sigma_y: hyper.sigma_y,
            sigma_theta: hyper.sigma_theta,
            sum_y,
            sum_y_sq,
            scatter: scatter.max(0.0),
            mean_y,
        })
    }

    pub fn from_observations(hyper: ModelHyper, ys: &[f64]) -> Result<Self> {
        if ys.len() != hyper.n {
            return Err(Error::InvalidModel(format!(
                "expected {} observations, got {}",
                hyper.n,
                ys.len()
            )));
        }
        let sum_y = ys.iter().sum();
        let sum_y_sq = ys.iter().map(|y| y * y).sum();
        Self::new(hyper, sum_y, sum_y_sq)
    }

    /// The prior alone (`n = 0`). Only meaningful as a reference density;
    /// regular models require at least one observation.
    pub fn prior_only(sigma_theta: f64) -> Result<Self> {
        ModelHyper::new(1, 1.0, sigma_theta).validate()?;
        Ok(WarpedGaussian {
            n: 0,
            sigma_y: 1.0,
            sigma_theta,
            sum_y: 0.0,
            sum_y_sq: 0.0,
            scatter: 0.0,
            mean_y: 0.0,
        })
    }

    /// Draws `n` observations from `N(θ₁ + θ₂², σ_y²)` on the data stream of
    /// `seed`.
    pub fn simulate_observations(hyper: ModelHyper, true_theta: &[f64; 2], seed: u64) -> Result<Vec<f64>> {
        hyper.validate()?;
        let mean = true_theta[0] + true_theta[1] * true_theta[1];
        let mut rng = streams::stream(seed, Purpose::Data);
        Ok((0..hyper.n)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                mean + hyper.sigma_y * z
            })
            .collect())
    }

    pub fn simulate(hyper: ModelHyper, true_theta: &[f64; 2], seed: u64) -> Result<Self> {
        let ys = Self::simulate_observations(hyper, true_theta, seed)?;
        Self::from_observations(hyper, &ys)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sigma_y(&self) -> f64 {
        self.sigma_y
    }

    pub fn sigma_theta(&self) -> f64 {
        self.sigma_theta
    }

    pub fn sum_y(&self) -> f64 {
        self.sum_y
    }

    pub fn sum_y_sq(&self) -> f64 {
        self.sum_y_sq
    }

    pub fn hyper(&self) -> ModelHyper {
        ModelHyper::new(self.n, self.sigma_y, self.sigma_theta)
    }

    /// Sample mean of the observations (0 for the prior-only model).
    pub fn mean_y(&self) -> f64 {
        self.mean_y
    }

    /// `Σᵢ (yᵢ − θ₁ − θ₂²)`.
    pub fn residual_sum(&self, theta: &[f64; 2]) -> f64 {
        let m = theta[0] + theta[1] * theta[1];
        self.n as f64 * (self.mean_y - m)
    }

    pub fn log_prior(&self, theta: &[f64; 2]) -> f64 {
        -(theta[0] * theta[0] + theta[1] * theta[1]) / (2.0 * self.sigma_theta * self.sigma_theta)
    }

    pub fn log_likelihood(&self, theta: &[f64; 2]) -> f64 {
        let m = theta[0] + theta[1] * theta[1];
        let d = self.mean_y - m;
        -(self.scatter + self.n as f64 * d * d) / (2.0 * self.sigma_y * self.sigma_y)
    }

    pub fn log_posterior(&self, theta: &[f64; 2]) -> f64 {
        self.log_prior(theta) + self.log_likelihood(theta)
    }

    pub fn grad_log_posterior(&self, theta: &[f64; 2]) -> [f64; 2] {
        let vy = self.sigma_y * self.sigma_y;
        let vt = self.sigma_theta * self.sigma_theta;
        let r = self.residual_sum(theta) / vy;
        [r - theta[0] / vt, 2.0 * theta[1] * r - theta[1] / vt]
    }

    /// The metric matrix `G(θ)`: expected Fisher information plus prior precision.
    pub fn metric_matrix(&self, theta: &[f64; 2]) -> SymMatrix<2> {
        let a = self.n as f64 / (self.sigma_y * self.sigma_y);
        let prec = 1.0 / (self.sigma_theta * self.sigma_theta);
        let t2 = theta[1];
        SymMatrix::from_lower([[a + prec, 0.0], [2.0 * a * t2, 4.0 * a * t2 * t2 + prec]])
    }

    /// `[∂G/∂θ₁, ∂G/∂θ₂]`. `G` does not depend on `θ₁`.
    pub fn metric_derivatives(&self, theta: &[f64; 2]) -> [SymMatrix<2>; 2] {
        let a = self.n as f64 / (self.sigma_y * self.sigma_y);
        let d2 = SymMatrix::from_lower([[0.0, 0.0], [2.0 * a, 8.0 * a * theta[1]]]);
        [SymMatrix::zeros(), d2]
    }

    pub fn metric_bundle(&self, theta: &[f64; 2]) -> Result<MetricBundle<2>> {
        MetricBundle::new(self.metric_matrix(theta), self.metric_derivatives(theta)).map_err(|e| match e {
            Error::NotPositiveDefinite { pivot } => Error::MetricFactorization {
                theta: theta.to_vec(),
                pivot,
            },
            other => other,
        })
    }

    /// Posterior mode restricted to the line `θ₂ = 0`; a deterministic point
    /// on the ridge used as a default chain start.
    pub fn ridge_start(&self) -> [f64; 2] {
        let prec_ratio = (self.sigma_y * self.sigma_y) / (self.sigma_theta * self.sigma_theta);
        [self.sum_y / (self.n as f64 + prec_ratio), 0.0]
    }
}

impl Target<2> for WarpedGaussian {
    fn log_density(&self, theta: &[f64; 2]) -> f64 {
        self.log_posterior(theta)
    }

    fn grad_log_density(&self, theta: &[f64; 2]) -> [f64; 2] {
        self.grad_log_posterior(theta)
    }
}

impl RiemannianTarget<2> for WarpedGaussian {
    fn metric(&self, theta: &[f64; 2]) -> Result<MetricBundle<2>> {
        self.metric_bundle(theta)
    }
}
