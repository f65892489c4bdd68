//! Geometric MCMC on a weakly identifiable "warped" bivariate Gaussian.
//!
//! The crate provides
//!
//! * [`model`]: the warped Gaussian target (`y ~ N(θ₁ + θ₂², σ_y²)` with a
//!   Gaussian prior), its gradient, its position-dependent metric `G(θ)` and
//!   the metric derivatives, plus the [`Target`] / [`RiemannianTarget`]
//!   traits the dynamics are written against;
//! * [`smallmat`]: a fixed-size dense kernel (Cholesky, solves, inverse,
//!   log-determinant, correlated Gaussian draws, spectral norm);
//! * [`integrators`]: the standard leapfrog and the generalized (implicit)
//!   leapfrog whose sub-steps are solved by fixed-point iteration, with full
//!   reporting of convergence failures;
//! * [`samplers`]: HMC, RMHMC and a metric-covariance random-walk
//!   Metropolis–Hastings kernel, driven by seeded counter-based streams;
//! * [`stability`]: Monte Carlo maps of where the implicit momentum
//!   half-step admits a fixed point and where the iteration contracts;
//! * [`oracle`]: tensor-product quadrature reference values for the 2-D
//!   posterior.
//!
//! All dynamics code is generic over the dimension `D` through const
//! generics; vectors are `[f64; D]`.

pub mod diagnostics;
pub mod error;
pub mod integrators;
pub mod model;
pub mod oracle;
pub mod roots;
pub mod samplers;
pub mod smallmat;
pub mod stability;
pub mod streams;

pub use error::{Error, Result};
pub use integrators::{
    Existence, FpiReport, IntegratorConfig, PhaseState, Scheme, StepDiagnostics, TrajectoryPoint,
};
pub use model::{IdentityMetric, MetricBundle, ModelHyper, RiemannianTarget, Target, WarpedGaussian};
pub use samplers::{ChainConfig, ChainOutput, Kernel, TransitionRecord};
pub use smallmat::{Cholesky, Matrix, SymMatrix};
pub use stability::{StabilityCell, StabilityGridConfig, StabilityMap};

/// Position in parameter space.
pub type Position<const D: usize> = [f64; D];
