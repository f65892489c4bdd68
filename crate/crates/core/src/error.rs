use thiserror::Error;

/// Errors surfaced by the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Cholesky factorization hit a non-positive pivot.
    #[error("matrix is not positive definite (failing pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    /// The model metric could not be factorized. For the warped Gaussian this
    /// is a defect (its metric is provably SPD), so the position is carried
    /// for diagnosis.
    #[error("metric factorization failed at theta = {theta:?} (pivot {pivot})")]
    MetricFactorization { theta: Vec<f64>, pivot: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Quadrature produced a non-finite log density.
    #[error("non-finite integrand at grid point {point:?}")]
    NonFiniteIntegrand { point: Vec<f64> },
}

pub type Result<T> = std::result::Result<T, Error>;
