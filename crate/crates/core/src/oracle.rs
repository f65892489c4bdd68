//! Reference posterior expectations by tensor-product quadrature.
//!
//! Used as ground truth for the samplers: the posterior is two-dimensional,
//! so a dense Simpson grid over `±8σ_θ` resolves its moments to well below
//! Monte Carlo error.

use crate::error::{Error, Result};
use crate::model::WarpedGaussian;
use crate::samplers::heaviside;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    Simpson,
    Trapezoid,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureGrid {
    /// `(lo, hi, n_points)` for `θ₁` and `θ₂`.
    pub ranges: [(f64, f64, usize); 2],
    pub rule: Rule,
}

impl QuadratureGrid {
    pub fn new(ranges: [(f64, f64, usize); 2], rule: Rule) -> Result<Self> {
        for (axis, &(lo, hi, n)) in ranges.iter().enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidConfig(format!("axis {axis}: need lo < hi")));
            }
            if n < 3 {
                return Err(Error::InvalidConfig(format!("axis {axis}: need at least 3 points")));
            }
            if rule == Rule::Simpson && n % 2 == 0 {
                return Err(Error::InvalidConfig(format!("axis {axis}: Simpson needs an odd point count")));
            }
        }
        Ok(QuadratureGrid { ranges, rule })
    }

    /// Simpson grid over `[−8σ_θ, 8σ_θ]²` with `n_points` per axis.
    pub fn covering(model: &WarpedGaussian, n_points: usize) -> Result<Self> {
        let b = 8.0 * model.sigma_theta();
        Self::new([(-b, b, n_points), (-b, b, n_points)], Rule::Simpson)
    }

    /// Halves the spacing: `n → 2n − 1` points per axis.
    pub fn refined(&self) -> Self {
        let mut out = *self;
        for r in out.ranges.iter_mut() {
            r.2 = 2 * r.2 - 1;
        }
        out
    }

    fn nodes(&self, axis: usize) -> Vec<(f64, f64)> {
        let (lo, hi, n) = self.ranges[axis];
        let h = (hi - lo) / (n - 1) as f64;
        (0..n)
            .map(|i| {
                let x = if i == n - 1 { hi } else { lo + i as f64 * h };
                let w = match self.rule {
                    Rule::Trapezoid => {
                        if i == 0 || i == n - 1 {
                            0.5 * h
                        } else {
                            h
                        }
                    }
                    Rule::Simpson => {
                        let c = if i == 0 || i == n - 1 {
                            1.0
                        } else if i % 2 == 1 {
                            4.0
                        } else {
                            2.0
                        };
                        c * h / 3.0
                    }
                };
                (x, w)
            })
            .collect()
    }
}

/// Posterior expectations the oracle knows how to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Moment {
    MeanTheta1,
    MeanTheta2,
    MeanTheta2Sq,
    /// `E[θ₁ + θ₂²]`.
    MeanRidge,
    /// `P(θ₂ > 0)`, with the boundary line weighted ½.
    ProbTheta2Pos,
}

impl Moment {
    pub const ALL: [Moment; 5] = [
        Moment::MeanTheta1,
        Moment::MeanTheta2,
        Moment::MeanTheta2Sq,
        Moment::MeanRidge,
        Moment::ProbTheta2Pos,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Moment::MeanTheta1 => "mean_theta1",
            Moment::MeanTheta2 => "mean_theta2",
            Moment::MeanTheta2Sq => "mean_theta2_sq",
            Moment::MeanRidge => "mean_ridge",
            Moment::ProbTheta2Pos => "prob_theta2_pos",
        }
    }

    pub fn integrand(self, t: &[f64; 2]) -> f64 {
        match self {
            Moment::MeanTheta1 => t[0],
            Moment::MeanTheta2 => t[1],
            Moment::MeanTheta2Sq => t[1] * t[1],
            Moment::MeanRidge => t[0] + t[1] * t[1],
            Moment::ProbTheta2Pos => heaviside(t[1]),
        }
    }
}

/// `∫ f exp(log_density) / ∫ exp(log_density)` for each `f` in `moments`,
/// stabilized by subtracting the grid maximum of the log density.
pub fn normalized_moments<F>(log_density: F, grid: &QuadratureGrid, moments: &[Moment]) -> Result<Vec<f64>>
where
    F: Fn(&[f64; 2]) -> f64,
{
    let xs = grid.nodes(0);
    let ys = grid.nodes(1);
    let mut max = f64::NEG_INFINITY;
    for &(x, _) in &xs {
        for &(y, _) in &ys {
            let l = log_density(&[x, y]);
            if !l.is_finite() {
                return Err(Error::NonFiniteIntegrand { point: vec![x, y] });
            }
            max = max.max(l);
        }
    }
    let mut mass = 0.0;
    let mut sums = vec![0.0; moments.len()];
    for &(x, wx) in &xs {
        for &(y, wy) in &ys {
            let t = [x, y];
            let w = wx * wy * (log_density(&t) - max).exp();
            mass += w;
            for (s, m) in sums.iter_mut().zip(moments) {
                *s += w * m.integrand(&t);
            }
        }
    }
    Ok(sums.into_iter().map(|s| s / mass).collect())
}

/// Checks that the grid spans at least `±8σ_θ` on both axes.
fn check_coverage(model: &WarpedGaussian, grid: &QuadratureGrid) -> Result<()> {
    let b = 8.0 * model.sigma_theta() * (1.0 - 1e-12);
    for (axis, &(lo, hi, _)) in grid.ranges.iter().enumerate() {
        if lo > -b || hi < b {
            return Err(Error::InvalidConfig(format!(
                "quadrature axis {axis} must cover +/- 8 sigma_theta = {b}"
            )));
        }
    }
    Ok(())
}

pub fn posterior_moments(model: &WarpedGaussian, grid: &QuadratureGrid, moments: &[Moment]) -> Result<Vec<f64>> {
    check_coverage(model, grid)?;
    normalized_moments(|t| model.log_posterior(t), grid, moments)
}

pub fn posterior_moment(model: &WarpedGaussian, grid: &QuadratureGrid, moment: Moment) -> Result<f64> {
    Ok(posterior_moments(model, grid, &[moment])?[0])
}

/// Largest change of any moment between `grid` and its refinement.
pub fn refinement_gap(model: &WarpedGaussian, grid: &QuadratureGrid, moments: &[Moment]) -> Result<f64> {
    let coarse = posterior_moments(model, grid, moments)?;
    let fine = posterior_moments(model, &grid.refined(), moments)?;
    Ok(coarse.iter().zip(&fine).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
}
