//! Independent reference formulas shared by the integration tests.
//!
//! Nothing here calls into the crate's own derivative code: the metric is
//! rebuilt from the closed form and derivatives come from central
//! differences.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rmhmc_core::{ModelHyper, WarpedGaussian};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// n = 100, σ_y = σ_θ = 1, data simulated at θ = (0, 0).
pub fn paper_model(seed: u64) -> WarpedGaussian {
    WarpedGaussian::simulate(ModelHyper::new(100, 1.0, 1.0), &[0.0, 0.0], seed).unwrap()
}

pub fn random_model(rng: &mut impl Rng) -> WarpedGaussian {
    let n = rng.random_range(1..=200);
    let sigma_y = rng.random_range(0.3..3.0);
    let sigma_theta = rng.random_range(0.3..3.0);
    let truth = [rng.random_range(-2.0..2.0), rng.random_range(-1.5..1.5)];
    WarpedGaussian::simulate(ModelHyper::new(n, sigma_y, sigma_theta), &truth, rng.random()).unwrap()
}

pub fn central_diff<const D: usize>(f: impl Fn(&[f64; D]) -> f64, x: &[f64; D], h: f64) -> [f64; D] {
    let mut out = [0.0; D];
    for i in 0..D {
        let mut a = *x;
        let mut b = *x;
        a[i] += h;
        b[i] -= h;
        out[i] = (f(&a) - f(&b)) / (2.0 * h);
    }
    out
}

/// `jac[i][j] = ∂fᵢ/∂xⱼ`.
pub fn central_jacobian<const D: usize, const E: usize>(
    f: impl Fn(&[f64; D]) -> [f64; E],
    x: &[f64; D],
    h: f64,
) -> [[f64; D]; E] {
    let mut out = [[0.0; D]; E];
    for j in 0..D {
        let mut a = *x;
        let mut b = *x;
        a[j] += h;
        b[j] -= h;
        let (fa, fb) = (f(&a), f(&b));
        for i in 0..E {
            out[i][j] = (fa[i] - fb[i]) / (2.0 * h);
        }
    }
    out
}

pub fn max_abs<const D: usize>(v: &[f64; D]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn max_diff<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Largest component error relative to the reference scale (floored at 1).
pub fn rel_err<const D: usize>(got: &[f64; D], reference: &[f64; D]) -> f64 {
    max_diff(got, reference) / max_abs(reference).max(1.0)
}

/// Closed-form metric `[[a, b], [b, c]]` of the warped Gaussian.
pub fn metric(m: &WarpedGaussian, t: &[f64; 2]) -> [[f64; 2]; 2] {
    let k = m.n() as f64 / (m.sigma_y() * m.sigma_y());
    let prior = 1.0 / (m.sigma_theta() * m.sigma_theta());
    [[k + prior, 2.0 * k * t[1]], [2.0 * k * t[1], 4.0 * k * t[1] * t[1] + prior]]
}

/// `∂G/∂θ₂` in closed form (`∂G/∂θ₁ = 0`).
pub fn metric_d2(m: &WarpedGaussian, t: &[f64; 2]) -> [[f64; 2]; 2] {
    let k = m.n() as f64 / (m.sigma_y() * m.sigma_y());
    [[0.0, 2.0 * k], [2.0 * k, 8.0 * k * t[1]]]
}

pub fn inv2(g: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    [[g[1][1] / det, -g[0][1] / det], [-g[1][0] / det, g[0][0] / det]]
}

pub fn mul2(a: &[[f64; 2]; 2], v: &[f64; 2]) -> [f64; 2] {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

pub fn quad2(a: &[[f64; 2]; 2], v: &[f64; 2]) -> f64 {
    let w = mul2(a, v);
    v[0] * w[0] + v[1] * w[1]
}

/// `∇θH` written out for the warped Gaussian, using only the closed-form
/// metric and the crate's log-density gradient.
pub fn grad_theta_h_reference(m: &WarpedGaussian, t: &[f64; 2], p: &[f64; 2]) -> [f64; 2] {
    let gi = inv2(&metric(m, t));
    let d2 = metric_d2(m, t);
    let grad = m.grad_log_posterior(t);
    let v = mul2(&gi, p);
    let tr = gi[0][0] * d2[0][0] + gi[0][1] * d2[1][0] + gi[1][0] * d2[0][1] + gi[1][1] * d2[1][1];
    [-grad[0], -grad[1] + 0.5 * tr - 0.5 * quad2(&d2, &v)]
}
