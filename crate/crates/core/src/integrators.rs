//! Hamiltonian dynamics.
//!
//! The Riemannian Hamiltonian is
//!
//! ```text
//! H(θ, p) = −L(θ) + ½ log((2π)^D det G(θ)) + ½ pᵀ G(θ)⁻¹ p
//! ```
//!
//! and the generalized leapfrog advances it in three stages:
//!
//! ```text
//! p½   = p − ε/2 ∇θH(θ, p½)                       (implicit in p½)
//! θ'   = θ + ε/2 [G(θ)⁻¹ p½ + G(θ')⁻¹ p½]         (implicit in θ')
//! p'   = p½ − ε/2 ∇θH(θ', p½)                     (explicit)
//! ```
//!
//! Both implicit stages are solved by fixed-point iteration. A failed
//! iteration never aborts a step: the last usable iterate is carried forward
//! and the failure is recorded in the [`FpiReport`] so the Metropolis–Hastings
//! correction (or the caller) can deal with it.

use crate::error::{Error, Result};
use crate::model::{MetricBundle, RiemannianTarget, Target};
use crate::roots::{self, NewtonOptions};
use crate::smallmat::{all_finite, axpy, inf_norm, spectral_norm, sub, Matrix};

/// Residual growth, relative to the first iteration's change, treated as divergence.
pub const DIVERGENCE_GROWTH: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseState<const D: usize> {
    pub theta: [f64; D],
    pub p: [f64; D],
}

impl<const D: usize> PhaseState<D> {
    pub fn new(theta: [f64; D], p: [f64; D]) -> Self {
        PhaseState { theta, p }
    }

    pub fn flip_momentum(&self) -> Self {
        PhaseState {
            theta: self.theta,
            p: self.p.map(|v| -v),
        }
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.theta) && all_finite(&self.p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub epsilon: f64,
    pub n_leapfrog: usize,
    pub max_fpi: usize,
    /// Convergence tolerance on the infinity norm of successive iterates.
    pub fpi_tol: f64,
    /// Bound on the iteration map's Jacobian norm used when classifying
    /// half-steps as convergent.
    pub contraction_threshold: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            epsilon: 0.1,
            n_leapfrog: 20,
            max_fpi: 100,
            fpi_tol: 1e-10,
            contraction_threshold: 1.2,
        }
    }
}

impl IntegratorConfig {
    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_steps(mut self, n_leapfrog: usize) -> Self {
        self.n_leapfrog = n_leapfrog;
        self
    }

    /// `ε = 0` is accepted here (it is the identity map, useful as a
    /// reference case); samplers additionally require `ε > 0`.
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!("epsilon must be finite and >= 0, got {}", self.epsilon)));
        }
        if self.max_fpi == 0 {
            return Err(Error::InvalidConfig("max_fpi must be at least 1".into()));
        }
        if !(self.fpi_tol > 0.0) {
            return Err(Error::InvalidConfig(format!("fpi_tol must be positive, got {}", self.fpi_tol)));
        }
        if !(self.contraction_threshold > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "contraction_threshold must be positive, got {}",
                self.contraction_threshold
            )));
        }
        Ok(())
    }
}

/// Verdict on whether an implicit equation has a solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Existence {
    Yes,
    No,
    Unknown,
}

/// Outcome of one fixed-point solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FpiReport<const D: usize> {
    pub converged: bool,
    /// Stopped before `max_fpi` because an iterate was non-finite or the
    /// change blew up past [`DIVERGENCE_GROWTH`].
    pub blew_up: bool,
    pub iterations: usize,
    /// Infinity norm of the last change between iterates.
    pub residual: f64,
    /// Spectral norm of the iteration map's Jacobian at `result`.
    pub contraction: f64,
    pub fixed_point_exists: Existence,
    /// Last usable iterate.
    pub result: [f64; D],
}

/// Per-step record of the generalized leapfrog.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepDiagnostics<const D: usize> {
    pub momentum: FpiReport<D>,
    pub position: FpiReport<D>,
    /// `H(after) − H(before)`.
    pub delta_h: f64,
    /// `H` at the new state (NaN if it could not be evaluated).
    pub h_after: f64,
}

impl<const D: usize> StepDiagnostics<D> {
    pub fn fpi_diverged(&self) -> bool {
        !self.momentum.converged || !self.position.converged
    }
}

/// Precomputed pieces of `∇θH` at a fixed position.
struct MomentumTerms<'a, const D: usize> {
    bundle: &'a MetricBundle<D>,
    /// `−∂L/∂θᵢ + ½ tr(G⁻¹ ∂G/∂θᵢ)`: the part of `∇θH` that does not depend on `p`.
    base: [f64; D],
}

impl<'a, const D: usize> MomentumTerms<'a, D> {
    fn new(bundle: &'a MetricBundle<D>, grad_log: &[f64; D]) -> Self {
        let mut base = [0.0; D];
        for i in 0..D {
            base[i] = -grad_log[i] + 0.5 * trace_product(&bundle.g_inv.as_matrix().0, &bundle.d_g[i].as_matrix().0);
        }
        MomentumTerms { bundle, base }
    }

    fn grad_theta_h(&self, p: &[f64; D]) -> [f64; D] {
        let v = self.bundle.g_inv.mul_vec(p);
        let mut out = self.base;
        for (i, o) in out.iter_mut().enumerate() {
            *o -= 0.5 * self.bundle.d_g[i].quad_form(&v);
        }
        out
    }

    /// `∂(∇θH)ᵢ/∂pⱼ = −(G⁻¹ ∂G/∂θᵢ G⁻¹ p)ⱼ`.
    fn grad_theta_h_jacobian_p(&self, p: &[f64; D]) -> Matrix<D> {
        let v = self.bundle.g_inv.mul_vec(p);
        let mut jac = Matrix::zeros();
        for i in 0..D {
            let w = self.bundle.g_inv.mul_vec(&self.bundle.d_g[i].mul_vec(&v));
            for j in 0..D {
                jac.0[i][j] = -w[j];
            }
        }
        jac
    }
}

fn trace_product<const D: usize>(a: &[[f64; D]; D], b: &[[f64; D]; D]) -> f64 {
    let mut s = 0.0;
    for i in 0..D {
        for k in 0..D {
            s += a[i][k] * b[k][i];
        }
    }
    s
}

fn grad_theta_h_at<const D: usize>(bundle: &MetricBundle<D>, grad_log: &[f64; D], p: &[f64; D]) -> [f64; D] {
    MomentumTerms::new(bundle, grad_log).grad_theta_h(p)
}

fn hamiltonian_at<const D: usize>(bundle: &MetricBundle<D>, log_density: f64, p: &[f64; D]) -> f64 {
    let two_pi_d = D as f64 * (2.0 * std::f64::consts::PI).ln();
    -log_density + 0.5 * (two_pi_d + bundle.log_det) + 0.5 * crate::smallmat::dot(p, &bundle.chol.solve(p))
}

pub fn hamiltonian<T: RiemannianTarget<D>, const D: usize>(target: &T, state: &PhaseState<D>) -> Result<f64> {
    let bundle = target.metric(&state.theta)?;
    Ok(hamiltonian_at(&bundle, target.log_density(&state.theta), &state.p))
}

/// `∂H/∂θᵢ = −∂L/∂θᵢ + ½ tr(G⁻¹ ∂ᵢG) − ½ pᵀ G⁻¹ ∂ᵢG G⁻¹ p`.
pub fn grad_theta_h<T: RiemannianTarget<D>, const D: usize>(target: &T, state: &PhaseState<D>) -> Result<[f64; D]> {
    let bundle = target.metric(&state.theta)?;
    Ok(grad_theta_h_at(&bundle, &target.grad_log_density(&state.theta), &state.p))
}

/// `∂H/∂p = G(θ)⁻¹ p`.
pub fn grad_p_h<T: RiemannianTarget<D>, const D: usize>(target: &T, state: &PhaseState<D>) -> Result<[f64; D]> {
    Ok(target.metric(&state.theta)?.chol.solve(&state.p))
}

/// Jacobian of the momentum fixed-point map `p ↦ p₀ − ε/2 ∇θH(θ₀, p)`.
pub fn momentum_map_jacobian<T: RiemannianTarget<D>, const D: usize>(
    target: &T,
    theta: &[f64; D],
    p: &[f64; D],
    epsilon: f64,
) -> Result<Matrix<D>> {
    let bundle = target.metric(theta)?;
    let terms = MomentumTerms::new(&bundle, &target.grad_log_density(theta));
    Ok(terms.grad_theta_h_jacobian_p(p).scale(-0.5 * epsilon))
}

/// Jacobian of the position fixed-point map
/// `θ ↦ θ₀ + ε/2 [G(θ₀)⁻¹p + G(θ)⁻¹p]` with respect to `θ`.
pub fn position_map_jacobian<T: RiemannianTarget<D>, const D: usize>(
    target: &T,
    theta: &[f64; D],
    p: &[f64; D],
    epsilon: f64,
) -> Result<Matrix<D>> {
    let bundle = target.metric(theta)?;
    Ok(position_jacobian_at(&bundle, p, epsilon))
}

fn position_jacobian_at<const D: usize>(bundle: &MetricBundle<D>, p: &[f64; D], epsilon: f64) -> Matrix<D> {
    let v = bundle.chol.solve(p);
    let mut cols = [[0.0; D]; D];
    for (j, col) in cols.iter_mut().enumerate() {
        let w = bundle.g_inv.mul_vec(&bundle.d_g[j].mul_vec(&v));
        *col = w.map(|x| -0.5 * epsilon * x);
    }
    Matrix::from_columns(&cols)
}

/// Raw outcome of a fixed-point iteration, before any existence check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FpiRun<const D: usize> {
    pub converged: bool,
    pub blew_up: bool,
    pub iterations: usize,
    pub residual: f64,
    pub result: [f64; D],
}

/// Plain fixed-point iteration `x ← map(x)` from `x0`.
///
/// `map` returns `None` when it cannot be evaluated at the current iterate.
fn iterate<const D: usize, M>(x0: [f64; D], max_iter: usize, tol: f64, mut map: M) -> FpiRun<D>
where
    M: FnMut(&[f64; D]) -> Option<[f64; D]>,
{
    let mut x = x0;
    let mut first_change = None;
    let mut residual = f64::INFINITY;
    for k in 1..=max_iter {
        let next = match map(&x) {
            Some(next) if all_finite(&next) => next,
            _ => {
                return FpiRun {
                    converged: false,
                    blew_up: true,
                    iterations: k,
                    residual: f64::INFINITY,
                    result: x,
                }
            }
        };
        residual = inf_norm(&sub(&next, &x));
        x = next;
        if residual <= tol {
            return FpiRun {
                converged: true,
                blew_up: false,
                iterations: k,
                residual,
                result: x,
            };
        }
        let first = *first_change.get_or_insert(residual);
        if residual > DIVERGENCE_GROWTH * first {
            return FpiRun {
                converged: false,
                blew_up: true,
                iterations: k,
                residual,
                result: x,
            };
        }
    }
    FpiRun {
        converged: false,
        blew_up: false,
        iterations: max_iter,
        residual,
        result: x,
    }
}

/// The implicit momentum half-step at fixed `θ₀`, with everything the
/// fixed-point iteration, the contraction estimate and the Newton oracle need.
pub struct MomentumEquation<'a, const D: usize> {
    terms: MomentumTerms<'a, D>,
    p0: [f64; D],
    half_eps: f64,
}

impl<'a, const D: usize> MomentumEquation<'a, D> {
    pub fn new(bundle: &'a MetricBundle<D>, grad_log: &[f64; D], p0: [f64; D], epsilon: f64) -> Self {
        MomentumEquation {
            terms: MomentumTerms::new(bundle, grad_log),
            p0,
            half_eps: 0.5 * epsilon,
        }
    }

    /// `p ↦ p₀ − ε/2 ∇θH(θ₀, p)`.
    pub fn map(&self, p: &[f64; D]) -> [f64; D] {
        axpy(&self.p0, -self.half_eps, &self.terms.grad_theta_h(p))
    }

    pub fn map_jacobian(&self, p: &[f64; D]) -> Matrix<D> {
        self.terms.grad_theta_h_jacobian_p(p).scale(-self.half_eps)
    }

    /// `R(p) = p − p₀ + ε/2 ∇θH(θ₀, p)`.
    pub fn residual(&self, p: &[f64; D]) -> [f64; D] {
        sub(p, &self.map(p))
    }

    pub fn residual_jacobian(&self, p: &[f64; D]) -> Matrix<D> {
        Matrix::identity().add(&self.map_jacobian(p).scale(-1.0))
    }

    pub fn contraction(&self, p: &[f64; D]) -> f64 {
        spectral_norm(&self.map_jacobian(p))
    }

    pub fn p0(&self) -> [f64; D] {
        self.p0
    }

    /// Fixed-point iteration from `p₀`.
    pub fn fixed_point(&self, config: &IntegratorConfig) -> FpiRun<D> {
        iterate(self.p0, config.max_fpi, config.fpi_tol, |p| Some(self.map(p)))
    }

    /// Multi-start damped Newton on [`Self::residual`].
    pub fn newton_existence(&self) -> roots::ExistenceVerdict<D> {
        roots::existence_by_multistart(
            |p| self.residual(p),
            |p| self.residual_jacobian(p),
            self.p0,
            &NewtonOptions::default(),
        )
    }
}

/// Solves the implicit momentum half-step by fixed-point iteration from
/// `p⁽⁰⁾ = p(τ)`.
///
/// If the iteration fails, existence of a solution is decided by the Newton
/// oracle; a converged iteration certifies existence on its own.
pub fn fpi_momentum_half_step<T: RiemannianTarget<D>, const D: usize>(
    target: &T,
    state: &PhaseState<D>,
    config: &IntegratorConfig,
) -> Result<FpiReport<D>> {
    config.validate()?;
    let bundle = target.metric(&state.theta)?;
    let grad_log = target.grad_log_density(&state.theta);
    Ok(momentum_report(&bundle, &grad_log, state.p, config))
}

fn momentum_report<const D: usize>(
    bundle: &MetricBundle<D>,
    grad_log: &[f64; D],
    p0: [f64; D],
    config: &IntegratorConfig,
) -> FpiReport<D> {
    let eq = MomentumEquation::new(bundle, grad_log, p0, config.epsilon);
    let run = eq.fixed_point(config);
    let fixed_point_exists = if run.converged {
        Existence::Yes
    } else {
        eq.newton_existence().existence
    };
    FpiReport {
        converged: run.converged,
        blew_up: run.blew_up,
        iterations: run.iterations,
        residual: run.residual,
        contraction: eq.contraction(&run.result),
        fixed_point_exists,
        result: run.result,
    }
}

/// Solves the implicit position step
/// `θ' = θ₀ + ε/2 [G(θ₀)⁻¹p½ + G(θ')⁻¹p½]` by fixed-point iteration from
/// `θ⁽⁰⁾ = θ₀`.
pub fn fpi_position_step<T: RiemannianTarget<D>, const D: usize>(
    target: &T,
    theta_start: &[f64; D],
    p_half: &[f64; D],
    config: &IntegratorConfig,
) -> Result<FpiReport<D>> {
    config.validate()?;
    let start_bundle = target.metric(theta_start)?;
    Ok(position_report(target, &start_bundle, theta_start, p_half, config))
}

fn position_report<T: RiemannianTarget<D>, const D: usize>(
    target: &T,
    start_bundle: &MetricBundle<D>,
    theta_start: &[f64; D],
    p_half: &[f64; D],
    config: &IntegratorConfig,
) -> FpiReport<D> {
    let h = 0.5 * config.epsilon;
    let fixed = axpy(theta_start, h, &start_bundle.chol.solve(p_half));
    let map = |theta: &[f64; D]| -> Option<[f64; D]> {
        let b = target.metric(theta).ok()?;
        Some(axpy(&fixed, h, &b.chol.solve(p_half)))
    };
    let run = iterate(*theta_start, config.max_fpi, config.fpi_tol, map);
    let contraction = target
        .metric(&run.result)
        .map(|b| spectral_norm(&position_jacobian_at(&b, p_half, config.epsilon)))
        .unwrap_or(f64::INFINITY);
    let fixed_point_exists = if run.converged {
        Existence::Yes
    } else {
        let residual = |theta: &[f64; D]| match map(theta) {
            Some(next) => sub(theta, &next),
            None => [f64::NAN; D],
        };
        let jacobian = |theta: &[f64; D]| match target.metric(theta) {
            Ok(b) => Matrix::identity().add(&position_jacobian_at(&b, p_half, config.epsilon).scale(-1.0)),
            Err(_) => Matrix([[f64::NAN; D]; D]),
        };
        roots::existence_by_multistart(residual, jacobian, *theta_start, &NewtonOptions::default()).existence
    };
    FpiReport {
        converged: run.converged,
        blew_up: run.blew_up,
        iterations: run.iterations,
        residual: run.residual,
        contraction,
        fixed_point_exists,
        result: run.result,
    }
}

/// One generalized leapfrog step.
///
/// Only a metric failure at the incoming state is an error; failed
/// fixed-point solves are reported in the diagnostics and the step carries
/// on with the last usable iterate.
pub fn generalized_leapfrog_step<T: RiemannianTarget<D>, const D: usize>(
    target: &T,
    state: &PhaseState<D>,
    config: &IntegratorConfig,
) -> Result<(PhaseState<D>, StepDiagnostics<D>)> {
    config.validate()?;
    let h = 0.5 * config.epsilon;
    let bundle = target.metric(&state.theta)?;
    let grad_log = target.grad_log_density(&state.theta);
    let h_before = hamiltonian_at(&bundle, target.log_density(&state.theta), &state.p);

    let momentum = momentum_report(&bundle, &grad_log, state.p, config);
    let p_half = momentum.result;
    let position = position_report(target, &bundle, &state.theta, &p_half, config);
    let theta_new = position.result;

    let (p_new, h_after) = match target.metric(&theta_new) {
        Ok(b) => {
            let g = target.grad_log_density(&theta_new);
            let p_new = axpy(&p_half, -h, &grad_theta_h_at(&b, &g, &p_half));
            let h_after = hamiltonian_at(&b, target.log_density(&theta_new), &p_new);
            (p_new, h_after)
        }
        Err(_) => ([f64::NAN; D], f64::NAN),
    };
    let next = PhaseState::new(theta_new, p_new);
    let delta_h = if h_after.is_finite() { h_after - h_before } else { f64::INFINITY };
    Ok((
        next,
        StepDiagnostics {
            momentum,
            position,
            delta_h,
            h_after,
        },
    ))
}

/// Standard leapfrog with identity mass: half kick, drift, half kick.
pub fn leapfrog_step<T: Target<D>, const D: usize>(
    target: &T,
    state: &PhaseState<D>,
    config: &IntegratorConfig,
) -> PhaseState<D> {
    let h = 0.5 * config.epsilon;
    let p_half = axpy(&state.p, h, &target.grad_log_density(&state.theta));
    let theta = axpy(&state.theta, config.epsilon, &p_half);
    let p = axpy(&p_half, h, &target.grad_log_density(&theta));
    PhaseState::new(theta, p)
}

/// `−L(θ) + ½|p|²`, the energy of the standard scheme.
pub fn euclidean_hamiltonian<T: Target<D>, const D: usize>(target: &T, state: &PhaseState<D>) -> f64 {
    -target.log_density(&state.theta) + 0.5 * crate::smallmat::dot(&state.p, &state.p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Explicit leapfrog, identity mass, energy `−L + ½|p|²`.
    Standard,
    /// Generalized leapfrog on the Riemannian Hamiltonian.
    Generalized,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryPoint<const D: usize> {
    pub state: PhaseState<D>,
    pub hamiltonian: f64,
    /// Change of `H` over the step that produced this point (0 at the start).
    pub delta_h: f64,
    /// Fixed-point reports of the step that produced this point
    /// (generalized scheme only).
    pub step: Option<StepDiagnostics<D>>,
}

impl<const D: usize> TrajectoryPoint<D> {
    pub fn fpi_diverged(&self) -> bool {
        self.step.is_some_and(|s| s.fpi_diverged())
    }
}

pub fn standard_trajectory<T: Target<D>, const D: usize>(
    target: &T,
    start: &PhaseState<D>,
    config: &IntegratorConfig,
) -> Vec<TrajectoryPoint<D>> {
    let mut out = Vec::with_capacity(config.n_leapfrog + 1);
    let mut state = *start;
    let mut h = euclidean_hamiltonian(target, &state);
    out.push(TrajectoryPoint {
        state,
        hamiltonian: h,
        delta_h: 0.0,
        step: None,
    });
    for _ in 0..config.n_leapfrog {
        state = leapfrog_step(target, &state, config);
        let h_new = euclidean_hamiltonian(target, &state);
        out.push(TrajectoryPoint {
            state,
            hamiltonian: h_new,
            delta_h: h_new - h,
            step: None,
        });
        h = h_new;
    }
    out
}

/// Generalized-leapfrog trajectory. Fixed-point failures are recorded, never
/// fatal; an error at a later step (the state left the region where the
/// metric can be evaluated) ends the trajectory with a non-finite point.
pub fn generalized_trajectory<T: RiemannianTarget<D>, const D: usize>(
    target: &T,
    start: &PhaseState<D>,
    config: &IntegratorConfig,
) -> Result<Vec<TrajectoryPoint<D>>> {
    config.validate()?;
    let mut out = Vec::with_capacity(config.n_leapfrog + 1);
    let mut state = *start;
    let mut h = hamiltonian(target, &state)?;
    out.push(TrajectoryPoint {
        state,
        hamiltonian: h,
        delta_h: 0.0,
        step: None,
    });
    for _ in 0..config.n_leapfrog {
        match generalized_leapfrog_step(target, &state, config) {
            Ok((next, diag)) => {
                let h_new = diag.h_after;
                state = next;
                h = h_new;
                out.push(TrajectoryPoint {
                    state,
                    hamiltonian: h_new,
                    delta_h: diag.delta_h,
                    step: Some(diag),
                });
                if !state.is_finite() || !h.is_finite() {
                    break;
                }
            }
            Err(_) => break,
        }
    }
    Ok(out)
}

pub fn trajectory<T: RiemannianTarget<D>, const D: usize>(
    target: &T,
    start: &PhaseState<D>,
    config: &IntegratorConfig,
    scheme: Scheme,
) -> Result<Vec<TrajectoryPoint<D>>> {
    match scheme {
        Scheme::Standard => Ok(standard_trajectory(target, start, config)),
        Scheme::Generalized => generalized_trajectory(target, start, config),
    }
}
