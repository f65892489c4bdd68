//! Damped Newton root finding for small nonlinear systems `R(x) = 0`.

use crate::integrators::Existence;
use crate::smallmat::{all_finite, inf_norm, norm2, solve_general, sub, Matrix};

/// Limits for [`damped_newton`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    /// Infinity-norm residual accepted as a root.
    pub tol: f64,
    pub max_iter: usize,
    /// Step halvings tried before giving up on a direction.
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-8,
            max_iter: 200,
            max_halvings: 30,
        }
    }
}

/// How a single Newton run ended.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NewtonEnd<const D: usize> {
    Root { x: [f64; D], residual: f64, iterations: usize },
    /// The residual or the iterate became non-finite.
    NonFinite,
    /// No step reduced the residual, or the iteration budget ran out.
    Stagnated { x: [f64; D], residual: f64 },
}

/// Newton iteration with backtracking on `‖R‖₂`.
///
/// When the Jacobian is singular (or the Newton direction is not finite) the
/// step falls back to steepest descent on `½‖R‖²`, i.e. `-Jᵀ R`.
pub fn damped_newton<const D: usize, F, J>(
    residual: F,
    jacobian: J,
    start: [f64; D],
    opts: &NewtonOptions,
) -> NewtonEnd<D>
where
    F: Fn(&[f64; D]) -> [f64; D],
    J: Fn(&[f64; D]) -> Matrix<D>,
{
    let mut x = start;
    if !all_finite(&x) {
        return NewtonEnd::NonFinite;
    }
    let mut r = residual(&x);
    if !all_finite(&r) {
        return NewtonEnd::NonFinite;
    }
    for it in 0..opts.max_iter {
        let res_inf = inf_norm(&r);
        if res_inf <= opts.tol {
            let (x, residual) = polish(&residual, &jacobian, x, res_inf);
            return NewtonEnd::Root {
                x,
                residual,
                iterations: it,
            };
        }
        let jac = jacobian(&x);
        let neg_r = r.map(|v| -v);
        let dir = match solve_general(&jac, &neg_r) {
            Some(d) => d,
            None => {
                let g = jac.transpose().mul_vec(&r);
                if !all_finite(&g) {
                    return NewtonEnd::NonFinite;
                }
                g.map(|v| -v)
            }
        };
        let r_norm = norm2(&r);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let mut cand = x;
            cand.iter_mut().zip(&dir).for_each(|(c, d)| *c += t * d);
            let rc = residual(&cand);
            if all_finite(&cand) && all_finite(&rc) && norm2(&rc) < r_norm {
                accepted = Some((cand, rc));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((cand, rc)) => {
                x = cand;
                r = rc;
            }
            None => {
                return NewtonEnd::Stagnated {
                    x,
                    residual: res_inf,
                }
            }
        }
    }
    let res_inf = inf_norm(&r);
    if res_inf <= opts.tol {
        NewtonEnd::Root {
            x,
            residual: res_inf,
            iterations: opts.max_iter,
        }
    } else {
        NewtonEnd::Stagnated { x, residual: res_inf }
    }
}

/// One extra undamped Newton step once the tolerance is met, kept only if it
/// does not increase the residual.
fn polish<const D: usize, F, J>(residual: &F, jacobian: &J, x: [f64; D], res_inf: f64) -> ([f64; D], f64)
where
    F: Fn(&[f64; D]) -> [f64; D],
    J: Fn(&[f64; D]) -> Matrix<D>,
{
    let r = residual(&x);
    if let Some(dx) = solve_general(&jacobian(&x), &r.map(|v| -v)) {
        let cand = std::array::from_fn(|i| x[i] + dx[i]);
        let rc = inf_norm(&residual(&cand));
        if rc <= res_inf {
            return (cand, rc);
        }
    }
    (x, res_inf)
}

/// Residual level at which a stagnated Newton run counts as evidence that no
/// root exists.
pub const NO_ROOT_RESIDUAL: f64 = 1e3;

/// Result of [`existence_by_multistart`].
#[derive(Clone, Debug, PartialEq)]
pub struct ExistenceVerdict<const D: usize> {
    pub existence: Existence,
    /// Distinct roots found. Roots from the plain starts come first, in start
    /// order; roots exposed by deflation follow.
    pub roots: Vec<[f64; D]>,
    /// Smallest final residual over all starts.
    pub best_residual: f64,
}

impl<const D: usize> ExistenceVerdict<D> {
    /// The found root closest (infinity norm) to `x`.
    pub fn root_nearest(&self, x: &[f64; D]) -> Option<[f64; D]> {
        self.roots
            .iter()
            .min_by(|a, b| inf_norm(&sub(a, x)).total_cmp(&inf_norm(&sub(b, x))))
            .copied()
    }
}

/// Starting points: the base point and four deterministic perturbations
/// (two rescalings and two shifts along an alternating-sign direction).
pub fn multistart_points<const D: usize>(base: &[f64; D]) -> [[f64; D]; 5] {
    let shift = 1.0 + inf_norm(base);
    let mut plus = *base;
    let mut minus = *base;
    for i in 0..D {
        let dir = if i % 2 == 0 { 1.0 } else { -1.0 };
        plus[i] += shift * dir;
        minus[i] -= shift * dir;
    }
    [*base, base.map(|v| 0.5 * v), base.map(|v| 2.0 * v), plus, minus]
}

/// Rounds of deflation tried after the plain multistart.
const DEFLATION_ROUNDS: usize = 3;

/// Deflation radii tried in turn until one exposes a new root.
const DEFLATION_RADII: [f64; 4] = [1.0, 3.0, 10.0, 30.0];

/// `R(x) · m(x)` with `m(x) = Π (s²/‖x − r‖² + 1)` over known roots `r`.
///
/// Known roots become poles of the deflated system while other roots are
/// kept, so Newton restarted from the same points can find them. The radius
/// `s` should exceed the spread of the roots; otherwise `‖R m‖` keeps a
/// spurious local minimum between a known root and an unknown one. `m ≥ 1`,
/// hence a deflated residual below `tol` implies `‖R‖ ≤ tol`.
fn deflated<'a, const D: usize, F, J>(
    residual: &'a F,
    jacobian: &'a J,
    roots: &[[f64; D]],
    radius: f64,
) -> (impl Fn(&[f64; D]) -> [f64; D] + 'a, impl Fn(&[f64; D]) -> Matrix<D> + 'a)
where
    F: Fn(&[f64; D]) -> [f64; D],
    J: Fn(&[f64; D]) -> Matrix<D>,
{
    // (m(x), ∇m(x))
    let factor = move |x: &[f64; D], roots: &[[f64; D]]| -> (f64, [f64; D]) {
        let mut m = 1.0;
        let mut grad_log = [0.0; D];
        for r in roots {
            let d = sub(x, r);
            let sq = crate::smallmat::dot(&d, &d);
            let t = radius * radius / sq + 1.0;
            m *= t;
            for i in 0..D {
                grad_log[i] += -2.0 * radius * radius * d[i] / (sq * sq) / t;
            }
        }
        (m, grad_log.map(|g| g * m))
    };
    let roots_r = roots.to_vec();
    let roots_j = roots.to_vec();
    let res = move |x: &[f64; D]| {
        let (m, _) = factor(x, &roots_r);
        residual(x).map(|v| v * m)
    };
    let jac = move |x: &[f64; D]| {
        let (m, grad_m) = factor(x, &roots_j);
        let r = residual(x);
        let j = jacobian(x);
        let mut out = j.scale(m);
        for i in 0..D {
            for k in 0..D {
                out.0[i][k] += r[i] * grad_m[k];
            }
        }
        out
    };
    (res, jac)
}

fn push_distinct<const D: usize>(roots: &mut Vec<[f64; D]>, x: [f64; D]) -> bool {
    let scale = 1.0 + inf_norm(&x);
    if roots.iter().any(|y| inf_norm(&sub(y, &x)) <= 1e-9 * scale) {
        false
    } else {
        roots.push(x);
        true
    }
}

/// Decides whether `R(x) = 0` has a solution by damped Newton from
/// [`multistart_points`] around `base`.
///
/// `Yes` if any start reaches `‖R‖∞ ≤ opts.tol`; `No` if every start either
/// becomes non-finite or stagnates with residual at least
/// [`NO_ROOT_RESIDUAL`]; `Unknown` otherwise. Once a root is known the
/// starts are rerun on the deflated system, over a ladder of radii, to
/// collect further roots.
pub fn existence_by_multistart<const D: usize, F, J>(
    residual: F,
    jacobian: J,
    base: [f64; D],
    opts: &NewtonOptions,
) -> ExistenceVerdict<D>
where
    F: Fn(&[f64; D]) -> [f64; D],
    J: Fn(&[f64; D]) -> Matrix<D>,
{
    let mut roots: Vec<[f64; D]> = Vec::new();
    let mut best_residual = f64::INFINITY;
    let mut all_hopeless = true;
    let starts = multistart_points(&base);
    for &start in &starts {
        match damped_newton(&residual, &jacobian, start, opts) {
            NewtonEnd::Root { x, residual: r, .. } => {
                all_hopeless = false;
                best_residual = best_residual.min(r);
                push_distinct(&mut roots, x);
            }
            NewtonEnd::NonFinite => {}
            NewtonEnd::Stagnated { residual: r, .. } => {
                best_residual = best_residual.min(r);
                if r < NO_ROOT_RESIDUAL {
                    all_hopeless = false;
                }
            }
        }
    }
    for _ in 0..DEFLATION_ROUNDS {
        if roots.is_empty() {
            break;
        }
        let mut found = false;
        for radius in DEFLATION_RADII {
            let (res, jac) = deflated(&residual, &jacobian, &roots, radius);
            for &start in &starts {
                if let NewtonEnd::Root { x, .. } = damped_newton(&res, &jac, start, opts) {
                    let r = inf_norm(&residual(&x));
                    if r <= opts.tol {
                        best_residual = best_residual.min(r);
                        found |= push_distinct(&mut roots, x);
                    }
                }
            }
            if found {
                break;
            }
        }
        if !found {
            break;
        }
    }
    let existence = if !roots.is_empty() {
        Existence::Yes
    } else if all_hopeless {
        Existence::No
    } else {
        Existence::Unknown
    };
    ExistenceVerdict {
        existence,
        roots,
        best_residual,
    }
}
