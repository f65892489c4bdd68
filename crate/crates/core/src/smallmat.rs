//! Dense fixed-size matrix kernel.
//!
//! Everything here is stack allocated (`[[f64; D]; D]`); the matrices that
//! flow through the integrators are 2×2, so there is no blocking, pivoting or
//! other large-matrix machinery.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Square `D×D` matrix, row major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Matrix<const D: usize>(pub [[f64; D]; D]);

impl<const D: usize> Matrix<D> {
    pub fn zeros() -> Self {
        Matrix([[0.0; D]; D])
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for i in 0..D {
            m.0[i][i] = 1.0;
        }
        m
    }

    /// Builds a matrix whose `j`-th column is `cols[j]`.
    pub fn from_columns(cols: &[[f64; D]; D]) -> Self {
        let mut m = Self::zeros();
        for (j, col) in cols.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                m.0[i][j] = *v;
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[i][j]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros();
        for i in 0..D {
            for j in 0..D {
                t.0[j][i] = self.0[i][j];
            }
        }
        t
    }

    #[inline]
    pub fn mul_vec(&self, v: &[f64; D]) -> [f64; D] {
        let mut out = [0.0; D];
        for (i, row) in self.0.iter().enumerate() {
            out[i] = dot(row, v);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zeros();
        for i in 0..D {
            for k in 0..D {
                let a = self.0[i][k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..D {
                    out.0[i][j] += a * other.0[k][j];
                }
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        out.0.iter_mut().flatten().for_each(|x| *x *= s);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = *self;
        for i in 0..D {
            for j in 0..D {
                out.0[i][j] += other.0[i][j];
            }
        }
        out
    }

    pub fn trace(&self) -> f64 {
        (0..D).map(|i| self.0[i][i]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Symmetric square matrix. Construction enforces exact symmetry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMatrix<const D: usize>(Matrix<D>);

impl<const D: usize> SymMatrix<D> {
    /// Fails with [`Error::InvalidConfig`] unless `m[i][j] == m[j][i]` exactly.
    pub fn new(rows: [[f64; D]; D]) -> Result<Self> {
        for i in 0..D {
            for j in 0..i {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::InvalidConfig(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(SymMatrix(Matrix(rows)))
    }

    /// Builds the matrix from its lower triangle; the upper triangle is mirrored.
    pub fn from_lower(rows: [[f64; D]; D]) -> Self {
        let mut m = rows;
        for i in 0..D {
            for j in 0..i {
                m[j][i] = m[i][j];
            }
        }
        SymMatrix(Matrix(m))
    }

    pub fn zeros() -> Self {
        SymMatrix(Matrix::zeros())
    }

    pub fn identity() -> Self {
        SymMatrix(Matrix::identity())
    }

    pub fn diagonal(d: [f64; D]) -> Self {
        let mut m = Matrix::zeros();
        for i in 0..D {
            m.0[i][i] = d[i];
        }
        SymMatrix(m)
    }

    #[inline]
    pub fn as_matrix(&self) -> &Matrix<D> {
        &self.0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0 .0[i][j]
    }

    #[inline]
    pub fn mul_vec(&self, v: &[f64; D]) -> [f64; D] {
        self.0.mul_vec(v)
    }

    /// `vᵀ M v`.
    #[inline]
    pub fn quad_form(&self, v: &[f64; D]) -> f64 {
        dot(v, &self.mul_vec(v))
    }

    pub fn scale(&self, s: f64) -> Self {
        SymMatrix(self.0.scale(s))
    }

    /// `A M A` for symmetric `A`; the result is symmetrized explicitly.
    pub fn sandwich(&self, outer: &SymMatrix<D>) -> SymMatrix<D> {
        let full = outer.0.mul(&self.0).mul(&outer.0);
        let mut rows = full.0;
        for i in 0..D {
            for j in 0..i {
                let avg = 0.5 * (rows[i][j] + rows[j][i]);
                rows[i][j] = avg;
                rows[j][i] = avg;
            }
        }
        SymMatrix(Matrix(rows))
    }
}

/// Lower-triangular Cholesky factor `L` with `M = L Lᵀ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cholesky<const D: usize> {
    l: Matrix<D>,
}

/// Unpivoted Cholesky factorization.
///
/// A non-positive (or NaN) pivot is reported as
/// [`Error::NotPositiveDefinite`] with its index; the input is never
/// regularized.
pub fn cholesky<const D: usize>(m: &SymMatrix<D>) -> Result<Cholesky<D>> {
    let a = &m.as_matrix().0;
    let mut l = Matrix::<D>::zeros();
    for j in 0..D {
        let mut diag = a[j][j];
        for k in 0..j {
            diag -= l.0[j][k] * l.0[j][k];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        let ljj = diag.sqrt();
        l.0[j][j] = ljj;
        for i in (j + 1)..D {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l.0[i][k] * l.0[j][k];
            }
            l.0[i][j] = s / ljj;
        }
    }
    Ok(Cholesky { l })
}

impl<const D: usize> Cholesky<D> {
    /// Wraps an existing lower-triangular factor.
    pub fn from_factor(l: Matrix<D>) -> Self {
        Cholesky { l }
    }

    pub fn factor(&self) -> &Matrix<D> {
        &self.l
    }

    /// Solves `L y = b`.
    pub fn forward(&self, b: &[f64; D]) -> [f64; D] {
        let l = &self.l.0;
        let mut y = [0.0; D];
        for i in 0..D {
            let mut s = b[i];
            for k in 0..i {
                s -= l[i][k] * y[k];
            }
            y[i] = s / l[i][i];
        }
        y
    }

    /// Solves `Lᵀ x = y`.
    pub fn backward(&self, y: &[f64; D]) -> [f64; D] {
        let l = &self.l.0;
        let mut x = [0.0; D];
        for i in (0..D).rev() {
            let mut s = y[i];
            for k in (i + 1)..D {
                s -= l[k][i] * x[k];
            }
            x[i] = s / l[i][i];
        }
        x
    }

    /// Solves `M x = b`.
    pub fn solve(&self, b: &[f64; D]) -> [f64; D] {
        self.backward(&self.forward(b))
    }

    pub fn inverse(&self) -> SymMatrix<D> {
        let mut cols = [[0.0; D]; D];
        for (j, col) in cols.iter_mut().enumerate() {
            let mut e = [0.0; D];
            e[j] = 1.0;
            *col = self.solve(&e);
        }
        let mut rows = Matrix::from_columns(&cols).0;
        for i in 0..D {
            for j in 0..i {
                let avg = 0.5 * (rows[i][j] + rows[j][i]);
                rows[i][j] = avg;
                rows[j][i] = avg;
            }
        }
        SymMatrix(Matrix(rows))
    }

    /// `log det M = 2 Σ log L_ii`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..D).map(|i| self.l.0[i][i].ln()).sum::<f64>()
    }

    /// Draws `L z` with `z` i.i.d. standard normal, i.e. a sample of `N(0, M)`.
    pub fn sample_gaussian<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; D] {
        let z = standard_normal_vec::<D, R>(rng);
        self.l.mul_vec(&z)
    }

    /// Draws `L⁻ᵀ z`, i.e. a sample of `N(0, M⁻¹)`.
    pub fn sample_gaussian_precision<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; D] {
        let z = standard_normal_vec::<D, R>(rng);
        self.backward(&z)
    }
}

pub fn standard_normal_vec<const D: usize, R: Rng + ?Sized>(rng: &mut R) -> [f64; D] {
    let mut z = [0.0; D];
    for zi in z.iter_mut() {
        *zi = rng.sample(StandardNormal);
    }
    z
}

pub fn solve_spd<const D: usize>(m: &SymMatrix<D>, rhs: &[f64; D]) -> Result<[f64; D]> {
    Ok(cholesky(m)?.solve(rhs))
}

pub fn inverse_spd<const D: usize>(m: &SymMatrix<D>) -> Result<SymMatrix<D>> {
    Ok(cholesky(m)?.inverse())
}

pub fn log_det_spd<const D: usize>(m: &SymMatrix<D>) -> Result<f64> {
    Ok(cholesky(m)?.log_det())
}

/// Largest singular value of a (possibly nonsymmetric) square matrix.
///
/// `D = 2` uses the closed-form top eigenvalue of the Gram matrix `MᵀM`;
/// other sizes fall back to [`spectral_norm_power`].
pub fn spectral_norm<const D: usize>(m: &Matrix<D>) -> f64 {
    if D == 2 {
        let a = &m.0;
        let g00 = a[0][0] * a[0][0] + a[1][0] * a[1][0];
        let g11 = a[0][1] * a[0][1] + a[1][1] * a[1][1];
        let g01 = a[0][0] * a[0][1] + a[1][0] * a[1][1];
        let half_tr = 0.5 * (g00 + g11);
        let half_diff = 0.5 * (g00 - g11);
        let lambda = half_tr + half_diff.hypot(g01);
        lambda.max(0.0).sqrt()
    } else {
        spectral_norm_power(m)
    }
}

/// Spectral norm by power iteration on `MᵀM`, to `1e-10` relative change of
/// the Rayleigh quotient.
pub fn spectral_norm_power<const D: usize>(m: &Matrix<D>) -> f64 {
    if D == 0 {
        return 0.0;
    }
    let scale = m.max_abs();
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    // Rescale to keep the Gram products well inside the f64 range.
    let ms = m.scale(1.0 / scale);
    let gram = ms.transpose().mul(&ms);
    let mut v = [0.0; D];
    for (i, vi) in v.iter_mut().enumerate() {
        *vi = 1.0 + 0.37 * i as f64;
    }
    normalize(&mut v);
    let mut lambda = 0.0_f64;
    for _ in 0..100_000 {
        let w = gram.mul_vec(&v);
        let next = dot(&v, &w);
        let norm_w = norm2(&w);
        if norm_w == 0.0 {
            return 0.0;
        }
        v = w.map(|x| x / norm_w);
        if (next - lambda).abs() <= 1e-10 * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    // One last Rayleigh quotient at the converged direction.
    let w = gram.mul_vec(&v);
    lambda = lambda.max(dot(&v, &w));
    scale * lambda.max(0.0).sqrt()
}

#[inline]
pub fn dot<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2<const D: usize>(v: &[f64; D]) -> f64 {
    dot(v, v).sqrt()
}

#[inline]
pub fn inf_norm<const D: usize>(v: &[f64; D]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[inline]
pub fn sub<const D: usize>(a: &[f64; D], b: &[f64; D]) -> [f64; D] {
    let mut out = *a;
    out.iter_mut().zip(b).for_each(|(x, y)| *x -= y);
    out
}

/// `a + s·b`.
#[inline]
pub fn axpy<const D: usize>(a: &[f64; D], s: f64, b: &[f64; D]) -> [f64; D] {
    let mut out = *a;
    out.iter_mut().zip(b).for_each(|(x, y)| *x += s * y);
    out
}

#[inline]
pub fn all_finite<const D: usize>(v: &[f64; D]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn normalize<const D: usize>(v: &mut [f64; D]) {
    let n = norm2(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Solves a general `D×D` system by Gaussian elimination with partial
/// pivoting. Returns `None` if a pivot is zero, non-finite, or negligible
/// relative to the matrix scale.
pub fn solve_general<const D: usize>(m: &Matrix<D>, rhs: &[f64; D]) -> Option<[f64; D]> {
    let mut a = m.0;
    let mut b = *rhs;
    let scale = m.max_abs();
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    for col in 0..D {
        let piv = (col..D)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        if !(a[piv][col].abs() > 1e-13 * scale) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in (col + 1)..D {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..D {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; D];
    for i in (0..D).rev() {
        let mut s = b[i];
        for k in (i + 1)..D {
            s -= a[i][k] * x[k];
        }
        x[i] = s / a[i][i];
    }
    all_finite(&x).then_some(x)
}
