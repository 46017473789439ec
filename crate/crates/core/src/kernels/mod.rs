//! Numerical primitives shared by the likelihoods, samplers and predictive code.
//!
//! Everything in here is deterministic except [`random`], where all randomness
//! flows through a caller-owned RNG handle.

mod newton;
pub mod random;

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

pub use newton::{newton_maximize, NewtonOptions, NewtonResult, Objective};

/// RNG used for every chain. ChaCha is counter based, so a `(seed, stream)`
/// pair fully determines the draws.
pub type ChainRng = rand_chacha::ChaCha8Rng;

/// Smallest Cholesky pivot accepted before a matrix is declared singular.
pub const PIVOT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericError {
    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("Newton iteration did not converge after {iterations} iterations (gradient sup-norm {grad_norm:e})")]
    NoConvergence { iterations: usize, grad_norm: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> NumericError {
    NumericError::InvalidParameter(msg.into())
}

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = S`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholFactor {
    l: DMatrix<f64>,
}

impl CholFactor {
    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// `L Lᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.l * self.l.transpose()
    }

    /// ln det(S) = 2 Σ ln L_ii.
    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Solves `L z = b` by forward substitution.
    pub fn solve_lower(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut z = b.clone();
        for i in 0..n {
            let mut acc = z[i];
            for j in 0..i {
                acc -= self.l[(i, j)] * z[j];
            }
            z[i] = acc / self.l[(i, i)];
        }
        z
    }

    /// Solves `Lᵀ x = z` by back substitution.
    pub fn solve_upper(&self, z: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut x = z.clone();
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.l[(j, i)] * x[j];
            }
            x[i] = acc / self.l[(i, i)];
        }
        x
    }

    /// Solves `S x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.solve_upper(&self.solve_lower(b))
    }

    /// `S⁻¹`, symmetrized.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut inv = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            inv.set_column(j, &self.solve(&e));
        }
        (&inv + inv.transpose()) * 0.5
    }

    /// `L z`, the map from standard normal draws to N(0, S).
    pub fn mul_lower(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.l * z
    }
}

/// Cholesky factorization of a symmetric matrix. Only the lower triangle is read.
pub fn cholesky(s: &DMatrix<f64>) -> Result<CholFactor, NumericError> {
    let n = s.nrows();
    if s.ncols() != n {
        return Err(invalid(format!("cholesky of non-square {}x{} matrix", n, s.ncols())));
    }
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = s[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if !(pivot > PIVOT_FLOOR) {
            return Err(NumericError::NotPositiveDefinite { row: j, pivot });
        }
        let d = pivot.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut acc = s[(i, j)];
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = acc / d;
        }
    }
    Ok(CholFactor { l })
}

/// `ln Σ exp(v_i)`, shifted by the maximum. Empty or all `-inf` input gives `-inf`.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = v.iter().map(|x| (x - max).exp()).sum();
    max + sum.ln()
}

/// `ln(y!)` through the log-gamma function.
pub fn ln_factorial(y: f64) -> f64 {
    if y < 2.0 {
        0.0
    } else {
        ln_gamma(y + 1.0)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sup_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
