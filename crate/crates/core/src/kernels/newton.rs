use nalgebra::{DMatrix, DVector};

use super::{cholesky, sup_norm, CholFactor, NumericError};

/// A twice-differentiable function to be maximized.
pub trait Objective {
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Convergence threshold on the gradient sup-norm.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 100, max_halvings: 30 }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonResult {
    pub mode: DVector<f64>,
    /// `(-H(mode))⁻¹`.
    pub covariance: DMatrix<f64>,
    /// Cholesky factor of `-H(mode)`.
    pub precision: CholFactor,
    pub value: f64,
    pub iterations: usize,
}

impl NewtonResult {
    /// ln |Σ̂| = -ln |-H|.
    pub fn log_det_covariance(&self) -> f64 {
        -self.precision.log_det()
    }
}

/// Damped Newton ascent. Each step solves `(-H) s = g`; the step is halved
/// until the objective does not decrease.
pub fn newton_maximize<O: Objective + ?Sized>(
    objective: &O,
    init: &DVector<f64>,
    opts: &NewtonOptions,
) -> Result<NewtonResult, NumericError> {
    if !(opts.tol > 0.0) {
        return Err(super::invalid("Newton tolerance must be positive"));
    }
    let mut x = init.clone();
    let mut fx = objective.value(&x);
    if !fx.is_finite() {
        return Err(super::invalid("objective is not finite at the initial point"));
    }
    let mut iterations = 0;
    loop {
        let grad = objective.gradient(&x);
        let grad_norm = sup_norm(&grad);
        if grad_norm <= opts.tol {
            let precision = cholesky(&-objective.hessian(&x))?;
            return Ok(NewtonResult {
                covariance: precision.inverse(),
                precision,
                mode: x,
                value: fx,
                iterations,
            });
        }
        if iterations == opts.max_iter || !grad_norm.is_finite() {
            return Err(NumericError::NoConvergence { iterations, grad_norm });
        }
        let neg_hess = cholesky(&-objective.hessian(&x))?;
        let step = neg_hess.solve(&grad);
        // Allow rounding-level decreases: close to the mode the gain is below one ulp of f.
        let slack = 4.0 * f64::EPSILON * fx.abs().max(1.0);
        let mut scale = 1.0;
        let mut moved = false;
        for _ in 0..=opts.max_halvings {
            let candidate = &x + &step * scale;
            let fc = objective.value(&candidate);
            if fc.is_finite() && fc >= fx - slack {
                x = candidate;
                fx = fc;
                moved = true;
                break;
            }
            scale *= 0.5;
        }
        iterations += 1;
        if !moved {
            return Err(NumericError::NoConvergence { iterations, grad_norm });
        }
    }
}
