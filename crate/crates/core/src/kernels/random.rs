//! Random variate generation. Gamma is parameterized by rate, inverse-gamma by scale.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{invalid, log_sum_exp, CholFactor, NumericError};

pub fn gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> Result<f64, NumericError> {
    if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
        return Err(invalid(format!("Gamma(shape={shape}, rate={rate})")));
    }
    let dist = rand_distr::Gamma::new(shape, 1.0 / rate)
        .map_err(|e| invalid(format!("Gamma(shape={shape}, rate={rate}): {e}")))?;
    Ok(dist.sample(rng))
}

pub fn inverse_gamma<R: Rng + ?Sized>(
    rng: &mut R,
    shape: f64,
    scale: f64,
) -> Result<f64, NumericError> {
    Ok(1.0 / gamma(rng, shape, scale)?)
}

pub fn beta<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> Result<f64, NumericError> {
    let dist = rand_distr::Beta::new(a, b).map_err(|e| invalid(format!("Beta({a}, {b}): {e}")))?;
    Ok(dist.sample(rng))
}

pub fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> Result<f64, NumericError> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(invalid(format!("Uniform({lo}, {hi})")));
    }
    Ok(lo + (hi - lo) * rng.random::<f64>())
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, var: f64) -> Result<f64, NumericError> {
    if !(var >= 0.0) || !mean.is_finite() || !var.is_finite() {
        return Err(invalid(format!("Normal(mean={mean}, var={var})")));
    }
    Ok(mean + var.sqrt() * standard_normal(rng))
}

/// Draws from N(mean, L Lᵀ).
pub fn mvn<R: Rng + ?Sized>(rng: &mut R, mean: &DVector<f64>, chol: &CholFactor) -> DVector<f64> {
    let z = DVector::from_fn(mean.len(), |_, _| standard_normal(rng));
    mean + chol.mul_lower(&z)
}

/// Log density of N(mean, L Lᵀ) at `x`.
pub fn mvn_log_density(x: &DVector<f64>, mean: &DVector<f64>, chol: &CholFactor) -> f64 {
    let z = chol.solve_lower(&(x - mean));
    let p = x.len() as f64;
    -0.5 * p * (2.0 * std::f64::consts::PI).ln() - 0.5 * chol.log_det() - 0.5 * z.norm_squared()
}

pub fn poisson<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> Result<u64, NumericError> {
    if lambda == 0.0 {
        return Ok(0);
    }
    let dist =
        rand_distr::Poisson::new(lambda).map_err(|e| invalid(format!("Poisson({lambda}): {e}")))?;
    Ok(dist.sample(rng) as u64)
}

/// Draws an index with probability proportional to `exp(log_weights[i])`.
pub fn categorical_log<R: Rng + ?Sized>(
    rng: &mut R,
    log_weights: &[f64],
) -> Result<usize, NumericError> {
    if log_weights.iter().any(|w| w.is_nan() || *w == f64::INFINITY) {
        return Err(invalid("categorical log-weight is NaN or +inf"));
    }
    let norm = log_sum_exp(log_weights);
    if norm == f64::NEG_INFINITY {
        return Err(invalid("categorical log-weights are all -inf"));
    }
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut last = 0;
    for (i, w) in log_weights.iter().enumerate() {
        if *w == f64::NEG_INFINITY {
            continue;
        }
        cum += (w - norm).exp();
        last = i;
        if u < cum {
            return Ok(i);
        }
    }
    Ok(last)
}
