//! Parametric baselines: Poisson GLM with log link and exposure offset, and OLS.

use nalgebra::{DMatrix, DVector};

use super::AnalysisError;
use crate::kernels::{cholesky, dot};
use crate::model::Dataset;

#[derive(Debug, Clone, PartialEq)]
pub struct GlmFit {
    pub beta: Vec<f64>,
    pub iterations: usize,
}

impl GlmFit {
    /// Expected count `t exp(xᵀβ)`.
    pub fn predict(&self, x: &[f64], t: f64) -> f64 {
        t * dot(x, &self.beta).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub beta: Vec<f64>,
    /// RSS / (n − p).
    pub sigma2: f64,
}

impl OlsFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        dot(x, &self.beta)
    }
}

fn design(data: &Dataset) -> Result<(usize, usize), AnalysisError> {
    let n = data.len();
    let p = data.dim();
    if n == 0 || p == 0 {
        return Err(AnalysisError::InvalidParameter("empty design".into()));
    }
    if n < p {
        return Err(AnalysisError::RankDeficient);
    }
    Ok((n, p))
}

/// Solves the weighted normal equations `(Xᵀ W X) β = Xᵀ W z`.
fn weighted_ls(data: &Dataset, w: &[f64], z: &[f64]) -> Result<DVector<f64>, AnalysisError> {
    let p = data.dim();
    let mut xtwx = DMatrix::zeros(p, p);
    let mut xtwz = DVector::zeros(p);
    for ((x, wi), zi) in data.x.iter().zip(w).zip(z) {
        for a in 0..p {
            xtwz[a] += wi * x[a] * zi;
            for b in 0..=a {
                xtwx[(a, b)] += wi * x[a] * x[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            xtwx[(b, a)] = xtwx[(a, b)];
        }
    }
    // Relative pivot floor so collinear columns are caught at any data scale.
    let scale = (0..p).map(|a| xtwx[(a, a)]).fold(0.0, f64::max).max(1.0);
    let chol = cholesky(&(xtwx / scale)).map_err(|_| AnalysisError::RankDeficient)?;
    Ok(chol.solve(&(xtwz / scale)))
}

/// Maximum-likelihood Poisson regression by iteratively reweighted least squares.
pub fn fit_poisson_glm(data: &Dataset) -> Result<GlmFit, AnalysisError> {
    let (n, p) = design(data)?;
    let total_y: f64 = data.response.iter().sum();
    let total_t: f64 = data.exposure.iter().sum();
    if !(total_y > 0.0) {
        return Err(AnalysisError::NoConvergence { iterations: 0 });
    }
    let mut beta = DVector::zeros(p);
    beta[0] = (total_y / total_t).ln();
    let offsets: Vec<f64> = data.exposure.iter().map(|t| t.ln()).collect();
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    for it in 1..=100 {
        for i in 0..n {
            let eta_lin = dot(&data.x[i], beta.as_slice());
            let mu = (eta_lin + offsets[i]).exp();
            w[i] = mu;
            z[i] = eta_lin + (data.response[i] - mu) / mu;
        }
        let next = weighted_ls(data, &w, &z)?;
        let step = (&next - &beta).amax();
        beta = next;
        if !beta.iter().all(|b| b.is_finite()) {
            return Err(AnalysisError::NoConvergence { iterations: it });
        }
        if step <= 1e-10 * (1.0 + beta.amax()) {
            return Ok(GlmFit { beta: beta.iter().copied().collect(), iterations: it });
        }
    }
    Err(AnalysisError::NoConvergence { iterations: 100 })
}

/// Least squares via Cholesky of the normal equations.
pub fn fit_ols(data: &Dataset) -> Result<OlsFit, AnalysisError> {
    let (n, p) = design(data)?;
    let beta = weighted_ls(data, &vec![1.0; n], &data.response)?;
    let rss: f64 = data
        .x
        .iter()
        .zip(&data.response)
        .map(|(x, y)| (y - dot(x, beta.as_slice())).powi(2))
        .sum();
    let sigma2 = if n > p { rss / (n - p) as f64 } else { 0.0 };
    Ok(OlsFit { beta: beta.iter().copied().collect(), sigma2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::random::{poisson, standard_normal, uniform};
    use crate::kernels::ChainRng;
    use crate::model::Family;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    #[test]
    fn ols_exact_line() {
        let cov: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64 * 0.1]).collect();
        let y: Vec<f64> = cov.iter().map(|c| 1.5 - 2.0 * c[0] + 0.25 * c[1]).collect();
        let data = Dataset::from_covariates(Family::NormalSeverity, &["a", "b"], &cov, vec![1.0; 10], y);
        let fit = fit_ols(&data).unwrap();
        assert_relative_eq!(fit.beta[0], 1.5, epsilon = 1e-9);
        assert_relative_eq!(fit.beta[1], -2.0, epsilon = 1e-9);
        assert_relative_eq!(fit.beta[2], 0.25, epsilon = 1e-9);
        assert!(fit.sigma2 < 1e-18);
    }

    #[test]
    fn ols_rank_deficient() {
        let cov: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let data = Dataset::from_covariates(Family::NormalSeverity, &["a", "b"], &cov, vec![1.0; 10], vec![0.0; 10]);
        assert!(matches!(fit_ols(&data), Err(AnalysisError::RankDeficient)));
    }

    fn simulated(n: usize, seed: u64) -> Dataset {
        let mut rng = ChainRng::seed_from_u64(seed);
        let mut cov = Vec::new();
        let mut t = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let z = standard_normal(&mut rng);
            let ti = uniform(&mut rng, 0.5, 1.5).unwrap();
            y.push(poisson(&mut rng, ti * (0.5 - 0.3 * z).exp()).unwrap() as f64);
            cov.push(vec![z]);
            t.push(ti);
        }
        Dataset::from_covariates(Family::PoissonFrequency, &["z"], &cov, t, y)
    }

    #[test]
    fn glm_recovers_coefficients() {
        let data = simulated(5_000, 61);
        let fit = fit_poisson_glm(&data).unwrap();
        // Fisher information for the SE
        let mut info = DMatrix::<f64>::zeros(2, 2);
        for o in data.iter() {
            let mu = o.exposure * dot(o.x, &fit.beta).exp();
            for a in 0..2 {
                for b in 0..2 {
                    info[(a, b)] += mu * o.x[a] * o.x[b];
                }
            }
        }
        let cov = info.try_inverse().unwrap();
        for (j, truth) in [0.5, -0.3].into_iter().enumerate() {
            assert!((fit.beta[j] - truth).abs() < 4.0 * cov[(j, j)].sqrt(), "coef {j}: {}", fit.beta[j]);
        }
        // score equations
        for a in 0..2 {
            let score: f64 = data.iter().map(|o| (o.response - fit.predict(o.x, o.exposure)) * o.x[a]).sum();
            assert!(score.abs() < 1e-6, "{score}");
        }
    }

    #[test]
    fn glm_intercept_only_closed_form() {
        let d = simulated(300, 62);
        let data = Dataset::new(Family::PoissonFrequency, vec!["(Intercept)".into()], vec![vec![1.0]; 300], d.exposure.clone(), d.response.clone());
        let fit = fit_poisson_glm(&data).unwrap();
        let expect = (d.response.iter().sum::<f64>() / d.exposure.iter().sum::<f64>()).ln();
        assert_relative_eq!(fit.beta[0], expect, epsilon = 1e-10);
    }
}
