//! Component log-likelihoods, base-measure draws, the normal-inverse-gamma
//! conjugate update, and the two base-measure marginals ∫ f(y | θ) G₀(dθ).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use statrs::function::gamma::ln_gamma;

use crate::kernels::random::{inverse_gamma, mvn, standard_normal};
use crate::kernels::{
    cholesky, dot, invalid, ln_factorial, newton_maximize, CholFactor, NewtonOptions, NumericError,
    Objective,
};
use crate::model::{FreqParams, Observation, SevParams};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Poisson log pmf of `y` with mean `t · exp(xᵀβ)`.
pub fn freq_loglik(y: f64, t: f64, x: &[f64], beta: &[f64]) -> f64 {
    debug_assert!(t > 0.0);
    let eta = dot(x, beta);
    let log_mu = t.ln() + eta;
    y * log_mu - log_mu.exp() - ln_factorial(y)
}

/// Normal log density with variance `var`, unchecked.
pub fn normal_ln_pdf(y: f64, mean: f64, var: f64) -> f64 {
    let r = y - mean;
    -0.5 * (LN_2PI + var.ln()) - 0.5 * r * r / var
}

/// Normal log density of `y` with mean `xᵀβ` and variance `sigma2`.
pub fn sev_loglik(y: f64, x: &[f64], beta: &[f64], sigma2: f64) -> Result<f64, NumericError> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(invalid(format!("severity variance {sigma2} must be positive")));
    }
    Ok(normal_ln_pdf(y, dot(x, beta), sigma2))
}

/// β ~ N(0, I).
pub fn base_draw_freq<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> FreqParams {
    FreqParams { beta: DVector::from_fn(dim, |_, _| standard_normal(rng)) }
}

/// σ² ~ IG(a, b), then β | σ² ~ N(0, n0 σ² I).
pub fn base_draw_sev<R: Rng + ?Sized>(
    dim: usize,
    n0: f64,
    a: f64,
    b: f64,
    rng: &mut R,
) -> Result<SevParams, NumericError> {
    let sigma2 = inverse_gamma(rng, a, b)?;
    let sd = (n0 * sigma2).sqrt();
    Ok(SevParams { beta: DVector::from_fn(dim, |_, _| sd * standard_normal(rng)), sigma2 })
}

/// Conjugate posterior for one severity cluster:
/// σ² ~ IG(shape, scale), β | σ² ~ N(mean, σ² · cov).
#[derive(Debug, Clone)]
pub struct NigParams {
    pub mean: DVector<f64>,
    /// `(XᵀX + I/n0)⁻¹`.
    pub cov: DMatrix<f64>,
    pub cov_chol: CholFactor,
    pub shape: f64,
    pub scale: f64,
}

impl NigParams {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SevParams, NumericError> {
        let sigma2 = inverse_gamma(rng, self.shape, self.scale)?;
        let z = mvn(rng, &DVector::zeros(self.mean.len()), &self.cov_chol);
        Ok(SevParams { beta: &self.mean + z * sigma2.sqrt(), sigma2 })
    }
}

/// Normal-inverse-gamma update from the rows `(x, y)` of one cluster.
pub fn nig_posterior<'a, I>(rows: I, n0: f64, a: f64, b: f64) -> Result<NigParams, NumericError>
where
    I: IntoIterator<Item = (&'a [f64], f64)>,
{
    let mut rows = rows.into_iter().peekable();
    let dim = match rows.peek() {
        Some((x, _)) => x.len(),
        None => return Err(invalid("conjugate update of an empty cluster")),
    };
    let mut precision = DMatrix::identity(dim, dim) / n0;
    let mut xty = DVector::zeros(dim);
    let mut yty = 0.0;
    let mut m = 0usize;
    for (x, y) in rows {
        for i in 0..dim {
            xty[i] += x[i] * y;
            for j in 0..=i {
                precision[(i, j)] += x[i] * x[j];
            }
        }
        yty += y * y;
        m += 1;
    }
    for i in 0..dim {
        for j in 0..i {
            precision[(j, i)] = precision[(i, j)];
        }
    }
    let prec_chol = cholesky(&precision)?;
    let mean = prec_chol.solve(&xty);
    let cov = prec_chol.inverse();
    let cov_chol = cholesky(&cov)?;
    // yᵀy - β_nᵀ(XᵀX + I/n0)β_n = yᵀy - β_nᵀXᵀy ≥ 0; clamp rounding.
    let resid = (yty - mean.dot(&xty)).max(0.0);
    Ok(NigParams { mean, cov, cov_chol, shape: a + 0.5 * m as f64, scale: b + 0.5 * resid })
}

/// Closed-form ln ∫ N(y; xᵀβ, σ²) dG₀(β, σ²) under the severity base measure.
pub fn nig_marginal_sev_ln(y: f64, x: &[f64], n0: f64, a: f64, b: f64) -> Result<f64, NumericError> {
    if !(n0 > 0.0 && a > 0.0 && b > 0.0) {
        return Err(invalid(format!("NIG marginal needs n0, a, b > 0 (got {n0}, {a}, {b})")));
    }
    let p = x.len();
    let xv = DVector::from_column_slice(x);
    let m = &xv * xv.transpose() + DMatrix::identity(p, p) / n0;
    let chol = cholesky(&m)?;
    let d = &xv * y;
    let quad = d.dot(&chol.solve(&d));
    let denom = b + 0.5 * y * y - 0.5 * quad;
    Ok(-0.5 * LN_2PI - 0.5 * p as f64 * n0.ln() + a * b.ln() - ln_gamma(a) - 0.5 * chol.log_det()
        + ln_gamma(a + 0.5)
        - (a + 0.5) * denom.ln())
}

/// Density form of [`nig_marginal_sev_ln`].
pub fn nig_marginal_sev(y: f64, x: &[f64], n0: f64, a: f64, b: f64) -> Result<f64, NumericError> {
    nig_marginal_sev_ln(y, x, n0, a, b).map(f64::exp)
}

/// `h(β) = -t·exp(xᵀβ) + y(ln t + xᵀβ) - ½βᵀβ`, the log integrand of the
/// frequency base marginal up to `-ln y!` and the normal constant.
#[derive(Debug, Clone)]
pub struct PredictiveIntegrand<'a> {
    pub y: f64,
    pub t: f64,
    pub x: &'a [f64],
}

impl Objective for PredictiveIntegrand<'_> {
    fn value(&self, beta: &DVector<f64>) -> f64 {
        let eta = dot(self.x, beta.as_slice());
        -self.t * eta.exp() + self.y * (self.t.ln() + eta) - 0.5 * beta.norm_squared()
    }

    fn gradient(&self, beta: &DVector<f64>) -> DVector<f64> {
        let mu = self.t * dot(self.x, beta.as_slice()).exp();
        DVector::from_fn(beta.len(), |i, _| (self.y - mu) * self.x[i] - beta[i])
    }

    fn hessian(&self, beta: &DVector<f64>) -> DMatrix<f64> {
        let mu = self.t * dot(self.x, beta.as_slice()).exp();
        let p = beta.len();
        DMatrix::from_fn(p, p, |i, j| -mu * self.x[i] * self.x[j] - if i == j { 1.0 } else { 0.0 })
    }
}

/// Log posterior of one Poisson cluster under the N(0, I) base measure,
/// `ln N(β; 0, I) + Σ_rows ln Poisson(y | t exp(xᵀβ))`.
#[derive(Debug, Clone)]
pub struct ClusterLogPosterior<'a> {
    pub rows: Vec<Observation<'a>>,
}

impl Objective for ClusterLogPosterior<'_> {
    fn value(&self, beta: &DVector<f64>) -> f64 {
        let prior = -0.5 * beta.len() as f64 * LN_2PI - 0.5 * beta.norm_squared();
        prior
            + self
                .rows
                .iter()
                .map(|o| freq_loglik(o.response, o.exposure, o.x, beta.as_slice()))
                .sum::<f64>()
    }

    fn gradient(&self, beta: &DVector<f64>) -> DVector<f64> {
        let mut g = -beta.clone();
        for o in &self.rows {
            let r = o.response - o.exposure * dot(o.x, beta.as_slice()).exp();
            for (gi, xi) in g.iter_mut().zip(o.x) {
                *gi += r * xi;
            }
        }
        g
    }

    fn hessian(&self, beta: &DVector<f64>) -> DMatrix<f64> {
        let p = beta.len();
        let mut h = -DMatrix::identity(p, p);
        for o in &self.rows {
            let mu = o.exposure * dot(o.x, beta.as_slice()).exp();
            for i in 0..p {
                for j in 0..=i {
                    h[(i, j)] -= mu * o.x[i] * o.x[j];
                }
            }
        }
        for i in 0..p {
            for j in 0..i {
                h[(j, i)] = h[(i, j)];
            }
        }
        h
    }
}

/// Laplace approximation of the frequency base marginal.
#[derive(Debug, Clone)]
pub struct LaplaceResult {
    pub mode: DVector<f64>,
    pub covariance: DMatrix<f64>,
    /// ln of `exp(h(β̂)) |Σ̂|^{1/2} / y!`.
    pub log_marginal: f64,
}

/// Laplace approximation of ∫ Poisson(y | t exp(xᵀβ)) N(β; 0, I) dβ.
pub fn laplace_marginal_freq(y: f64, t: f64, x: &[f64]) -> Result<LaplaceResult, NumericError> {
    if !(t > 0.0) {
        return Err(invalid(format!("exposure {t} must be positive")));
    }
    let h = PredictiveIntegrand { y, t, x };
    let r = newton_maximize(&h, &DVector::zeros(x.len()), &NewtonOptions::default())?;
    let log_marginal = r.value + 0.5 * r.log_det_covariance() - ln_factorial(y);
    Ok(LaplaceResult { mode: r.mode, covariance: r.covariance, log_marginal })
}

/// Gaussian independence proposal for a cluster's β.
#[derive(Debug, Clone)]
pub struct GaussianProposal {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub chol: CholFactor,
}

impl GaussianProposal {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self, NumericError> {
        let chol = cholesky(&cov)?;
        Ok(Self { mean, cov, chol })
    }

    /// N(0, I), used when mode finding fails.
    pub fn prior(dim: usize) -> Self {
        Self::new(DVector::zeros(dim), DMatrix::identity(dim, dim)).expect("identity is SPD")
    }
}

/// Mode and inverse negative Hessian of the cluster log posterior.
pub fn laplace_cluster_proposal(rows: &[Observation<'_>]) -> Result<GaussianProposal, NumericError> {
    let Some(first) = rows.first() else {
        return Err(invalid("Laplace proposal for an empty cluster"));
    };
    let target = ClusterLogPosterior { rows: rows.to_vec() };
    let r = newton_maximize(&target, &DVector::zeros(first.x.len()), &NewtonOptions::default())?;
    GaussianProposal::new(r.mode, r.covariance)
}
