//! Concentration and discount updates: Escobar–West for the DP, adaptive
//! Metropolis-within-Gibbs on (logit d, ln(α + d)) for Pitman–Yor.

use rand::Rng;
use statrs::function::gamma::ln_gamma;

use crate::kernels::random::{beta, gamma, standard_normal};
use crate::kernels::{invalid, NumericError};
use crate::model::{GammaPrior, LogNormalPrior};

/// Odds π/(1-π) of the first Gamma component in the Escobar–West mixture.
pub fn escobar_west_odds(prior: GammaPrior, k: usize, n: usize, eta: f64) -> f64 {
    (prior.shape + k as f64 - 1.0) / (n as f64 * (prior.rate - eta.ln()))
}

/// One Escobar–West draw of α given K occupied clusters among n observations.
pub fn update_alpha_dp<R: Rng + ?Sized>(
    alpha: f64,
    k: usize,
    n: usize,
    prior: GammaPrior,
    rng: &mut R,
) -> Result<f64, NumericError> {
    if !(alpha > 0.0) || k == 0 || n == 0 {
        return Err(invalid(format!("Escobar-West update with alpha={alpha}, K={k}, n={n}")));
    }
    let eta = beta(rng, alpha + 1.0, n as f64)?;
    let odds = escobar_west_odds(prior, k, n, eta);
    let pi = odds / (1.0 + odds);
    let rate = prior.rate - eta.ln();
    let shape = if rng.random::<f64>() < pi {
        prior.shape + k as f64
    } else {
        prior.shape + k as f64 - 1.0
    };
    gamma(rng, shape, rate)
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `ln S(n, j)` for j = 0..=n where `S(n, j) = C(n, j; d) / d^j` and C are the
/// generalized factorial coefficients. `S` satisfies
/// `S(m+1, j) = (m - j d) S(m, j) + S(m, j-1)`, `S(1, 1) = 1`, and reduces to
/// unsigned Stirling numbers of the first kind at d = 0.
pub fn log_scaled_gen_factorial(n: usize, d: f64) -> Vec<f64> {
    let mut row = vec![f64::NEG_INFINITY; n + 1];
    if n == 0 {
        row[0] = 0.0;
        return row;
    }
    row[1] = 0.0;
    for m in 1..n {
        // Fill S(m+1, ·) in place from the top so S(m, j-1) is still unread.
        for j in (1..=m + 1).rev() {
            let stay = if j <= m { ((m as f64) - j as f64 * d).ln() + row[j] } else { f64::NEG_INFINITY };
            row[j] = log_add_exp(stay, row[j - 1]);
        }
    }
    row
}

fn check_py(n: usize, d: f64, alpha: f64) -> Result<(), NumericError> {
    if n == 0 || !(0.0..1.0).contains(&d) || !(alpha > -d) || !alpha.is_finite() {
        return Err(invalid(format!("Pitman-Yor parameters n={n}, d={d}, alpha={alpha}")));
    }
    Ok(())
}

/// ln Π_{i=1}^{K-1} (α + i d) - ln (α+1)_{n-1}, both as plain log sums.
fn log_urn_prefix(n: usize, k: usize, d: f64, alpha: f64) -> f64 {
    let prod: f64 = (1..k).map(|i| (alpha + i as f64 * d).ln()).sum();
    let rising: f64 = (1..n).map(|i| (alpha + i as f64).ln()).sum();
    prod - rising
}

/// ln Pr(K_n = K | d, α) for the Pitman–Yor (d > 0) or Dirichlet (d = 0) process.
pub fn kn_log_pmf(n: usize, k: usize, d: f64, alpha: f64) -> Result<f64, NumericError> {
    check_py(n, d, alpha)?;
    if k == 0 || k > n {
        return Err(invalid(format!("K={k} outside 1..={n}")));
    }
    Ok(log_urn_prefix(n, k, d, alpha) + log_scaled_gen_factorial(n, d)[k])
}

/// The full pmf of K_n on 1..=n, as log masses (index 0 is K = 1).
pub fn kn_log_pmf_all(n: usize, d: f64, alpha: f64) -> Result<Vec<f64>, NumericError> {
    check_py(n, d, alpha)?;
    let s = log_scaled_gen_factorial(n, d);
    Ok((1..=n).map(|k| log_urn_prefix(n, k, d, alpha) + s[k]).collect())
}

/// Log exchangeable partition probability of blocks with the given sizes.
pub fn py_log_eppf(sizes: &[usize], d: f64, alpha: f64) -> Result<f64, NumericError> {
    let n: usize = sizes.iter().sum();
    check_py(n, d, alpha)?;
    if sizes.iter().any(|&s| s == 0) {
        return Err(invalid("empty block in partition"));
    }
    let blocks: f64 = sizes.iter().map(|&s| ln_gamma(s as f64 - d) - ln_gamma(1.0 - d)).sum();
    Ok(log_urn_prefix(n, sizes.len(), d, alpha) + blocks)
}

/// Index of each Pitman–Yor move in [`AdaptiveScales`].
pub const DISCOUNT_MOVE: usize = 0;
pub const STRENGTH_MOVE: usize = 1;

/// Batch-adapted random-walk log-scales for the two Pitman–Yor moves.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveScales {
    pub log_scales: [f64; 2],
    pub batch_len: usize,
    pub target: f64,
    batches: usize,
    in_batch: usize,
    accepts: [usize; 2],
}

impl AdaptiveScales {
    pub fn new(log_scales: [f64; 2], batch_len: usize, target: f64) -> Self {
        Self { log_scales, batch_len: batch_len.max(1), target, batches: 0, in_batch: 0, accepts: [0; 2] }
    }

    pub fn batches(&self) -> usize {
        self.batches
    }

    /// Records one iteration's outcomes; at the end of a batch each log-scale
    /// moves by `min(0.01, b^{-1/2})` toward the target acceptance rate.
    pub fn record(&mut self, accepted: [bool; 2]) {
        for (a, acc) in self.accepts.iter_mut().zip(accepted) {
            *a += acc as usize;
        }
        self.in_batch += 1;
        if self.in_batch < self.batch_len {
            return;
        }
        self.batches += 1;
        let delta = 0.01f64.min((self.batches as f64).powf(-0.5));
        for (ls, a) in self.log_scales.iter_mut().zip(self.accepts) {
            let rate = a as f64 / self.batch_len as f64;
            if rate > self.target {
                *ls += delta;
            } else if rate < self.target {
                *ls -= delta;
            }
        }
        self.in_batch = 0;
        self.accepts = [0; 2];
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PyHyperStep {
    pub discount: f64,
    pub alpha: f64,
    pub accepted: [bool; 2],
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Log target in (u, v) = (logit d, ln(α + d)) coordinates, Jacobians included.
fn transformed_log_target<F: Fn(f64, f64) -> f64>(
    u: f64,
    v: f64,
    prior: LogNormalPrior,
    loglik: &F,
) -> f64 {
    let d = sigmoid(u);
    let s = v.exp();
    if !(d > 0.0 && d < 1.0) || !(s > 0.0) || !s.is_finite() {
        return f64::NEG_INFINITY;
    }
    let alpha = s - d;
    if !(alpha > -d) {
        return f64::NEG_INFINITY;
    }
    let ll = loglik(d, alpha);
    if ll.is_nan() {
        return f64::NEG_INFINITY;
    }
    ll + d.ln() + (1.0 - d).ln() + prior.ln_pdf(s) + v
}

/// Two Metropolis-within-Gibbs moves for the Pitman–Yor hyperparameters.
///
/// `loglik(d, α)` is the likelihood of the current partition; the prior is
/// Uniform(0, 1) on d and `prior` on α + d.
pub fn update_py_hyper<R, F>(
    discount: f64,
    alpha: f64,
    prior: LogNormalPrior,
    log_scales: [f64; 2],
    loglik: F,
    rng: &mut R,
) -> Result<PyHyperStep, NumericError>
where
    R: Rng + ?Sized,
    F: Fn(f64, f64) -> f64,
{
    if !(discount > 0.0 && discount < 1.0) || !(alpha > -discount) {
        return Err(invalid(format!("Pitman-Yor state d={discount}, alpha={alpha}")));
    }
    let mut u = logit(discount);
    let mut v = (alpha + discount).ln();
    let mut current = transformed_log_target(u, v, prior, &loglik);
    let mut accepted = [false; 2];

    let u_prop = u + log_scales[DISCOUNT_MOVE].exp() * standard_normal(rng);
    let t = transformed_log_target(u_prop, v, prior, &loglik);
    if rng.random::<f64>().ln() < t - current {
        u = u_prop;
        current = t;
        accepted[DISCOUNT_MOVE] = true;
    }

    let v_prop = v + log_scales[STRENGTH_MOVE].exp() * standard_normal(rng);
    let t = transformed_log_target(u, v_prop, prior, &loglik);
    if rng.random::<f64>().ln() < t - current {
        v = v_prop;
        accepted[STRENGTH_MOVE] = true;
    }

    let d = sigmoid(u);
    Ok(PyHyperStep { discount: d, alpha: v.exp() - d, accepted })
}
