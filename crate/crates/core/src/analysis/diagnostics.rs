//! Scalar-trace MCMC diagnostics: effective sample size, Geweke z, autocorrelation.

use super::AnalysisError;

pub const MIN_SERIES_LEN: usize = 100;
pub const DEFAULT_LAGS: [usize; 5] = [1, 5, 10, 20, 50];

#[derive(Debug, Clone, PartialEq)]
pub struct ChainDiagnostics {
    pub n: usize,
    pub mean: f64,
    pub ess: f64,
    pub geweke_z: f64,
    /// (lag, autocorrelation)
    pub acf: Vec<(usize, f64)>,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Biased (divide-by-n) autocovariance at `lag`.
fn autocov(x: &[f64], m: f64, lag: usize) -> f64 {
    let n = x.len();
    x[..n - lag].iter().zip(&x[lag..]).map(|(a, b)| (a - m) * (b - m)).sum::<f64>() / n as f64
}

/// Sample autocorrelations at the given lags (lags ≥ n are skipped).
pub fn autocorrelation(x: &[f64], lags: &[usize]) -> Vec<(usize, f64)> {
    let m = mean(x);
    let g0 = autocov(x, m, 0);
    lags.iter().filter(|&&k| k < x.len()).map(|&k| (k, autocov(x, m, k) / g0)).collect()
}

/// Integrated autocorrelation time by Geyer's initial positive sequence:
/// τ = -1 + 2 Σ_m (ρ_{2m} + ρ_{2m+1}), summed while pair sums stay positive.
fn autocorrelation_time(x: &[f64]) -> Option<f64> {
    let n = x.len();
    let m = mean(x);
    let g0 = autocov(x, m, 0);
    if !(g0 > 0.0) {
        return None;
    }
    let mut tau = -1.0;
    let mut k = 0;
    while k + 1 < n {
        let pair = (autocov(x, m, k) + autocov(x, m, k + 1)) / g0;
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        k += 2;
    }
    Some(tau.max(1.0 / n as f64))
}

/// Long-run variance γ₀·τ; zero for constant segments.
fn long_run_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    let g0 = autocov(x, m, 0);
    autocorrelation_time(x).map_or(0.0, |tau| g0 * tau)
}

pub fn effective_sample_size(x: &[f64]) -> Result<f64, AnalysisError> {
    check(x)?;
    let tau = autocorrelation_time(x).ok_or(AnalysisError::DegenerateSeries)?;
    Ok(x.len() as f64 / tau)
}

/// Geweke z comparing the first 10% with the last 50% of the series.
pub fn geweke_z(x: &[f64]) -> Result<f64, AnalysisError> {
    check(x)?;
    let n = x.len();
    let a = &x[..n / 10];
    let b = &x[n - n / 2..];
    let se2 = long_run_variance(a) / a.len() as f64 + long_run_variance(b) / b.len() as f64;
    let diff = mean(a) - mean(b);
    if se2 > 0.0 {
        Ok(diff / se2.sqrt())
    } else if diff == 0.0 {
        Ok(0.0)
    } else {
        Ok(diff.signum() * f64::INFINITY)
    }
}

fn check(x: &[f64]) -> Result<(), AnalysisError> {
    if x.len() < MIN_SERIES_LEN {
        return Err(AnalysisError::SeriesTooShort { len: x.len(), min: MIN_SERIES_LEN });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(AnalysisError::InvalidParameter("non-finite value in series".into()));
    }
    let first = x[0];
    if x.iter().all(|v| *v == first) {
        return Err(AnalysisError::DegenerateSeries);
    }
    Ok(())
}

pub fn chain_diagnostics(x: &[f64]) -> Result<ChainDiagnostics, AnalysisError> {
    check(x)?;
    Ok(ChainDiagnostics {
        n: x.len(),
        mean: mean(x),
        ess: effective_sample_size(x)?,
        geweke_z: geweke_z(x)?,
        acf: autocorrelation(x, &DEFAULT_LAGS),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::random::standard_normal;
    use crate::kernels::ChainRng;
    use rand::SeedableRng;

    fn ar1(rho: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChainRng::seed_from_u64(seed);
        let mut x = Vec::with_capacity(n);
        let mut v = standard_normal(&mut rng) / (1.0 - rho * rho).sqrt();
        for _ in 0..n {
            x.push(v);
            v = rho * v + standard_normal(&mut rng);
        }
        x
    }

    #[test]
    fn iid_ess() {
        for seed in 0..5 {
            let ess = effective_sample_size(&ar1(0.0, 10_000, seed)).unwrap();
            assert!((8_500.0..=11_500.0).contains(&ess), "seed {seed}: {ess}");
        }
    }

    #[test]
    fn ar1_ess() {
        let n = 100_000;
        let expect = n as f64 * 0.1 / 1.9;
        for seed in 0..3 {
            let ess = effective_sample_size(&ar1(0.9, n, 100 + seed)).unwrap();
            assert!((ess / expect - 1.0).abs() < 0.3, "{ess} vs {expect}");
        }
    }

    #[test]
    fn constant_series_is_degenerate() {
        assert!(matches!(chain_diagnostics(&[2.0; 500]), Err(AnalysisError::DegenerateSeries)));
        assert!(matches!(chain_diagnostics(&[1.0, 2.0]), Err(AnalysisError::SeriesTooShort { .. })));
    }

    #[test]
    fn geweke_stationary_vs_shift() {
        let x = ar1(0.5, 20_000, 7);
        assert!(geweke_z(&x).unwrap().abs() < 4.0);
        let shifted: Vec<f64> =
            x.iter().enumerate().map(|(i, v)| if i >= 10_000 { v + 1.0 } else { *v }).collect();
        assert!(geweke_z(&shifted).unwrap() < -10.0);
    }

    #[test]
    fn acf_of_ar1() {
        let x = ar1(0.8, 200_000, 8);
        let acf = autocorrelation(&x, &[1, 2, 500_000]);
        assert_eq!(acf.len(), 2);
        assert!((acf[0].1 - 0.8).abs() < 0.01);
        assert!((acf[1].1 - 0.64).abs() < 0.015);
    }
}
