use rand::SeedableRng;

use super::DataError;
use crate::kernels::random::{normal, poisson, standard_normal, uniform};
use crate::kernels::{dot, ChainRng};
use crate::model::{Dataset, Family, FreqParams, SevParams};

/// Mixture to simulate from; weights must be nonnegative and sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub enum MixtureSpec {
    Frequency(Vec<(f64, FreqParams)>),
    Severity(Vec<(f64, SevParams)>),
}

impl MixtureSpec {
    fn weights(&self) -> Vec<f64> {
        match self {
            MixtureSpec::Frequency(c) => c.iter().map(|(w, _)| *w).collect(),
            MixtureSpec::Severity(c) => c.iter().map(|(w, _)| *w).collect(),
        }
    }

    fn dims(&self) -> Vec<usize> {
        match self {
            MixtureSpec::Frequency(c) => c.iter().map(|(_, p)| p.beta.len()).collect(),
            MixtureSpec::Severity(c) => c.iter().map(|(_, p)| p.beta.len()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulated {
    /// Raw covariates `x1..xk`, not standardized.
    pub data: Dataset,
    /// Zero-based component index per row.
    pub labels: Vec<usize>,
}

/// Draws `n` rows from a finite mixture of regressions with N(0, 1) covariates.
/// Frequency exposures are Uniform(0.5, 1.5); severity exposures are 1.
pub fn simulate(mixture: &MixtureSpec, n: usize, seed: u64) -> Result<Simulated, DataError> {
    let weights = mixture.weights();
    if weights.is_empty() || weights.iter().any(|w| !(*w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(DataError::InvalidParameter(format!("mixture weights {weights:?} must be nonnegative and sum to 1")));
    }
    let dims = mixture.dims();
    let p = dims[0];
    if p == 0 || dims.iter().any(|&d| d != p) {
        return Err(DataError::InvalidParameter("components must share a nonzero coefficient length".into()));
    }
    if let MixtureSpec::Severity(c) = mixture {
        if c.iter().any(|(_, s)| !(s.sigma2 > 0.0)) {
            return Err(DataError::InvalidParameter("severity variance must be positive".into()));
        }
    }
    let cum: Vec<f64> = weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let mut rng = ChainRng::seed_from_u64(seed);
    let names: Vec<String> = (1..p).map(|j| format!("x{j}")).collect();
    let (mut cov, mut t, mut y, mut labels) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let numeric = |e| DataError::InvalidParameter(format!("{e}"));
    for _ in 0..n {
        let u = uniform(&mut rng, 0.0, 1.0).map_err(numeric)?;
        let c = cum.iter().position(|&s| u < s).unwrap_or(cum.len() - 1);
        let raw: Vec<f64> = (1..p).map(|_| standard_normal(&mut rng)).collect();
        let mut x = vec![1.0];
        x.extend(&raw);
        match mixture {
            MixtureSpec::Frequency(comp) => {
                let ti = uniform(&mut rng, 0.5, 1.5).map_err(numeric)?;
                let lambda = ti * dot(&x, comp[c].1.beta.as_slice()).exp();
                y.push(poisson(&mut rng, lambda).map_err(numeric)? as f64);
                t.push(ti);
            }
            MixtureSpec::Severity(comp) => {
                let s = &comp[c].1;
                y.push(normal(&mut rng, dot(&x, s.beta.as_slice()), s.sigma2).map_err(numeric)?);
                t.push(1.0);
            }
        }
        cov.push(raw);
        labels.push(c);
    }
    let family = match mixture {
        MixtureSpec::Frequency(_) => Family::PoissonFrequency,
        MixtureSpec::Severity(_) => Family::NormalSeverity,
    };
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    Ok(Simulated { data: Dataset::from_covariates(family, &name_refs, &cov, t, y), labels })
}
