//! Domain types shared by every stage: datasets, model configuration,
//! cluster parameters, chain state and saved posterior draws.

mod dataset;
pub mod format;
mod state;
mod validate;

pub use dataset::{ColumnScale, Dataset, Observation, Standardization};
pub use state::{
    canonical_labels, AcceptanceRates, Cluster, ClusterState, DrawsMeta, PosteriorDraws, SavedState,
    StateError,
};
pub use validate::{validate, ValidationIssue, ValidationReport};

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

/// Response family of the mixture components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Poisson regression with log link and exposure offset.
    PoissonFrequency,
    /// Normal regression on the log claim amount.
    NormalSeverity,
}

/// Random-measure prior on the mixing distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Process {
    Dirichlet,
    PitmanYor,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::PoissonFrequency => "poisson-frequency",
            Family::NormalSeverity => "normal-severity",
        })
    }
}

impl FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "poisson-frequency" | "frequency" | "freq" => Ok(Family::PoissonFrequency),
            "normal-severity" | "severity" | "sev" => Ok(Family::NormalSeverity),
            other => Err(format!("unknown family '{other}'")),
        }
    }
}

impl fmt::Display for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Process::Dirichlet => "dp",
            Process::PitmanYor => "py",
        })
    }
}

impl FromStr for Process {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dp" | "dirichlet" => Ok(Process::Dirichlet),
            "py" | "pitman-yor" | "pitmanyor" => Ok(Process::PitmanYor),
            other => Err(format!("unknown process '{other}'")),
        }
    }
}

/// Gamma(shape, rate) prior on the DP concentration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

/// LogNormal(mu, sigma) prior on α + d for the Pitman-Yor process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNormalPrior {
    pub mu: f64,
    pub sigma: f64,
}

impl LogNormalPrior {
    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let z = (x.ln() - self.mu) / self.sigma;
        -x.ln() - self.sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * z * z
    }
}

/// Likelihood family, process prior and hyperprior settings.
///
/// The discount prior is always Uniform(0, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub family: Family,
    pub process: Process,
    /// Prior scale of β relative to σ² in the severity base measure.
    pub n0: f64,
    /// Inverse-gamma shape of the severity base measure.
    pub a: f64,
    /// Inverse-gamma scale of the severity base measure.
    pub b: f64,
    pub alpha_prior: GammaPrior,
    pub strength_prior: LogNormalPrior,
}

impl ModelSpec {
    pub fn new(family: Family, process: Process) -> Self {
        Self {
            family,
            process,
            n0: 0.5,
            a: 3.0,
            b: 5.0,
            alpha_prior: GammaPrior { shape: 1.0, rate: 1.0 },
            strength_prior: LogNormalPrior { mu: 0.0, sigma: 1.0 },
        }
    }

    pub fn frequency(process: Process) -> Self {
        Self::new(Family::PoissonFrequency, process)
    }

    pub fn severity(process: Process) -> Self {
        Self::new(Family::NormalSeverity, process)
    }
}

/// Parameters attached to one mixture component, with a flat numeric encoding
/// used by the draws file.
pub trait ComponentParams: Clone + fmt::Debug + PartialEq + Send + Sync {
    fn to_fields(&self) -> Vec<f64>;
    fn from_fields(fields: &[f64]) -> Result<Self, String>;
    fn is_valid(&self) -> bool;
}

/// Poisson-regression coefficients β (length k + 1).
#[derive(Debug, Clone, PartialEq)]
pub struct FreqParams {
    pub beta: DVector<f64>,
}

/// Normal-regression coefficients β and error variance σ².
#[derive(Debug, Clone, PartialEq)]
pub struct SevParams {
    pub beta: DVector<f64>,
    pub sigma2: f64,
}

impl ComponentParams for FreqParams {
    fn to_fields(&self) -> Vec<f64> {
        self.beta.iter().copied().collect()
    }

    fn from_fields(fields: &[f64]) -> Result<Self, String> {
        if fields.is_empty() {
            return Err("frequency parameters need at least one coefficient".into());
        }
        Ok(Self { beta: DVector::from_column_slice(fields) })
    }

    fn is_valid(&self) -> bool {
        self.beta.iter().all(|b| b.is_finite())
    }
}

impl ComponentParams for SevParams {
    /// β₀ … β_k followed by σ².
    fn to_fields(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.beta.iter().copied().collect();
        v.push(self.sigma2);
        v
    }

    fn from_fields(fields: &[f64]) -> Result<Self, String> {
        if fields.len() < 2 {
            return Err("severity parameters need β and σ²".into());
        }
        let (beta, sigma2) = fields.split_at(fields.len() - 1);
        Ok(Self { beta: DVector::from_column_slice(beta), sigma2: sigma2[0] })
    }

    fn is_valid(&self) -> bool {
        self.sigma2 > 0.0 && self.sigma2.is_finite() && self.beta.iter().all(|b| b.is_finite())
    }
}

/// Parameter type for components with no parameters, e.g. prior-only runs.
impl ComponentParams for () {
    fn to_fields(&self) -> Vec<f64> {
        Vec::new()
    }
    fn from_fields(_fields: &[f64]) -> Result<Self, String> {
        Ok(())
    }
    fn is_valid(&self) -> bool {
        true
    }
}
