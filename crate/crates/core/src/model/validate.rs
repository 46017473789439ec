use std::fmt;

use super::{Dataset, Family, ModelSpec};

/// One violated invariant. Row indices are zero-based.
#[derive(Debug, Clone, PartialEq)]
pub enum ValidationIssue {
    EmptyDataset,
    LengthMismatch { rows: usize, exposures: usize, responses: usize },
    RaggedRow { row: usize, len: usize, expected: usize },
    InterceptNotOne { row: usize, value: f64 },
    NonFinite { row: usize },
    NonPositiveExposure { row: usize, value: f64 },
    SeverityExposureNotOne { row: usize, value: f64 },
    InvalidCount { row: usize, value: f64 },
    NonPositiveScale { column: usize, sd: f64 },
    NonPositiveHyperparameter { name: &'static str, value: f64 },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ValidationIssue::*;
        match self {
            EmptyDataset => write!(f, "dataset has no rows"),
            LengthMismatch { rows, exposures, responses } => write!(
                f,
                "column lengths differ: {rows} design rows, {exposures} exposures, {responses} responses"
            ),
            RaggedRow { row, len, expected } => {
                write!(f, "row {row}: design row has length {len}, expected {expected}")
            }
            InterceptNotOne { row, value } => {
                write!(f, "row {row}: intercept column is {value}, expected 1")
            }
            NonFinite { row } => write!(f, "row {row}: non-finite value"),
            NonPositiveExposure { row, value } => {
                write!(f, "row {row}: nonpositive exposure {value}")
            }
            SeverityExposureNotOne { row, value } => {
                write!(f, "row {row}: severity exposure must be 1, got {value}")
            }
            InvalidCount { row, value } => {
                write!(f, "row {row}: claim count {value} is not a nonnegative integer")
            }
            NonPositiveScale { column, sd } => {
                write!(f, "covariate {column}: standardization sd {sd} is not positive")
            }
            NonPositiveHyperparameter { name, value } => {
                write!(f, "hyperparameter {name} = {value} must be positive")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return write!(f, "ok");
        }
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

/// Checks every dataset and model invariant, collecting all violations.
pub fn validate(data: &Dataset, spec: &ModelSpec) -> ValidationReport {
    use ValidationIssue::*;
    let mut issues = Vec::new();
    for (name, value) in [("n0", spec.n0), ("a", spec.a), ("b", spec.b)] {
        if !(value > 0.0) {
            issues.push(NonPositiveHyperparameter { name, value });
        }
    }
    for (name, value) in [
        ("alpha_shape", spec.alpha_prior.shape),
        ("alpha_rate", spec.alpha_prior.rate),
        ("strength_sigma", spec.strength_prior.sigma),
    ] {
        if !(value > 0.0) {
            issues.push(NonPositiveHyperparameter { name, value });
        }
    }
    if data.is_empty() && data.x.is_empty() {
        issues.push(EmptyDataset);
    }
    if data.x.len() != data.response.len() || data.exposure.len() != data.response.len() {
        issues.push(LengthMismatch {
            rows: data.x.len(),
            exposures: data.exposure.len(),
            responses: data.response.len(),
        });
        return ValidationReport { issues };
    }
    let expected = data.colnames.len().max(1);
    for (row, x) in data.x.iter().enumerate() {
        if x.len() != expected {
            issues.push(RaggedRow { row, len: x.len(), expected });
        }
        if x.first() != Some(&1.0) {
            issues.push(InterceptNotOne { row, value: x.first().copied().unwrap_or(f64::NAN) });
        }
        let t = data.exposure[row];
        let y = data.response[row];
        if x.iter().any(|v| !v.is_finite()) || !t.is_finite() || !y.is_finite() {
            issues.push(NonFinite { row });
            continue;
        }
        match data.family {
            Family::PoissonFrequency => {
                if !(t > 0.0) {
                    issues.push(NonPositiveExposure { row, value: t });
                }
                if y < 0.0 || y.fract() != 0.0 {
                    issues.push(InvalidCount { row, value: y });
                }
            }
            Family::NormalSeverity => {
                if t != 1.0 {
                    issues.push(SeverityExposureNotOne { row, value: t });
                }
            }
        }
    }
    if let Some(std) = &data.standardization {
        for (i, c) in std.columns.iter().enumerate() {
            if !(c.sd > 0.0) {
                issues.push(NonPositiveScale { column: i + 1, sd: c.sd });
            }
        }
    }
    ValidationReport { issues }
}
