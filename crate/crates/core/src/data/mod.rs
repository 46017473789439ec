//! Ingestion of the French motor CSV exports, train/test preparation,
//! synthetic mixtures and run configuration.

mod config;
mod fremtpl;
mod simulate;
mod split;

pub use config::{RunConfig, DEFAULT_FREQ_TRAIN, DEFAULT_SEV_TRAIN_FRACTION, KEYS};
pub use fremtpl::{
    load_frequency, load_severity, read_policies, PolicyRow, SeverityLoad, DEFAULT_COVARIATES, FREQ_COLUMNS,
};
pub use simulate::{simulate, MixtureSpec, Simulated};
pub use split::{apply_standardization, fit_standardization, standardize_split, TrainSize, MIN_TRAIN};

use std::path::Path;

use thiserror::Error;

use crate::model::ValidationReport;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("{path}: missing column {column}")]
    MissingColumn { column: String, path: String },
    #[error("{path}: line {line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("data failed validation:\n{0}")]
    Validation(ValidationReport),
    #[error("no claim matched a policy")]
    NoMatchingPolicies,
    #[error("zero variance column {column}")]
    ZeroVariance { column: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl DataError {
    fn from_csv(e: csv::Error, path: &Path) -> Self {
        let line = e.position().map(|p| p.line() as usize);
        match (e.kind(), line) {
            (csv::ErrorKind::Io(_), _) => DataError::Io(format!("{}: {e}", path.display())),
            (_, Some(line)) => DataError::Parse { path: path.display().to_string(), line, msg: e.to_string() },
            _ => DataError::Io(format!("{}: {e}", path.display())),
        }
    }
}
