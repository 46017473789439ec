//! Posterior summaries, chain diagnostics, held-out evaluation and baselines.

mod baseline;
mod cocluster;
mod diagnostics;
mod evaluation;

pub use baseline::{fit_ols, fit_poisson_glm, GlmFit, OlsFit};
pub use cocluster::{dissimilarity_matrix, point_partition, DissimilarityMatrix, Merge, PointPartition};
pub use diagnostics::{
    autocorrelation, chain_diagnostics, effective_sample_size, geweke_z, ChainDiagnostics, DEFAULT_LAGS,
    MIN_SERIES_LEN,
};
pub use evaluation::{chi_square_gof, expected_counts, mse, observed_counts, GofBin, GofResult};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("no posterior draws")]
    NoDraws,
    #[error("series has {len} values, need at least {min}")]
    SeriesTooShort { len: usize, min: usize },
    #[error("series is constant")]
    DegenerateSeries,
    #[error("only {bins} categories with expected count >= 5")]
    TooFewBins { bins: usize },
    #[error("lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("invalid input: {0}")]
    InvalidParameter(String),
}
