//! Dirichlet-process and Pitman-Yor mixtures of Poisson and normal regressions
//! for insurance claims frequency and severity.

pub mod analysis;
pub mod cli;
pub mod data;
pub mod kernels;
pub mod likelihood;
pub mod model;
pub mod predictive;
pub mod sampler;
