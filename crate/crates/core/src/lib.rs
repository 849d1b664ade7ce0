//! Simulation and variance estimation for respondent-driven sampling.

pub mod cli;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod netgraph;
pub mod oracle;
pub mod rds;
pub mod resample;
pub mod rng;

pub use error::{Error, Result};
