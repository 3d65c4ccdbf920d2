//! Sparse partial-correlation network estimation for heavy-tailed data.
//!
//! The estimator combines elastic-net neighborhood selection with a
//! zero-constrained Gaussian likelihood fit, wrapped in an EM loop for the
//! multivariate t scale mixture. Around it sit the pieces needed to run
//! simulation studies (graph generators, samplers, scoring) and to analyze
//! financial return panels (AR-GARCH filtering, rolling windows, centrality
//! and shock propagation).

pub mod analytics;
pub mod constrained_mle;
pub mod elastic_net;
pub mod em;
pub mod error;
pub mod experiment;
pub mod io;
pub mod linalg;
pub mod matrix;
pub mod metrics;
pub mod neighborhood;
pub mod netgen;
pub mod pipeline;
pub mod samplers;
pub mod seeds;
pub mod selection;

pub use error::{Error, Result};
pub use matrix::{Dataset, EdgeSet, PartialCorrelationMatrix, PrecisionMatrix};
