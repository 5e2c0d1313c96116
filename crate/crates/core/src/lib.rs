//! Detector-free open-set active learning on precomputed embeddings.
//!
//! Each round estimates how many unknown classes hide among the labeled
//! unknowns, trains a dual-head classifier whose auxiliary head carries a
//! Dirichlet evidential loss, builds a high-purity candidate pool sized to
//! hit a target query precision, and queries the most informative
//! candidates.

pub mod data;
pub mod error;
pub mod estimation;
pub mod evidential;
pub mod harness;
pub mod io;
pub mod matrix;
pub mod query;
pub mod rng;
pub mod scoring;

pub use data::{
    observed_precision, FeatureSet, LabelSpace, PoolState, QueryLabel, RoundConfig, RoundMetrics,
};
pub use error::{Error, Result};
pub use harness::Strategy;
pub use matrix::Matrix;
