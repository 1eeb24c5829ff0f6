//! Information-theoretic leakage auditing for concept-based models.
//!
//! The crate bundles k-NN mutual information estimators, the leakage scores
//! built on them, synthetic datasets with known concept structure, a small
//! dense-network engine, and concept bottleneck / embedding models trained
//! with it.

pub mod data;
pub mod error;
pub mod estimators;
pub mod gradcheck;
pub mod models;
pub mod nn;
pub mod rng;
pub mod scores;

pub use error::{Error, Result};
