//! Graph clustering with noisy side information.
//!
//! Planted clusterable instances, spectral embeddings, label-aware
//! classifiers and eigenvalue-constrained edge reweighting.

pub mod classify;
pub mod error;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod oracle;
pub mod refine;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
