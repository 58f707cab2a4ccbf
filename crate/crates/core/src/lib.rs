//! Transferability diagnostics for pre-training checkpoints, computed from
//! their extracted penultimate-layer features.
//!
//! - [`feature_store`]: FTRX matrices, CSV import, checkpoint manifests
//! - [`spectral`]: SVD energy split into main and residual components
//! - [`probe`]: softmax probes retrained with Adam
//! - [`logme`]: LogME evidence scores
//! - [`ranking`]: correlations, trajectory analysis and report rendering
//! - [`synthgen`]: planted synthetic features and trajectories
//! - [`pipeline`]: per-checkpoint analysis used by the CLI

pub mod error;
pub mod feature_store;
pub mod logme;
pub mod pipeline;
pub mod probe;
pub mod ranking;
pub mod spectral;
pub mod synthgen;

pub use error::{Error, ErrorKind, Result};
pub use feature_store::FeatureMatrix;
