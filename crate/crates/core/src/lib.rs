//! Classifier-based hashing baselines and the evaluation protocols around them.
//!
//! The crate is organised bottom-up:
//!
//! - [`metrics`]: precision@k, AP@k, mAP and accuracy.
//! - [`codecs`]: one-hot class codes, sign-of-tight-frame LSH and product quantization.
//! - [`classifier`]: Gaussian anchor features and multiclass logistic regression.
//! - [`retrieval`]: exhaustive ranking strategies over each database representation.
//! - [`protocols`]: SH/SSH evaluation, unseen-class retrieval and transfer learning.
//! - [`dataio`]: fvecs/ivecs and label files, manifests and a synthetic data generator.
//! - [`container`]: the binary container used to persist frames, codebooks and models.

pub mod classifier;
pub mod codecs;
pub mod container;
pub mod dataio;
pub mod error;
pub mod metrics;
pub mod protocols;
pub mod retrieval;
mod seed;
pub mod types;

pub use error::{Error, Result};
pub use seed::derive_seed;
pub use types::{argmax, FeatureMatrix, LabelVector, ProbabilityMatrix, Ranking};
