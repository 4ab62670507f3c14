//! Posterior estimation: Gaussian anchor features, softmax regression and
//! cross-validated regularization.

pub mod anchors;
pub mod cv;
pub mod hidden;
pub mod lbfgs;
pub mod softmax;

pub use anchors::{apply_anchor_map, fit_anchor_map, GaussianAnchorMap};
pub use cv::{cross_validate_lambda, default_lambda_grid, fit_softmax_cv, CvReport};
pub use hidden::{train_hidden_layer, HiddenLayerModel};
pub use lbfgs::LbfgsOptions;
pub use softmax::{
    predict_proba, softmax_objective, train_softmax, train_softmax_with, ProbabilisticClassifier,
    SoftmaxModel, TrainSummary,
};

use crate::error::Result;
use crate::types::{FeatureMatrix, LabelVector, ProbabilityMatrix};

/// Architecture of a freshly trained classifier head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeadConfig {
    /// Softmax regression directly on the features.
    #[default]
    Linear,
    /// One tanh hidden layer followed by softmax.
    HiddenLayer { units: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedHead {
    Linear(SoftmaxModel),
    HiddenLayer(HiddenLayerModel),
}

impl ProbabilisticClassifier for TrainedHead {
    fn num_classes(&self) -> usize {
        match self {
            TrainedHead::Linear(m) => m.num_classes(),
            TrainedHead::HiddenLayer(m) => m.num_classes(),
        }
    }

    fn num_features(&self) -> usize {
        match self {
            TrainedHead::Linear(m) => m.num_features(),
            TrainedHead::HiddenLayer(m) => m.num_features(),
        }
    }

    fn predict_proba(&self, features: &FeatureMatrix) -> Result<ProbabilityMatrix> {
        match self {
            TrainedHead::Linear(m) => m.predict_proba(features),
            TrainedHead::HiddenLayer(m) => m.predict_proba(features),
        }
    }
}

pub fn train_head(
    head: HeadConfig,
    features: &FeatureMatrix,
    labels: &LabelVector,
    lambda: f64,
    seed: u64,
    opts: LbfgsOptions,
) -> Result<TrainedHead> {
    Ok(match head {
        HeadConfig::Linear => TrainedHead::Linear(train_softmax_with(features, labels, lambda, opts)?),
        HeadConfig::HiddenLayer { units } => TrainedHead::HiddenLayer(train_hidden_layer(
            features, labels, units, lambda, seed, opts,
        )?),
    })
}
