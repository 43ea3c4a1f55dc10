// SPDX-License-Identifier: Apache-2.0

//! Classifiers: a CART decision tree and a graph convolutional network,
//! with the loss functions and optimiser they train with.

mod gcn;
mod gradcheck;
mod loss;
mod optim;
mod tree;

use thiserror::Error;

pub use gcn::{
    gcn_forward, train_gcn, ClassWeighting, DenseLayer, ForwardPass, GcnMode, GcnModel,
    GraphSample, LossKind, NormalizedAdjacency, OptimizerKind, Readout, Target, TrainConfig,
    TrainedGcn,
};
pub use gradcheck::{analytic_gradient, grad_check};
pub use loss::{cross_entropy, softmax};
pub use optim::Adam;
pub use tree::{fit_tree, tree_predict, DecisionTreeModel, TreeConfig, TreeNode};

pub const NON_TROJAN: usize = 0;
pub const TROJAN: usize = 1;

#[derive(Debug, Error, PartialEq)]
pub enum MlError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("label {0} is not a valid class")]
    LabelOutOfRange(usize),
    #[error("expected dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("input contains a non-finite value")]
    NonFiniteInput,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Class decision with its two-class distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub class: usize,
    pub probabilities: [f64; 2],
}

impl Prediction {
    /// Argmax with ties going to `NON_TROJAN`.
    pub fn from_probabilities(probabilities: [f64; 2]) -> Self {
        let class = if probabilities[TROJAN] > probabilities[NON_TROJAN] {
            TROJAN
        } else {
            NON_TROJAN
        };
        Prediction {
            class,
            probabilities,
        }
    }
}
