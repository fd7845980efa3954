//! Dense tensors, a recording tape for reverse-mode differentiation, and ADAM.

mod adam;
mod graph;
mod tensor;

pub use adam::{global_grad_norm, AdamConfig, AdamState};
pub use graph::{Graph, Var};
pub use tensor::{layer_norm, matmul, matmul_at, matmul_bt, softmax_rows, weighted_cross_entropy, Tensor};

pub(crate) use tensor::dot;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("invalid tensor shape {0:?}")]
    InvalidShape(Vec<usize>),
    #[error("shape {shape:?} needs {} elements, got {len}", shape.iter().product::<usize>())]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("{op}: expected rank {expected}, got shape {shape:?}")]
    Rank {
        op: &'static str,
        expected: usize,
        shape: Vec<usize>,
    },
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("target id {target} out of range for vocabulary of {vocab}")]
    TargetOutOfRange { target: usize, vocab: usize },
    #[error("loss weights must be finite and non-negative")]
    NegativeWeight,
    #[error("all loss weights are zero")]
    DegenerateWeights,
    #[error("value was not recorded on a differentiable tape")]
    NotTraced,
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("non-finite gradient for parameter `{0}`")]
    NonFiniteGradient(String),
    #[error("optimizer state does not match parameters: {0}")]
    OptimizerMismatch(String),
    #[error("learning rate must be positive, got {0}")]
    LearningRate(f64),
}
