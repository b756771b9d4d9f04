//! Reverse-mode automatic differentiation, optimizers, and weight averaging.

pub mod checkpoint;
pub mod gradcheck;
pub mod graph;
pub mod nn;
pub mod optim;
pub mod rng;
pub mod tensor;

pub use checkpoint::Checkpoint;
pub use gradcheck::{grad_check, GradCheckReport};
pub use graph::{Gradients, Graph, NodeId};
pub use nn::{dropout_mask, Activation, Mlp};
pub use optim::{BoundParams, EmaState, Params, SgdMomentum};
pub use tensor::Tensor;
