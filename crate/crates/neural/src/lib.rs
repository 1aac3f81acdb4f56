//! Reverse-mode autodiff on dense 2-D tensors, the LightCode neural feedback
//! code built on it, and probes that interpret and benchmark trained codes.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); training uses
//! `f32` and gradient checks `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod graph;
pub mod lightcode;
pub mod optim;
pub mod tensor;

pub use error::{NnError, Result};
pub use graph::{Graph, Var};
pub use lightcode::{ArchitectureConfig, FeedbackMode, LightCodeLink, LightCodeModel, TrainConfig};
pub use optim::{AdamW, AdamWConfig};
pub use tensor::{Scalar, Tensor};

/// Training-precision model.
pub type Model = LightCodeModel<f32>;
