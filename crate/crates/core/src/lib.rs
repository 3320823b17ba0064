//! Style-enhanced denoising auto-encoder for unsupervised text style transfer.
//!
//! The numeric core (`tensor`, `nn`, `optim`, `gradcheck`, `wmd`) is generic
//! over [`Scalar`] (`f32` or `f64`); the training pipeline runs in `f64`
//! through the aliases below.

pub mod checkpoint;
pub mod classifier;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod lexicon;
pub mod model;
pub mod nn;
pub mod noise;
pub mod optim;
pub mod pipeline;
pub mod refine;
pub mod rng;
pub mod scalar;
pub mod synth;
pub mod tensor;
pub mod train;
pub mod wmd;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Scalar type used by the training pipeline.
pub type Real = f64;
pub type Tensor = tensor::Tensor<Real>;
