//! CPU implementation of the InceptionNeXt block family.
//!
//! The library covers the Inception depthwise token mixer (a channel-wise
//! split into small-square, horizontal-band, vertical-band, and identity
//! branches), the MetaNeXt block it plugs into, full classification models
//! (InceptionNeXt-T/S/B, ConvNeXt-kN comparators, isotropic variants),
//! analytic and walked complexity accounting, deterministic fixtures, and
//! weight-container I/O. Everything is plain scalar CPU code with fixed
//! accumulation orders: results are bit-identical across runs, platforms,
//! and worker counts.

pub mod block;
pub mod checksum;
pub mod complexity;
pub mod conv;
pub mod error;
pub mod mixer;
pub mod model;
pub mod parallel;
pub mod rng;
pub mod scalar;
pub mod tensor;
pub mod weights;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::{Shape, Tensor};
