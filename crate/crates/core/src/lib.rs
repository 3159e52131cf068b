//! Residual convolutional network for joint 2x super-resolution and
//! denoising of RGB images, trained with hand-written backpropagation.

// `!(x >= 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod imaging;
pub mod infer;
pub mod layers;
pub mod model;
pub mod noise;
pub mod real;
pub mod rng;
pub mod tensor;
pub mod train;
pub mod weights;

pub use error::{Error, Result};
pub use layers::Mode;
pub use model::{InitScheme, Network, ParamCount, SurdcnnConfig};
pub use real::Real;
pub use rng::SeededRng;
pub use tensor::{Shape4, Tensor};
