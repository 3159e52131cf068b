//! Layers with explicit forward and backward passes.

mod batchnorm;
mod conv;
mod loss;
mod sgd;
mod tanh;

#[cfg(test)]
pub(crate) mod fd;

pub use batchnorm::BatchNorm2d;
pub use conv::Conv2d;
pub use loss::mse_loss;
pub use sgd::{SgdOptimizer, StepStats};
pub use tanh::Tanh;

use crate::real::Real;

/// Whether batch normalization uses batch statistics (and caches for
/// backward) or its accumulated moving statistics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Anything holding trainable parameters next to their gradients.
pub trait Parameterized<T: Real> {
    /// Calls `f(params, grads)` for every trainable parameter block, in a
    /// fixed order.
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut [T], &mut [T]));

    fn zero_grad(&mut self) {
        self.visit_params(&mut |_, g| g.fill(T::zero()));
    }
}
