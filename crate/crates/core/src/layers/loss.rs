use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::Tensor;

/// Mean squared error over every element, with its gradient
/// `2 (pred - target) / count`.
pub fn mse_loss<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(f64, Tensor<T>)> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "loss: prediction {} vs target {}",
            pred.shape(),
            target.shape()
        )));
    }
    let count = pred.len() as f64;
    let sum: f64 = pred
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(p, t)| (p.as_f64() - t.as_f64()).powi(2))
        .sum();
    let k = T::from_f64(2.0 / count);
    let grad = pred.zip_with(target, "loss", |p, t| (p - t) * k)?;
    Ok((sum / count, grad))
}
