use crate::error::{Error, Result};
use crate::layers::{Mode, Parameterized};
use crate::real::Real;
use crate::tensor::Tensor;

pub const DEFAULT_MOMENTUM: f64 = 0.9;
pub const DEFAULT_EPS: f64 = 1e-5;

/// Per-channel batch normalization over `(n, h, w)`.
///
/// Train mode normalizes with the biased batch variance and folds the batch
/// statistics into the moving averages as
/// `m <- momentum * m + (1 - momentum) * batch`. Infer mode uses the moving
/// averages only. The moving averages are the layer's non-trainable
/// parameters.
#[derive(Clone, Debug)]
pub struct BatchNorm2d<T: Real = f32> {
    channels: usize,
    gamma: Vec<T>,
    beta: Vec<T>,
    grad_gamma: Vec<T>,
    grad_beta: Vec<T>,
    moving_mean: Vec<T>,
    moving_var: Vec<T>,
    momentum: f64,
    eps: f64,
    cache: Option<Cache<T>>,
}

#[derive(Clone, Debug)]
struct Cache<T: Real> {
    normalized: Tensor<T>,
    inv_std: Vec<f64>,
}

impl<T: Real> BatchNorm2d<T> {
    pub fn new(channels: usize) -> Result<Self> {
        Self::with_hyperparameters(channels, DEFAULT_MOMENTUM, DEFAULT_EPS)
    }

    pub fn with_hyperparameters(channels: usize, momentum: f64, eps: f64) -> Result<Self> {
        if channels == 0 {
            return Err(Error::Config(
                "batch norm needs at least one channel".into(),
            ));
        }
        if !(momentum > 0.0 && momentum < 1.0) {
            return Err(Error::Parameter(format!(
                "momentum must lie in (0, 1), got {momentum}"
            )));
        }
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::Parameter(format!("eps must be positive, got {eps}")));
        }
        Ok(BatchNorm2d {
            channels,
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            grad_gamma: vec![T::zero(); channels],
            grad_beta: vec![T::zero(); channels],
            moving_mean: vec![T::zero(); channels],
            moving_var: vec![T::one(); channels],
            momentum,
            eps,
            cache: None,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn trainable_count(&self) -> usize {
        2 * self.channels
    }

    pub fn non_trainable_count(&self) -> usize {
        2 * self.channels
    }

    pub fn gamma(&self) -> &[T] {
        &self.gamma
    }

    pub fn gamma_mut(&mut self) -> &mut [T] {
        &mut self.gamma
    }

    pub fn beta(&self) -> &[T] {
        &self.beta
    }

    pub fn beta_mut(&mut self) -> &mut [T] {
        &mut self.beta
    }

    pub fn grad_gamma(&self) -> &[T] {
        &self.grad_gamma
    }

    pub fn grad_beta(&self) -> &[T] {
        &self.grad_beta
    }

    pub fn moving_mean(&self) -> &[T] {
        &self.moving_mean
    }

    pub fn moving_var(&self) -> &[T] {
        &self.moving_var
    }

    /// Replace the moving statistics. Variances must be non-negative.
    pub fn set_moving_stats(&mut self, mean: &[T], var: &[T]) -> Result<()> {
        if mean.len() != self.channels || var.len() != self.channels {
            return Err(Error::Shape(format!(
                "moving statistics need {} values each",
                self.channels
            )));
        }
        if var.iter().any(|v| !(*v >= T::zero())) {
            return Err(Error::Parameter(
                "moving variance must be non-negative".into(),
            ));
        }
        self.moving_mean.copy_from_slice(mean);
        self.moving_var.copy_from_slice(var);
        Ok(())
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let s = x.shape();
        if s.c != self.channels {
            return Err(Error::Shape(format!(
                "batch norm expects {} channels, got input {s}",
                self.channels
            )));
        }
        match mode {
            Mode::Train => self.forward_train(x),
            Mode::Infer => {
                self.cache = None;
                self.apply_infer(x)
            }
        }
    }

    /// Normalization with the moving statistics; never touches the cache.
    pub fn apply_infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let s = x.shape();
        if s.c != self.channels {
            return Err(Error::Shape(format!(
                "batch norm expects {} channels, got input {s}",
                self.channels
            )));
        }
        let scale: Vec<f64> = (0..self.channels)
            .map(|c| self.gamma[c].as_f64() / (self.moving_var[c].as_f64() + self.eps).sqrt())
            .collect();
        let mut y = Tensor::zeros(s);
        let hw = s.plane_len();
        for n in 0..s.n {
            let src = x.item(n).chunks_exact(hw);
            let dst = y.item_mut(n).chunks_exact_mut(hw);
            for (c, (xs, ys)) in src.zip(dst).enumerate() {
                let mean = self.moving_mean[c].as_f64();
                let beta = self.beta[c].as_f64();
                for (yv, &xv) in ys.iter_mut().zip(xs) {
                    *yv = T::from_f64((xv.as_f64() - mean) * scale[c] + beta);
                }
            }
        }
        Ok(y)
    }

    fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let s = x.shape();
        let count = s.n * s.plane_len();
        if count < 2 {
            return Err(Error::DegenerateBatch(format!(
                "batch statistics need at least two values per channel, input is {s}"
            )));
        }
        let hw = s.plane_len();
        let mut mean = vec![0.0f64; self.channels];
        let mut var = vec![0.0f64; self.channels];
        for n in 0..s.n {
            for (c, plane) in x.item(n).chunks_exact(hw).enumerate() {
                mean[c] += plane.iter().map(|v| v.as_f64()).sum::<f64>();
            }
        }
        mean.iter_mut().for_each(|m| *m /= count as f64);
        for n in 0..s.n {
            for (c, plane) in x.item(n).chunks_exact(hw).enumerate() {
                var[c] += plane
                    .iter()
                    .map(|v| (v.as_f64() - mean[c]).powi(2))
                    .sum::<f64>();
            }
        }
        var.iter_mut().for_each(|v| *v /= count as f64);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();

        let mut normalized = Tensor::zeros(s);
        let mut y = Tensor::zeros(s);
        for n in 0..s.n {
            let src = x.item(n).chunks_exact(hw);
            let norm = normalized.item_mut(n).chunks_exact_mut(hw);
            for (c, (xs, ns)) in src.zip(norm).enumerate() {
                for (nv, &xv) in ns.iter_mut().zip(xs) {
                    *nv = T::from_f64((xv.as_f64() - mean[c]) * inv_std[c]);
                }
            }
            let norm = normalized.item(n).chunks_exact(hw);
            let out = y.item_mut(n).chunks_exact_mut(hw);
            for (c, (ns, ys)) in norm.zip(out).enumerate() {
                let (g, b) = (self.gamma[c], self.beta[c]);
                for (yv, &nv) in ys.iter_mut().zip(ns) {
                    *yv = g * nv + b;
                }
            }
        }

        let keep = self.momentum;
        for c in 0..self.channels {
            let m = keep * self.moving_mean[c].as_f64() + (1.0 - keep) * mean[c];
            let v = keep * self.moving_var[c].as_f64() + (1.0 - keep) * var[c];
            self.moving_mean[c] = T::from_f64(m);
            self.moving_var[c] = T::from_f64(v.max(0.0));
        }
        self.cache = Some(Cache {
            normalized,
            inv_std,
        });
        Ok(y)
    }

    /// Full gradient, including the dependence of the batch statistics on
    /// every input.
    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let cache = self.cache.as_ref().ok_or_else(|| {
            Error::State("batch norm backward needs a preceding train-mode forward".into())
        })?;
        let s = cache.normalized.shape();
        if grad_out.shape() != s {
            return Err(Error::Shape(format!(
                "batch norm output gradient should be {s}, got {}",
                grad_out.shape()
            )));
        }
        let hw = s.plane_len();
        let count = (s.n * hw) as f64;
        let mut sum_g = vec![0.0f64; self.channels];
        let mut sum_gx = vec![0.0f64; self.channels];
        for n in 0..s.n {
            let g = grad_out.item(n).chunks_exact(hw);
            let xh = cache.normalized.item(n).chunks_exact(hw);
            for (c, (gs, xs)) in g.zip(xh).enumerate() {
                for (&gv, &xv) in gs.iter().zip(xs) {
                    sum_g[c] += gv.as_f64();
                    sum_gx[c] += gv.as_f64() * xv.as_f64();
                }
            }
        }
        for c in 0..self.channels {
            self.grad_gamma[c] = self.grad_gamma[c] + T::from_f64(sum_gx[c]);
            self.grad_beta[c] = self.grad_beta[c] + T::from_f64(sum_g[c]);
        }

        let mut grad_in = Tensor::zeros(s);
        for n in 0..s.n {
            let g = grad_out.item(n).chunks_exact(hw);
            let xh = cache.normalized.item(n).chunks_exact(hw);
            let gi = grad_in.item_mut(n).chunks_exact_mut(hw);
            for (c, ((gs, xs), is)) in g.zip(xh).zip(gi).enumerate() {
                let k = self.gamma[c].as_f64() * cache.inv_std[c] / count;
                let (mean_g, mean_gx) = (sum_g[c], sum_gx[c]);
                for ((iv, &gv), &xv) in is.iter_mut().zip(gs).zip(xs) {
                    *iv = T::from_f64(k * (count * gv.as_f64() - mean_g - xv.as_f64() * mean_gx));
                }
            }
        }
        Ok(grad_in)
    }
}

impl<T: Real> Parameterized<T> for BatchNorm2d<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut [T], &mut [T])) {
        f(&mut self.gamma, &mut self.grad_gamma);
        f(&mut self.beta, &mut self.grad_beta);
    }
}
