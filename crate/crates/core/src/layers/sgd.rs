use crate::error::{Error, Result};
use crate::layers::Parameterized;
use crate::real::Real;

/// Plain stochastic gradient descent: `p <- p - lr * grad`, with optional
/// rescaling of the global gradient norm down to `clip_norm`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SgdOptimizer {
    learning_rate: f64,
    clip_norm: Option<f64>,
}

/// What one update did.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    /// Global L2 norm of the gradients before clipping.
    pub grad_norm: f64,
    pub clipped: bool,
}

impl SgdOptimizer {
    pub fn new(learning_rate: f64) -> Result<Self> {
        if !(learning_rate >= 0.0) || !learning_rate.is_finite() {
            return Err(Error::Parameter(format!(
                "learning rate must be finite and non-negative, got {learning_rate}"
            )));
        }
        Ok(SgdOptimizer {
            learning_rate,
            clip_norm: None,
        })
    }

    pub fn with_clip_norm(mut self, clip_norm: Option<f64>) -> Result<Self> {
        if let Some(c) = clip_norm {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::Parameter(format!(
                    "clip norm must be positive, got {c}"
                )));
            }
        }
        self.clip_norm = clip_norm;
        Ok(self)
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn clip_norm(&self) -> Option<f64> {
        self.clip_norm
    }

    /// Applies one update and zeroes the gradients.
    pub fn step<T: Real>(&self, model: &mut impl Parameterized<T>) -> StepStats {
        let mut sq = 0.0f64;
        model.visit_params(&mut |_, g| sq += g.iter().map(|v| v.as_f64().powi(2)).sum::<f64>());
        let grad_norm = sq.sqrt();
        let factor = match self.clip_norm {
            Some(c) if grad_norm > c => c / grad_norm,
            _ => 1.0,
        };
        let k = T::from_f64(self.learning_rate * factor);
        model.visit_params(&mut |p, g| {
            for (pv, gv) in p.iter_mut().zip(g.iter_mut()) {
                *pv = *pv - k * *gv;
                *gv = T::zero();
            }
        });
        StepStats {
            grad_norm,
            clipped: factor < 1.0,
        }
    }
}
