use crate::error::{Error, Result};
use crate::layers::{Mode, Parameterized};
use crate::real::Real;
use crate::tensor::Tensor;

/// Elementwise `tanh`; keeps its output for the backward pass.
#[derive(Clone, Debug, Default)]
pub struct Tanh<T: Real = f32> {
    output: Option<Tensor<T>>,
}

impl<T: Real> Tanh<T> {
    pub fn new() -> Self {
        Tanh { output: None }
    }

    pub fn clear_cache(&mut self) {
        self.output = None;
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let y = x.map(|v| v.tanh());
        self.output = (mode == Mode::Train).then(|| y.clone());
        Ok(y)
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.output.as_ref().ok_or_else(|| {
            Error::State("tanh backward called without a train-mode forward".into())
        })?;
        grad_out.zip_with(y, "tanh backward", |g, y| g * (T::one() - y * y))
    }
}

impl<T: Real> Parameterized<T> for Tanh<T> {
    fn visit_params(&mut self, _f: &mut dyn FnMut(&mut [T], &mut [T])) {}
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::fd;
    use crate::rng::SeededRng;
    use crate::tensor::Shape4;

    #[test]
    fn zero_and_saturation() {
        let mut t = Tanh::<f64>::new();
        let x = Tensor::from_vec(Shape4::new(1, 1, 1, 3).unwrap(), vec![0.0, 20.0, -20.0]).unwrap();
        let y = t.forward(&x, Mode::Train).unwrap();
        assert_eq!(y.as_slice()[0], 0.0);
        assert!((y.as_slice()[1] - 1.0).abs() < 1e-15);
        assert!((y.as_slice()[2] + 1.0).abs() < 1e-15);
        let g = t.backward(&Tensor::full(x.shape(), 1.0)).unwrap();
        assert_eq!(g.as_slice()[0], 1.0);
        assert!(g.as_slice()[1..]
            .iter()
            .all(|d| d.is_finite() && d.abs() < 1e-15));
    }

    #[test]
    fn backward_before_forward_fails() {
        let mut t = Tanh::<f32>::new();
        let g = Tensor::zeros(Shape4::new(1, 1, 1, 1).unwrap());
        assert!(matches!(t.backward(&g), Err(Error::State(_))));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut t = Tanh::<f64>::new();
        let x = Tensor::normal_fill(
            &mut SeededRng::new(1),
            Shape4::new(1, 2, 3, 3).unwrap(),
            0.0,
            1.0,
        )
        .unwrap();
        let err = fd::check_layer(
            &mut t,
            &x,
            2,
            |l, x| l.forward(x, Mode::Train),
            |l, g| l.backward(g),
        );
        assert!(err < 1e-6, "relative error {err}");
    }
}
