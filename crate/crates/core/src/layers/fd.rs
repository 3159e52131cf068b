//! Central finite-difference oracle for layer gradients (test only).

use crate::error::Result;
use crate::layers::Parameterized;
use crate::rng::SeededRng;
use crate::tensor::Tensor;

pub(crate) const STEP: f64 = 1e-6;

/// Norm-wise relative error `|a - b| / (|a| + |b|)`, zero when both vanish.
pub(crate) fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let denom = norm(analytic) + norm(numeric);
    if denom == 0.0 {
        0.0
    } else {
        diff / denom
    }
}

fn perturb<L: Parameterized<f64>>(layer: &mut L, block: usize, index: usize, delta: f64) {
    let mut b = 0;
    layer.visit_params(&mut |p, _| {
        if b == block {
            p[index] += delta;
        }
        b += 1;
    });
}

/// Checks input and parameter gradients of `layer` at `x` against central
/// differences of the scalar `sum(r * forward(x))` for a random `r`.
/// Returns the worst norm-wise relative error over all gradient blocks.
pub(crate) fn check_layer<L, F, B>(
    layer: &mut L,
    x: &Tensor<f64>,
    seed: u64,
    forward: F,
    backward: B,
) -> f64
where
    L: Parameterized<f64>,
    F: Fn(&mut L, &Tensor<f64>) -> Result<Tensor<f64>>,
    B: Fn(&mut L, &Tensor<f64>) -> Result<Tensor<f64>>,
{
    let y = forward(layer, x).unwrap();
    let r = Tensor::normal_fill(&mut SeededRng::new(seed), y.shape(), 0.0, 1.0).unwrap();
    let objective = |layer: &mut L, x: &Tensor<f64>| -> f64 {
        let y = forward(layer, x).unwrap();
        y.as_slice()
            .iter()
            .zip(r.as_slice())
            .map(|(a, b)| a * b)
            .sum()
    };

    layer.zero_grad();
    forward(layer, x).unwrap();
    let grad_in = backward(layer, &r).unwrap();
    let mut param_grads = Vec::new();
    layer.visit_params(&mut |_, g| param_grads.push(g.to_vec()));

    let mut numeric_in = Vec::with_capacity(x.len());
    let mut xp = x.clone();
    for i in 0..x.len() {
        let orig = xp.as_slice()[i];
        xp.as_mut_slice()[i] = orig + STEP;
        let plus = objective(layer, &xp);
        xp.as_mut_slice()[i] = orig - STEP;
        let minus = objective(layer, &xp);
        xp.as_mut_slice()[i] = orig;
        numeric_in.push((plus - minus) / (2.0 * STEP));
    }
    let mut worst = relative_error(grad_in.as_slice(), &numeric_in);

    for (block, analytic) in param_grads.iter().enumerate() {
        let mut numeric = Vec::with_capacity(analytic.len());
        for i in 0..analytic.len() {
            perturb(layer, block, i, STEP);
            let plus = objective(layer, x);
            perturb(layer, block, i, -2.0 * STEP);
            let minus = objective(layer, x);
            perturb(layer, block, i, STEP);
            numeric.push((plus - minus) / (2.0 * STEP));
        }
        worst = worst.max(relative_error(analytic, &numeric));
    }
    worst
}
