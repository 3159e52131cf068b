use crate::error::{Error, Result};
use crate::layers::{Mode, Parameterized};
use crate::real::Real;
use crate::rng::SeededRng;
use crate::tensor::{Shape4, Tensor};

const KERNEL: usize = 3;
const TAPS: usize = KERNEL * KERNEL;

// Upper bound on im2col buffer elements; larger images are processed in
// bands of output rows.
const COL_BUDGET: usize = 1 << 22;

/// 3x3 convolution with stride 1 and zero padding 1, so the output keeps
/// the input's spatial size.
///
/// Weights are stored `[c_out][c_in][3][3]`.
#[derive(Clone, Debug)]
pub struct Conv2d<T: Real = f32> {
    c_in: usize,
    c_out: usize,
    weight: Vec<T>,
    bias: Vec<T>,
    grad_weight: Vec<T>,
    grad_bias: Vec<T>,
    input: Option<Tensor<T>>,
}

impl<T: Real> Conv2d<T> {
    /// A layer with all parameters zero.
    pub fn new(c_in: usize, c_out: usize) -> Result<Self> {
        if c_in == 0 || c_out == 0 {
            return Err(Error::Config(format!(
                "convolution needs at least one channel each way, got {c_in} -> {c_out}"
            )));
        }
        let wlen = c_out * c_in * TAPS;
        Ok(Conv2d {
            c_in,
            c_out,
            weight: vec![T::zero(); wlen],
            bias: vec![T::zero(); c_out],
            grad_weight: vec![T::zero(); wlen],
            grad_bias: vec![T::zero(); c_out],
            input: None,
        })
    }

    /// Weights drawn from `N(0, std^2)`, biases zero.
    pub fn init_normal(&mut self, rng: &mut SeededRng, std: f64) -> Result<()> {
        let shape = Shape4::new(self.c_out, self.c_in, KERNEL, KERNEL)?;
        self.weight = Tensor::<T>::normal_fill(rng, shape, 0.0, std)?.into_vec();
        self.bias.fill(T::zero());
        Ok(())
    }

    pub fn in_channels(&self) -> usize {
        self.c_in
    }

    pub fn out_channels(&self) -> usize {
        self.c_out
    }

    pub fn fan_in(&self) -> usize {
        self.c_in * TAPS
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn weight(&self) -> &[T] {
        &self.weight
    }

    pub fn weight_mut(&mut self) -> &mut [T] {
        &mut self.weight
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [T] {
        &mut self.bias
    }

    pub fn grad_weight(&self) -> &[T] {
        &self.grad_weight
    }

    pub fn grad_bias(&self) -> &[T] {
        &self.grad_bias
    }

    pub fn clear_cache(&mut self) {
        self.input = None;
    }

    fn band_rows(&self, h: usize, w: usize) -> usize {
        (COL_BUDGET / (self.fan_in() * w)).clamp(1, h)
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let out = self.apply(x)?;
        self.input = match mode {
            Mode::Train => Some(x.clone()),
            Mode::Infer => None,
        };
        Ok(out)
    }

    /// Forward pass without touching the backward cache.
    pub fn apply(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let s = x.shape();
        if s.c != self.c_in {
            return Err(Error::Shape(format!(
                "convolution expects {} input channels, got input {s}",
                self.c_in
            )));
        }
        let out_shape = s.with_channels(self.c_out)?;
        let mut out = Tensor::zeros(out_shape);
        let (h, w, hw) = (s.h, s.w, s.plane_len());
        let k = self.fan_in();
        let band = self.band_rows(h, w);
        let mut col = vec![T::zero(); k * band * w];

        for n in 0..s.n {
            let src = x.item(n);
            let dst = out.item_mut(n);
            for (o, plane) in dst.chunks_exact_mut(hw).enumerate() {
                plane.fill(self.bias[o]);
            }
            for r0 in (0..h).step_by(band) {
                let r1 = (r0 + band).min(h);
                let len = (r1 - r0) * w;
                im2col(src, self.c_in, h, w, r0, r1, &mut col);
                // out[:, r0..r1, :] += W (c_out x k) * col (k x len)
                unsafe {
                    T::gemm(
                        self.c_out,
                        k,
                        len,
                        T::one(),
                        self.weight.as_ptr(),
                        k as isize,
                        1,
                        col.as_ptr(),
                        len as isize,
                        1,
                        T::one(),
                        dst.as_mut_ptr().add(r0 * w),
                        hw as isize,
                        1,
                    );
                }
            }
        }
        Ok(out)
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.input.as_ref().ok_or_else(|| {
            Error::State("convolution backward called without a train-mode forward".into())
        })?;
        let s = x.shape();
        let expected = s.with_channels(self.c_out)?;
        if grad_out.shape() != expected {
            return Err(Error::Shape(format!(
                "convolution output gradient should be {expected}, got {}",
                grad_out.shape()
            )));
        }
        let (h, w, hw) = (s.h, s.w, s.plane_len());
        let k = self.fan_in();
        let band = self.band_rows(h, w);
        let mut col = vec![T::zero(); k * band * w];
        let mut grad_col = vec![T::zero(); k * band * w];
        let mut grad_in = Tensor::zeros(s);

        for n in 0..s.n {
            let g = grad_out.item(n);
            for (o, plane) in g.chunks_exact(hw).enumerate() {
                self.grad_bias[o] = self.grad_bias[o] + plane.iter().copied().sum::<T>();
            }
            for r0 in (0..h).step_by(band) {
                let r1 = (r0 + band).min(h);
                let len = (r1 - r0) * w;
                im2col(x.item(n), self.c_in, h, w, r0, r1, &mut col);
                unsafe {
                    // grad_W (c_out x k) += g (c_out x len) * col^T (len x k)
                    T::gemm(
                        self.c_out,
                        len,
                        k,
                        T::one(),
                        g.as_ptr().add(r0 * w),
                        hw as isize,
                        1,
                        col.as_ptr(),
                        1,
                        len as isize,
                        T::one(),
                        self.grad_weight.as_mut_ptr(),
                        k as isize,
                        1,
                    );
                    // grad_col (k x len) = W^T (k x c_out) * g (c_out x len)
                    T::gemm(
                        k,
                        self.c_out,
                        len,
                        T::one(),
                        self.weight.as_ptr(),
                        1,
                        k as isize,
                        g.as_ptr().add(r0 * w),
                        hw as isize,
                        1,
                        T::zero(),
                        grad_col.as_mut_ptr(),
                        len as isize,
                        1,
                    );
                }
                col2im(&grad_col, self.c_in, h, w, r0, r1, grad_in.item_mut(n));
            }
        }
        Ok(grad_in)
    }
}

impl<T: Real> Parameterized<T> for Conv2d<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut [T], &mut [T])) {
        f(&mut self.weight, &mut self.grad_weight);
        f(&mut self.bias, &mut self.grad_bias);
    }
}

/// Unrolls the 3x3 neighbourhoods feeding output rows `r0..r1` of one
/// image into `col`, one row per (channel, ky, kx) tap.
fn im2col<T: Real>(src: &[T], c: usize, h: usize, w: usize, r0: usize, r1: usize, col: &mut [T]) {
    let len = (r1 - r0) * w;
    for ch in 0..c {
        let plane = &src[ch * h * w..(ch + 1) * h * w];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let tap = (ch * KERNEL + ky) * KERNEL + kx;
                let row = &mut col[tap * len..(tap + 1) * len];
                for i in r0..r1 {
                    let dst = &mut row[(i - r0) * w..(i - r0 + 1) * w];
                    let si = i + ky;
                    if si < 1 || si > h {
                        dst.fill(T::zero());
                        continue;
                    }
                    let line = &plane[(si - 1) * w..si * w];
                    match kx {
                        0 => {
                            dst[0] = T::zero();
                            dst[1..].copy_from_slice(&line[..w - 1]);
                        }
                        1 => dst.copy_from_slice(line),
                        _ => {
                            dst[..w - 1].copy_from_slice(&line[1..]);
                            dst[w - 1] = T::zero();
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters tap gradients back onto the image.
fn col2im<T: Real>(col: &[T], c: usize, h: usize, w: usize, r0: usize, r1: usize, dst: &mut [T]) {
    let len = (r1 - r0) * w;
    for ch in 0..c {
        let plane = &mut dst[ch * h * w..(ch + 1) * h * w];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let tap = (ch * KERNEL + ky) * KERNEL + kx;
                let row = &col[tap * len..(tap + 1) * len];
                for i in r0..r1 {
                    let si = i + ky;
                    if si < 1 || si > h {
                        continue;
                    }
                    let src = &row[(i - r0) * w..(i - r0 + 1) * w];
                    let line = &mut plane[(si - 1) * w..si * w];
                    match kx {
                        0 => {
                            for (d, &g) in line[..w - 1].iter_mut().zip(&src[1..]) {
                                *d = *d + g;
                            }
                        }
                        1 => {
                            for (d, &g) in line.iter_mut().zip(src) {
                                *d = *d + g;
                            }
                        }
                        _ => {
                            for (d, &g) in line[1..].iter_mut().zip(&src[..w - 1]) {
                                *d = *d + g;
                            }
                        }
                    }
                }
            }
        }
    }
}
