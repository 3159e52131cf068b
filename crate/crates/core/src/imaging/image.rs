use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::{Shape4, Tensor};

pub const CHANNELS: usize = 3;

/// RGB image stored planar (`c, h, w`), matching the tensor layout, with
/// every value clamped to `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageRGB {
    h: usize,
    w: usize,
    data: Vec<f64>,
}

fn clamp_unit(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

impl ImageRGB {
    /// Builds an image from planar values, clamping them into `[0, 1]`.
    pub fn new(h: usize, w: usize, mut data: Vec<f64>) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::Size(format!(
                "image must be at least 1x1, got {h}x{w}"
            )));
        }
        if data.len() != CHANNELS * h * w {
            return Err(Error::Shape(format!(
                "{} values for a {h}x{w} RGB image",
                data.len()
            )));
        }
        if data.iter().any(|v| v.is_nan()) {
            return Err(Error::Parameter("image values must not be NaN".into()));
        }
        data.iter_mut().for_each(|v| *v = clamp_unit(*v));
        Ok(ImageRGB { h, w, data })
    }

    pub fn from_fn(
        h: usize,
        w: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(CHANNELS * h * w);
        for c in 0..CHANNELS {
            for i in 0..h {
                for j in 0..w {
                    data.push(f(c, i, j));
                }
            }
        }
        Self::new(h, w, data)
    }

    pub fn constant(h: usize, w: usize, value: f64) -> Result<Self> {
        Self::new(h, w, vec![value; CHANNELS * h * w])
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, c: usize, i: usize, j: usize) -> f64 {
        self.data[(c * self.h + i) * self.w + j]
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        &self.data[c * self.h * self.w..(c + 1) * self.h * self.w]
    }

    /// Applies `f` to every value and clamps the result.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        ImageRGB {
            h: self.h,
            w: self.w,
            data: self.data.iter().map(|&v| clamp_unit(f(v))).collect(),
        }
    }

    /// `rows x cols` window with top-left corner `(top, left)`.
    pub fn crop(&self, top: usize, left: usize, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || top + rows > self.h || left + cols > self.w {
            return Err(Error::Size(format!(
                "crop {rows}x{cols} at ({top}, {left}) outside {}x{} image",
                self.h, self.w
            )));
        }
        Self::from_fn(rows, cols, |c, i, j| self.get(c, top + i, left + j))
    }

    pub fn to_tensor<T: Real>(&self) -> Tensor<T> {
        let shape = Shape4::new(1, CHANNELS, self.h, self.w).expect("image extents are positive");
        Tensor::from_vec(shape, self.data.iter().map(|&v| T::from_f64(v)).collect())
            .expect("length matches shape")
    }

    /// Converts a `(1, 3, h, w)` tensor, clamping into `[0, 1]`.
    pub fn from_tensor<T: Real>(t: &Tensor<T>) -> Result<Self> {
        let s = t.shape();
        if s.n != 1 || s.c != CHANNELS {
            return Err(Error::Shape(format!(
                "expected a (1, 3, h, w) tensor, got {s}"
            )));
        }
        Self::new(s.h, s.w, t.as_slice().iter().map(|v| v.as_f64()).collect())
    }
}
