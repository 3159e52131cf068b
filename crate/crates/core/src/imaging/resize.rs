use crate::error::{Error, Result};
use crate::imaging::image::{ImageRGB, CHANNELS};

/// Target size of a bicubic resample.
///
/// Sampling uses half-pixel centres (`src = (dst + 0.5) * in / out - 0.5`),
/// the Catmull-Rom kernel (`a = -0.5`) without any widening when shrinking,
/// and edge replication outside the image.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ResizeSpec {
    pub out_h: usize,
    pub out_w: usize,
}

impl ResizeSpec {
    pub fn new(out_h: usize, out_w: usize) -> Result<Self> {
        if out_h == 0 || out_w == 0 {
            return Err(Error::Size(format!(
                "resize target must be at least 1x1, got {out_h}x{out_w}"
            )));
        }
        Ok(ResizeSpec { out_h, out_w })
    }
}

/// Keys' cubic convolution kernel with `a = -0.5`.
pub fn catmull_rom(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

/// Four source taps and weights for one output coordinate.
#[derive(Clone, Copy, Debug)]
struct Taps {
    index: [usize; 4],
    weight: [f64; 4],
    // tap the weighted differences are taken against
    anchor: usize,
}

fn taps(n_in: usize, n_out: usize) -> Vec<Taps> {
    let scale = n_in as f64 / n_out as f64;
    let last = n_in as isize - 1;
    (0..n_out)
        .map(|d| {
            let src = (d as f64 + 0.5) * scale - 0.5;
            let base = src.floor();
            let t = src - base;
            let base = base as isize;
            let mut index = [0usize; 4];
            let mut weight = [0.0; 4];
            for k in 0..4 {
                index[k] = (base - 1 + k as isize).clamp(0, last) as usize;
                weight[k] = catmull_rom(t - (k as f64 - 1.0));
            }
            Taps {
                index,
                weight,
                anchor: base.clamp(0, last) as usize,
            }
        })
        .collect()
}

// Weighted sum written as `p[anchor] + sum w_k (p_k - p[anchor])`; equal to
// `sum w_k p_k` because the weights sum to one, and exact on flat regions.
#[inline]
fn apply(t: &Taps, read: impl Fn(usize) -> f64) -> f64 {
    let a = read(t.anchor);
    let mut acc = 0.0;
    for k in 0..4 {
        acc += t.weight[k] * (read(t.index[k]) - a);
    }
    a + acc
}

/// Separable bicubic resample (rows first, then columns); the output is
/// clamped to `[0, 1]`.
pub fn bicubic_resize(img: &ImageRGB, spec: ResizeSpec) -> Result<ImageRGB> {
    let spec = ResizeSpec::new(spec.out_h, spec.out_w)?;
    let (h, w) = (img.height(), img.width());
    let (oh, ow) = (spec.out_h, spec.out_w);
    let tx = taps(w, ow);
    let ty = taps(h, oh);
    let mut out = Vec::with_capacity(CHANNELS * oh * ow);
    let mut horiz = vec![0.0; h * ow];
    for c in 0..CHANNELS {
        let plane = img.plane(c);
        for i in 0..h {
            let row = &plane[i * w..(i + 1) * w];
            for (j, t) in tx.iter().enumerate() {
                horiz[i * ow + j] = apply(t, |x| row[x]);
            }
        }
        for t in &ty {
            for j in 0..ow {
                out.push(apply(t, |y| horiz[y * ow + j]));
            }
        }
    }
    ImageRGB::new(oh, ow, out)
}

/// Half-size resample, rounding odd extents down (never below 1).
pub fn downscale2(img: &ImageRGB) -> Result<ImageRGB> {
    let spec = ResizeSpec::new((img.height() / 2).max(1), (img.width() / 2).max(1))?;
    bicubic_resize(img, spec)
}

/// Double-size resample.
pub fn upscale2(img: &ImageRGB) -> Result<ImageRGB> {
    bicubic_resize(img, ResizeSpec::new(2 * img.height(), 2 * img.width())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::psnr;
    use crate::rng::SeededRng;

    #[test]
    fn kernel_values() {
        assert_eq!(catmull_rom(0.0), 1.0);
        assert_eq!(catmull_rom(1.0), 0.0);
        assert_eq!(catmull_rom(2.0), 0.0);
        assert_eq!(catmull_rom(-1.5), catmull_rom(1.5));
        assert_eq!(catmull_rom(0.5), 0.5625);
        assert_eq!(catmull_rom(1.5), -0.0625);
    }

    #[test]
    fn weights_sum_to_one() {
        for (n_in, n_out) in [(7, 3), (16, 32), (32, 16), (5, 13)] {
            for t in taps(n_in, n_out) {
                assert!((t.weight.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn constant_is_preserved_exactly() {
        for v in [0.0, 0.3, 0.7137, 1.0] {
            let img = ImageRGB::constant(9, 13, v).unwrap();
            for (oh, ow) in [(18, 26), (4, 6), (9, 13), (1, 1), (31, 7)] {
                let out = bicubic_resize(&img, ResizeSpec::new(oh, ow).unwrap()).unwrap();
                assert!(out.values().iter().all(|&x| x == v));
            }
        }
    }

    #[test]
    fn identity_size_is_identity() {
        let mut rng = SeededRng::new(1);
        let img = ImageRGB::from_fn(11, 17, |_, _, _| rng.uniform()).unwrap();
        let out = bicubic_resize(&img, ResizeSpec::new(11, 17).unwrap()).unwrap();
        for (a, b) in out.values().iter().zip(img.values()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn linear_ramp_is_reproduced_in_the_interior() {
        let (h, w) = (6, 20);
        let ramp = ImageRGB::from_fn(h, w, |_, _, j| 0.1 + 0.04 * j as f64).unwrap();
        let out = upscale2(&ramp).unwrap();
        // Upscaled column j samples source position (j + 0.5) / 2 - 0.5.
        for c in 0..3 {
            for i in 0..2 * h {
                for j in 4..2 * w - 4 {
                    let x = (j as f64 + 0.5) / 2.0 - 0.5;
                    let expected = 0.1 + 0.04 * x;
                    assert!((out.get(c, i, j) - expected).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn halving_uses_symmetric_taps() {
        // Each output sits midway between two inputs: weights -1/16, 9/16, 9/16, -1/16.
        let img =
            ImageRGB::from_fn(1, 8, |_, _, j| [0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0][j]).unwrap();
        let out = downscale2(&img).unwrap();
        assert_eq!(out.width(), 4);
        assert!((out.get(0, 0, 1) - 0.5).abs() < 1e-15);
        assert_eq!(out.get(0, 0, 0), 0.0);
    }

    #[test]
    fn round_trip_loses_detail() {
        let mut rng = SeededRng::new(3);
        let img = ImageRGB::from_fn(32, 32, |_, i, j| {
            0.5 + 0.3 * ((i as f64 * 0.4).sin() * (j as f64 * 0.3).cos())
                + 0.05 * (rng.uniform() - 0.5)
        })
        .unwrap();
        let rt = upscale2(&downscale2(&img).unwrap()).unwrap();
        let p = psnr(&img, &rt).unwrap();
        assert!(p.is_finite() && p > 15.0, "{p}");
    }

    #[test]
    fn zero_target_rejected() {
        assert!(ResizeSpec::new(0, 3).is_err());
    }
}
