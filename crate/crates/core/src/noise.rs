//! Synthetic degradations: additive Gaussian noise and Poisson shot noise,
//! alone or combined, with randomly drawn strengths.

use crate::error::{Error, Result};
use crate::imaging::ImageRGB;
use crate::rng::SeededRng;

/// Ranges the random strengths are drawn from.
///
/// `var_max = 4e-4` puts the strongest Gaussian noise at
/// `-10 log10(4e-4) ~ 34 dB`; `s_min = 125` puts the strongest Poisson
/// noise at `10 log10(125 / 0.5) ~ 24 dB` on mid-gray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseRanges {
    pub var_max: f64,
    pub s_min: f64,
    pub s_max: f64,
}

impl Default for NoiseRanges {
    fn default() -> Self {
        NoiseRanges {
            var_max: 4e-4,
            s_min: 125.0,
            s_max: 1e5,
        }
    }
}

impl NoiseRanges {
    /// Poisson scales of order 1e10, which leave images essentially clean.
    pub fn literal_poisson_scale() -> Self {
        NoiseRanges {
            s_min: 1e10,
            s_max: 1e11,
            ..NoiseRanges::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.var_max >= 0.0 && self.var_max.is_finite()) {
            return Err(Error::Parameter(format!(
                "var_max must be >= 0, got {}",
                self.var_max
            )));
        }
        if !(self.s_min > 0.0 && self.s_max >= self.s_min && self.s_max.is_finite()) {
            return Err(Error::Parameter(format!(
                "need 0 < s_min <= s_max, got {} and {}",
                self.s_min, self.s_max
            )));
        }
        Ok(())
    }
}

/// Degradation parameters of one patch or image. `seed` drives the noise
/// samples themselves, so a spec can be replayed on its own.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub gaussian_var: Option<f64>,
    pub poisson_scale: Option<f64>,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn clean(seed: u64) -> Self {
        NoiseSpec {
            gaussian_var: None,
            poisson_scale: None,
            seed,
        }
    }

    pub fn gaussian(var: f64, seed: u64) -> Self {
        NoiseSpec {
            gaussian_var: Some(var),
            ..NoiseSpec::clean(seed)
        }
    }

    pub fn poisson(scale: f64, seed: u64) -> Self {
        NoiseSpec {
            poisson_scale: Some(scale),
            ..NoiseSpec::clean(seed)
        }
    }

    /// Strongest setting of both noise types within `ranges`.
    pub fn worst_case(ranges: &NoiseRanges, seed: u64) -> Self {
        NoiseSpec {
            gaussian_var: Some(ranges.var_max),
            poisson_scale: Some(ranges.s_min),
            seed,
        }
    }

    pub fn is_clean(&self) -> bool {
        self.gaussian_var.is_none() && self.poisson_scale.is_none()
    }

    /// Gaussian noise first, then Poisson noise, clamping after each.
    pub fn apply(&self, img: &ImageRGB) -> Result<ImageRGB> {
        let mut rng = SeededRng::new(self.seed);
        let mut out = img.clone();
        if let Some(var) = self.gaussian_var {
            out = add_gaussian(&out, var, &mut rng)?;
        }
        if let Some(scale) = self.poisson_scale {
            out = add_poisson(&out, scale, &mut rng)?;
        }
        Ok(out)
    }
}

/// Adds `N(0, var)` to every value independently, then clamps.
pub fn add_gaussian(img: &ImageRGB, var: f64, rng: &mut SeededRng) -> Result<ImageRGB> {
    if !(var >= 0.0) || !var.is_finite() {
        return Err(Error::Parameter(format!(
            "Gaussian variance must be >= 0, got {var}"
        )));
    }
    let std = var.sqrt();
    Ok(img.map(|v| v + std * rng.normal()))
}

/// Replaces every value `p` by `Poisson(p * scale) / scale`, then clamps.
pub fn add_poisson(img: &ImageRGB, scale: f64, rng: &mut SeededRng) -> Result<ImageRGB> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::Parameter(format!(
            "Poisson scale must be positive, got {scale}"
        )));
    }
    let mut err = None;
    let out = img.map(|p| match rng.poisson(p * scale) {
        Ok(k) => k as f64 / scale,
        Err(e) => {
            err.get_or_insert(e);
            p
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Each noise type is present with probability 1/2, independently. The
/// Gaussian variance is uniform on `(0, var_max]` and the Poisson scale
/// log-uniform on `[s_min, s_max]`. Always consumes five draws from `rng`.
pub fn random_noise_spec(rng: &mut SeededRng, ranges: &NoiseRanges) -> NoiseSpec {
    let has_gaussian = rng.uniform() < 0.5;
    let var = ranges.var_max * (1.0 - rng.uniform());
    let has_poisson = rng.uniform() < 0.5;
    let scale = ranges.s_min * (ranges.s_max / ranges.s_min).powf(rng.uniform());
    let seed = rng.next_u64();
    NoiseSpec {
        gaussian_var: has_gaussian.then_some(var),
        poisson_scale: has_poisson.then_some(scale),
        seed,
    }
}
