use crate::error::{Error, Result};
use crate::imaging::image::ImageRGB;

/// Mean squared difference over all values.
pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Shape(format!(
            "cannot compare {} values with {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64)
}

/// `10 log10(1 / mse)` for values with peak 1; `+inf` when identical.
pub fn psnr_values(a: &[f64], b: &[f64]) -> Result<f64> {
    let m = mse(a, b)?;
    Ok(if m == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * m.log10()
    })
}

/// PSNR in dB over all three channels jointly.
pub fn psnr(a: &ImageRGB, b: &ImageRGB) -> Result<f64> {
    if (a.height(), a.width()) != (b.height(), b.width()) {
        return Err(Error::Shape(format!(
            "PSNR of {}x{} against {}x{}",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )));
    }
    psnr_values(a.values(), b.values())
}
