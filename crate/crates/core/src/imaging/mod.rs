//! RGB images in `[0, 1]`: PPM I/O, bicubic resampling and PSNR.

mod image;
mod ppm;
mod psnr;
mod resize;

pub use image::ImageRGB;
pub use ppm::{decode_ppm, encode_ppm, load_ppm, save_ppm};
pub use psnr::{mse, psnr, psnr_values};
pub use resize::{bicubic_resize, catmull_rom, downscale2, upscale2, ResizeSpec};
