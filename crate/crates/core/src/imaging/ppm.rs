use std::path::Path;

use crate::error::{Error, Result};
use crate::imaging::image::{ImageRGB, CHANNELS};

/// Parses a binary P6 image with maxval 255. Comments are accepted in the
/// header; trailing bytes after the raster are not.
pub fn decode_ppm(bytes: &[u8]) -> Result<ImageRGB> {
    let mut pos = 0usize;
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(Error::format(0, "not a binary PPM (magic P6 expected)"));
    }
    pos += 2;
    let mut fields = [0usize; 3];
    for (slot, name) in fields.iter_mut().zip(["width", "height", "maxval"]) {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(pos as u64, format!("expected {name}")));
        }
        *slot = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|_| Error::format(start as u64, format!("{name} out of range")))?;
    }
    let [w, h, maxval] = fields;
    if maxval != 255 {
        return Err(Error::format(
            pos as u64,
            format!("maxval {maxval} unsupported, only 255"),
        ));
    }
    if w == 0 || h == 0 {
        return Err(Error::format(pos as u64, format!("empty image {w}x{h}")));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::format(pos as u64, "missing whitespace after maxval"));
    }
    pos += 1;
    let npix = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(CHANNELS))
        .ok_or_else(|| Error::format(pos as u64, "image dimensions overflow"))?;
    let raster = &bytes[pos..];
    if raster.len() < npix {
        return Err(Error::format(
            bytes.len() as u64,
            format!("truncated raster: {} of {npix} bytes", raster.len()),
        ));
    }
    if raster.len() > npix {
        return Err(Error::format(
            (pos + npix) as u64,
            "trailing bytes after raster",
        ));
    }
    let plane = w * h;
    let mut data = vec![0.0; npix];
    for (p, px) in raster.chunks_exact(CHANNELS).enumerate() {
        for (c, &v) in px.iter().enumerate() {
            data[c * plane + p] = v as f64 / 255.0;
        }
    }
    ImageRGB::new(h, w, data)
}

/// Encodes as `P6\n<w> <h>\n255\n` followed by interleaved RGB bytes,
/// rounding each value to the nearest level.
pub fn encode_ppm(img: &ImageRGB) -> Vec<u8> {
    let (h, w) = (img.height(), img.width());
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.reserve(CHANNELS * h * w);
    for i in 0..h {
        for j in 0..w {
            for c in 0..CHANNELS {
                out.push((img.get(c, i, j) * 255.0).round() as u8);
            }
        }
    }
    out
}

pub fn load_ppm(path: impl AsRef<Path>) -> Result<ImageRGB> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_ppm(&bytes).map_err(|e| e.in_file(path))
}

pub fn save_ppm(img: &ImageRGB, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_ppm(img)).map_err(|e| Error::io(path, e))
}
