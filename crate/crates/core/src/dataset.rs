//! Training pairs: degraded patches and the residuals the network learns.
//!
//! A clean patch is halved with the bicubic resampler, noised, and doubled
//! again. That result is the network input; the target is the input minus
//! the clean patch.
//!
//! Dataset files are little-endian:
//!
//! ```text
//! "SRDD" | version u32 = 1 | count u64 | train count u64 | patch size u32 | channels u32
//! per sample:
//!   input f32 x (3*p*p) | target f32 x (3*p*p)
//!   split u8 (0 train, 1 validation) | source image u32 | x u32 | y u32
//!   gaussian flag u8 | variance f64 | poisson flag u8 | scale f64 | noise seed u64
//! crc32 u32 of every preceding byte
//! ```

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::imaging::{downscale2, load_ppm, upscale2, ImageRGB};
use crate::noise::{random_noise_spec, NoiseRanges, NoiseSpec};
use crate::rng::SeededRng;
use crate::tensor::Tensor;
use crate::weights::{ByteReader, ByteWriter};

pub const MAGIC: &[u8; 4] = b"SRDD";
pub const VERSION: u32 = 1;
pub const PATCH_SIZE: usize = 32;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct PatchCoord {
    pub x: usize,
    pub y: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
}

/// One training pair with its provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchSample {
    /// Degraded, re-upscaled patch `(1, 3, p, p)`.
    pub input: Tensor<f32>,
    /// `input - original`.
    pub target: Tensor<f32>,
    pub source_image: u32,
    pub coord: PatchCoord,
    pub noise: NoiseSpec,
}

impl PatchSample {
    /// The clean patch, `input - target`.
    pub fn original(&self) -> Tensor<f32> {
        self.input
            .sub(&self.target)
            .expect("input and target share a shape")
    }
}

/// Low-resolution observation of `clean`: half-size bicubic resample,
/// then the noise of `spec`.
pub fn degrade_lowres(clean: &ImageRGB, spec: &NoiseSpec) -> Result<ImageRGB> {
    spec.apply(&downscale2(clean)?)
}

/// What the network sees for `clean`: the low-resolution observation
/// resampled back up to double size.
pub fn degrade_image(clean: &ImageRGB, spec: &NoiseSpec) -> Result<ImageRGB> {
    upscale2(&degrade_lowres(clean, spec)?)
}

/// Builds the training pair for one clean `(1, 3, p, p)` patch with even `p`.
pub fn degrade(original: &Tensor<f32>, spec: &NoiseSpec) -> Result<PatchSample> {
    let s = original.shape();
    if !s.h.is_multiple_of(2) || !s.w.is_multiple_of(2) {
        return Err(Error::Size(format!("patch extents must be even, got {s}")));
    }
    let clean = ImageRGB::from_tensor(original)?;
    let input: Tensor<f32> = degrade_image(&clean, spec)?.to_tensor();
    let target = input.sub(original)?;
    Ok(PatchSample {
        input,
        target,
        source_image: 0,
        coord: PatchCoord::default(),
        noise: *spec,
    })
}

/// `count` patch corners drawn uniformly, with replacement, over every
/// position where a `size x size` window fits, with the crops themselves.
pub fn extract_patches(
    img: &ImageRGB,
    count: usize,
    size: usize,
    rng: &mut SeededRng,
) -> Result<Vec<(PatchCoord, ImageRGB)>> {
    if size == 0 || img.height() < size || img.width() < size {
        return Err(Error::Size(format!(
            "{}x{} image cannot hold a {size}x{size} patch",
            img.height(),
            img.width()
        )));
    }
    let (ny, nx) = (img.height() - size + 1, img.width() - size + 1);
    (0..count)
        .map(|_| {
            let y = rng.below(ny);
            let x = rng.below(nx);
            Ok((PatchCoord { x, y }, img.crop(y, x, size, size)?))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetConfig {
    pub image_dir: PathBuf,
    pub data_out: PathBuf,
    pub manifest_out: PathBuf,
    pub patches_per_image: usize,
    pub patch_size: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub ranges: NoiseRanges,
}

impl DatasetConfig {
    pub fn new(image_dir: impl Into<PathBuf>, data_out: impl Into<PathBuf>, seed: u64) -> Self {
        let data_out = data_out.into();
        let manifest_out = data_out.with_extension("manifest");
        DatasetConfig {
            image_dir: image_dir.into(),
            data_out,
            manifest_out,
            patches_per_image: 1000,
            patch_size: PATCH_SIZE,
            train_fraction: 0.8,
            seed,
            ranges: NoiseRanges::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SourceImage {
    pub name: String,
    pub height: usize,
    pub width: usize,
    pub crc32: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub seed: u64,
    pub patch_size: usize,
    pub patches_per_image: usize,
    pub train: usize,
    pub val: usize,
    pub ranges: NoiseRanges,
    pub sources: Vec<SourceImage>,
}

impl DatasetManifest {
    pub fn total(&self) -> usize {
        self.train + self.val
    }

    /// `key = value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        kv("format", format!("SRDD v{VERSION}"));
        kv("seed", self.seed.to_string());
        kv("patch_size", self.patch_size.to_string());
        kv("patches_per_image", self.patches_per_image.to_string());
        kv("images", self.sources.len().to_string());
        kv("total", self.total().to_string());
        kv("train", self.train.to_string());
        kv("val", self.val.to_string());
        kv("gaussian_var_max", format!("{:e}", self.ranges.var_max));
        kv("poisson_scale_min", format!("{:e}", self.ranges.s_min));
        kv("poisson_scale_max", format!("{:e}", self.ranges.s_max));
        for (i, src) in self.sources.iter().enumerate() {
            kv(
                &format!("image.{i}"),
                format!(
                    "{} {}x{} crc32={:08x}",
                    src.name, src.width, src.height, src.crc32
                ),
            );
        }
        s
    }
}

/// PPM files of a directory in file-name order.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("ppm"))
        {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Size(format!("no .ppm images in {}", dir.display())));
    }
    Ok(paths)
}

fn write_sample(w: &mut ByteWriter, sample: &PatchSample, split: Split) {
    w.f32s(sample.input.as_slice());
    w.f32s(sample.target.as_slice());
    w.u8(match split {
        Split::Train => 0,
        Split::Validation => 1,
    });
    w.u32(sample.source_image);
    w.u32(sample.coord.x as u32);
    w.u32(sample.coord.y as u32);
    w.u8(sample.noise.gaussian_var.is_some() as u8);
    w.f64(sample.noise.gaussian_var.unwrap_or(0.0));
    w.u8(sample.noise.poisson_scale.is_some() as u8);
    w.f64(sample.noise.poisson_scale.unwrap_or(0.0));
    w.u64(sample.noise.seed);
}

/// Generates the patch dataset described by `config`.
///
/// Image `i` (in file-name order) gets the sub-stream `derive(seed, i)` for
/// its patch corners and noise specs. A separate stream shuffles all sample
/// indices once; the first `train_fraction` of that order is the training
/// split. Samples are written in image order with their split flag. On any
/// error nothing is left behind at the output paths.
pub fn build_dataset(config: &DatasetConfig) -> Result<DatasetManifest> {
    let result = build_dataset_inner(config);
    if result.is_err() {
        let _ = std::fs::remove_file(&config.data_out);
        let _ = std::fs::remove_file(&config.manifest_out);
    }
    result
}

fn build_dataset_inner(config: &DatasetConfig) -> Result<DatasetManifest> {
    config.ranges.validate()?;
    let p = config.patch_size;
    if p == 0 || !p.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "patch size must be even and positive, got {p}"
        )));
    }
    if config.patches_per_image == 0
        || !(config.train_fraction > 0.0 && config.train_fraction <= 1.0)
    {
        return Err(Error::Config(
            "need patches_per_image >= 1 and train_fraction in (0, 1]".into(),
        ));
    }
    let paths = list_images(&config.image_dir)?;
    let total = paths.len() * config.patches_per_image;
    let train = ((total as f64) * config.train_fraction).round() as usize;

    let mut order: Vec<usize> = (0..total).collect();
    SeededRng::derive(config.seed, u64::MAX).shuffle(&mut order);
    let mut split = vec![Split::Validation; total];
    for &i in &order[..train] {
        split[i] = Split::Train;
    }

    let out_path = &config.data_out;
    let file = File::create(out_path).map_err(|e| Error::io(out_path, e))?;
    let mut out = BufWriter::new(file);
    let mut hasher = crc32fast::Hasher::new();
    let mut emit = |w: ByteWriter, out: &mut BufWriter<File>| -> Result<()> {
        let bytes = w.into_inner();
        hasher.update(&bytes);
        out.write_all(&bytes).map_err(|e| Error::io(out_path, e))
    };

    let mut header = ByteWriter::new();
    header.bytes(MAGIC);
    header.u32(VERSION);
    header.u64(total as u64);
    header.u64(train as u64);
    header.u32(p as u32);
    header.u32(3);
    emit(header, &mut out)?;

    let mut sources = Vec::with_capacity(paths.len());
    let mut index = 0;
    for (img_idx, path) in paths.iter().enumerate() {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let img = crate::imaging::decode_ppm(&bytes).map_err(|e| e.in_file(path))?;
        let mut rng = SeededRng::derive(config.seed, img_idx as u64);
        let patches = extract_patches(&img, config.patches_per_image, p, &mut rng)
            .map_err(|e| e.in_file(path))?;
        for (coord, patch) in patches {
            let spec = random_noise_spec(&mut rng, &config.ranges);
            let mut sample = degrade(&patch.to_tensor(), &spec)?;
            sample.source_image = img_idx as u32;
            sample.coord = coord;
            let mut w = ByteWriter::new();
            write_sample(&mut w, &sample, split[index]);
            emit(w, &mut out)?;
            index += 1;
        }
        sources.push(SourceImage {
            name: path
                .file_name()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned(),
            height: img.height(),
            width: img.width(),
            crc32: crc32fast::hash(&bytes),
        });
    }
    out.write_all(&hasher.finalize().to_le_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(out_path, e))?;

    let manifest = DatasetManifest {
        seed: config.seed,
        patch_size: p,
        patches_per_image: config.patches_per_image,
        train,
        val: total - train,
        ranges: config.ranges,
        sources,
    };
    std::fs::write(&config.manifest_out, manifest.to_text())
        .map_err(|e| Error::io(&config.manifest_out, e))?;
    Ok(manifest)
}

/// A dataset file held in memory, split into its two parts.
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub train: Vec<PatchSample>,
    pub val: Vec<PatchSample>,
    pub patch_size: usize,
}

pub fn decode_dataset(data: &[u8]) -> Result<Dataset> {
    let mut r = ByteReader::new(data);
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::format(0, "bad magic, not a dataset file"));
    }
    let at = r.pos();
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::format(
            at as u64,
            format!("unsupported version {version}"),
        ));
    }
    let count = r.u64("sample count")?;
    let at = r.pos();
    let train_count = r.u64("train count")?;
    if train_count > count {
        return Err(Error::format(
            at as u64,
            format!("train count {train_count} exceeds {count}"),
        ));
    }
    let at = r.pos();
    let p = r.u32("patch size")? as usize;
    let channels = r.u32("channels")? as usize;
    if p == 0 || p > 4096 || channels != 3 {
        return Err(Error::format(
            at as u64,
            format!("unsupported patch {p}x{p}x{channels}"),
        ));
    }
    let values = 3 * p * p;
    let record = 1 + 12 + 1 + 8 + 1 + 8 + 8 + 8 * values;
    if (count as u128) * (record as u128) + 4 != r.remaining().len() as u128 {
        return Err(r.err(format!(
            "{count} samples of {record} bytes do not match the {} bytes left",
            r.remaining().len()
        )));
    }
    let shape = crate::tensor::Shape4::new(1, 3, p, p)?;
    let mut ds = Dataset {
        patch_size: p,
        ..Dataset::default()
    };
    for _ in 0..count {
        let mut input = vec![0f32; values];
        let mut target = vec![0f32; values];
        r.f32s_into(&mut input, "input")?;
        r.f32s_into(&mut target, "target")?;
        let at = r.pos();
        let split = match r.u8("split")? {
            0 => Split::Train,
            1 => Split::Validation,
            s => return Err(Error::format(at as u64, format!("invalid split flag {s}"))),
        };
        let source_image = r.u32("source image")?;
        let x = r.u32("x")? as usize;
        let y = r.u32("y")? as usize;
        let has_g = r.u8("gaussian flag")? != 0;
        let var = r.f64("gaussian variance")?;
        let has_p = r.u8("poisson flag")? != 0;
        let scale = r.f64("poisson scale")?;
        let seed = r.u64("noise seed")?;
        let sample = PatchSample {
            input: Tensor::from_vec(shape, input)?,
            target: Tensor::from_vec(shape, target)?,
            source_image,
            coord: PatchCoord { x, y },
            noise: NoiseSpec {
                gaussian_var: has_g.then_some(var),
                poisson_scale: has_p.then_some(scale),
                seed,
            },
        };
        match split {
            Split::Train => ds.train.push(sample),
            Split::Validation => ds.val.push(sample),
        }
    }
    r.check_crc(0, "dataset")?;
    if ds.train.len() as u64 != train_count {
        return Err(Error::format(
            0,
            format!(
                "header promises {train_count} training samples, found {}",
                ds.train.len()
            ),
        ));
    }
    Ok(ds)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_dataset(&data).map_err(|e| e.in_file(path))
}

/// Clean image loader used by dataset preparation and evaluation.
pub fn load_clean(path: &Path) -> Result<ImageRGB> {
    load_ppm(path)
}
