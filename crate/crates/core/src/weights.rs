//! Binary weight files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "SRDC" | version u32 = 1
//! depth u32 | width u32 | in_channels u32 | out_channels u32
//! bn count u32 | bn indices u32... | tanh count u32 | tanh indices u32...
//! layer count u32
//! per layer: tag u8
//!   1 conv: c_in u32, c_out u32, weight f32 x (c_out*c_in*9), bias f32 x c_out
//!   2 bn:   channels u32, momentum f64, eps f64,
//!           gamma, beta, moving_mean, moving_var (f32 x channels each)
//!   3 tanh
//! crc32 u32 of every preceding byte
//! ```
//!
//! Parameters are stored as `f32` regardless of the network's precision.
//! A file may carry trailing data only if it starts with [`TRAILER_MAGIC`]
//! (training checkpoints append their state that way).

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::layers::{BatchNorm2d, Mode};
use crate::model::{Layer, Network, SurdcnnConfig};
use crate::real::Real;

pub const MAGIC: &[u8; 4] = b"SRDC";
pub const VERSION: u32 = 1;
pub const TRAILER_MAGIC: &[u8; 4] = b"SRCK";

const TAG_CONV: u8 = 1;
const TAG_BN: u8 = 2;
const TAG_TANH: u8 = 3;

// Upper bounds that keep a corrupt header from requesting absurd buffers.
const MAX_DEPTH: u32 = 10_000;
const MAX_CHANNELS: u32 = 1 << 16;

pub(crate) struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub(crate) fn new() -> Self {
        ByteWriter { buf: Vec::new() }
    }

    pub(crate) fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub(crate) fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub(crate) fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub(crate) fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub(crate) fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub(crate) fn f32s<T: Real>(&mut self, values: &[T]) {
        for v in values {
            self.buf
                .extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }

    pub(crate) fn crc(&mut self, from: usize) {
        let crc = crc32fast::hash(&self.buf[from..]);
        self.u32(crc);
    }

    pub(crate) fn len(&self) -> usize {
        self.buf.len()
    }

    pub(crate) fn into_inner(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) struct ByteReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(data: &'a [u8]) -> Self {
        ByteReader { data, pos: 0 }
    }

    pub(crate) fn pos(&self) -> usize {
        self.pos
    }

    pub(crate) fn remaining(&self) -> &'a [u8] {
        &self.data[self.pos..]
    }

    pub(crate) fn err(&self, message: impl Into<String>) -> Error {
        Error::format(self.pos as u64, message)
    }

    pub(crate) fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            return Err(self.err(format!(
                "truncated while reading {what}: need {n} bytes, {} left",
                self.data.len() - self.pos
            )));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub(crate) fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub(crate) fn f32s_into<T: Real>(&mut self, out: &mut [T], what: &str) -> Result<()> {
        let start = self.pos;
        let raw = self.take(out.len() * 4, what)?;
        for (i, (d, chunk)) in out.iter_mut().zip(raw.chunks_exact(4)).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::format(
                    (start + 4 * i) as u64,
                    format!("non-finite value in {what}"),
                ));
            }
            *d = T::from_f64(v as f64);
        }
        Ok(())
    }

    /// Checks the CRC32 of `data[from..pos]` against the next u32.
    pub(crate) fn check_crc(&mut self, from: usize, what: &str) -> Result<()> {
        let expected = crc32fast::hash(&self.data[from..self.pos]);
        let at = self.pos;
        let stored = self.u32(what)?;
        if stored != expected {
            return Err(Error::format(
                at as u64,
                format!("{what} checksum mismatch (stored {stored:08x}, computed {expected:08x})"),
            ));
        }
        Ok(())
    }
}

pub fn encode_weights<T: Real>(net: &Network<T>) -> Vec<u8> {
    let mut w = ByteWriter::new();
    write_network(&mut w, net);
    w.into_inner()
}

pub(crate) fn write_network<T: Real>(w: &mut ByteWriter, net: &Network<T>) {
    let start = w.len();
    let cfg = net.config();
    w.bytes(MAGIC);
    w.u32(VERSION);
    for v in [cfg.depth, cfg.width, cfg.in_channels, cfg.out_channels] {
        w.u32(v as u32);
    }
    for set in [&cfg.bn_layers, &cfg.tanh_layers] {
        w.u32(set.len() as u32);
        set.iter().for_each(|&i| w.u32(i as u32));
    }
    w.u32(net.layers().len() as u32);
    for layer in net.layers() {
        match layer {
            Layer::Conv(c) => {
                w.u8(TAG_CONV);
                w.u32(c.in_channels() as u32);
                w.u32(c.out_channels() as u32);
                w.f32s(c.weight());
                w.f32s(c.bias());
            }
            Layer::BatchNorm(b) => {
                w.u8(TAG_BN);
                w.u32(b.channels() as u32);
                w.f64(b.momentum());
                w.f64(b.eps());
                w.f32s(b.gamma());
                w.f32s(b.beta());
                w.f32s(b.moving_mean());
                w.f32s(b.moving_var());
            }
            Layer::Tanh(_) => w.u8(TAG_TANH),
        }
    }
    w.crc(start);
}

/// Bytes taken by the layer count, layer records and checksum of `config`.
fn encoded_layers_len(config: &SurdcnnConfig) -> Option<u64> {
    let mut total: u64 = 4 + 4;
    for i in 1..=config.depth {
        let (ci, co) = config.conv_channels(i);
        let (ci, co) = (ci as u64, co as u64);
        let conv = co
            .checked_mul(ci)?
            .checked_mul(9)?
            .checked_add(co)?
            .checked_mul(4)?;
        total = total.checked_add(1 + 8)?.checked_add(conv)?;
        if config.bn_layers.contains(&i) {
            total = total
                .checked_add(1 + 4 + 16)?
                .checked_add(co.checked_mul(16)?)?;
        }
        if config.tanh_layers.contains(&i) {
            total = total.checked_add(1)?;
        }
    }
    Some(total)
}

fn read_index_set(r: &mut ByteReader<'_>, what: &str, depth: u32) -> Result<BTreeSet<usize>> {
    let count = r.u32(what)?;
    if count > depth {
        return Err(r.err(format!("{what}: {count} entries for depth {depth}")));
    }
    let mut set = BTreeSet::new();
    for _ in 0..count {
        let at = r.pos();
        let i = r.u32(what)?;
        if i == 0 || i > depth || !set.insert(i as usize) {
            return Err(Error::format(
                at as u64,
                format!("{what}: invalid layer index {i}"),
            ));
        }
    }
    Ok(set)
}

/// Parses a network from the start of `data`. Returns it together with
/// the number of bytes consumed. The network comes back in infer mode.
pub(crate) fn read_network(r: &mut ByteReader<'_>) -> Result<Network<f32>> {
    let start = r.pos();
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::format(start as u64, "bad magic, not a weight file"));
    }
    let at = r.pos();
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::format(
            at as u64,
            format!("unsupported version {version}"),
        ));
    }
    let mut dims = [0u32; 4];
    for (d, name) in dims
        .iter_mut()
        .zip(["depth", "width", "in_channels", "out_channels"])
    {
        let at = r.pos();
        *d = r.u32(name)?;
        let limit = if name == "depth" {
            MAX_DEPTH
        } else {
            MAX_CHANNELS
        };
        if *d == 0 || *d > limit {
            return Err(Error::format(at as u64, format!("implausible {name} {d}")));
        }
    }
    let bn_layers = read_index_set(r, "batch-norm layer set", dims[0])?;
    let tanh_layers = read_index_set(r, "tanh layer set", dims[0])?;
    let config = SurdcnnConfig {
        depth: dims[0] as usize,
        width: dims[1] as usize,
        in_channels: dims[2] as usize,
        out_channels: dims[3] as usize,
        bn_layers,
        tanh_layers,
    };
    config.validate().map_err(|e| r.err(e.to_string()))?;
    let needed = encoded_layers_len(&config);
    if needed.is_none_or(|n| n > r.remaining().len() as u64) {
        return Err(r.err(format!(
            "configuration needs more bytes than the {} left",
            r.remaining().len()
        )));
    }
    let mut net = Network::<f32>::zeroed(config)?;
    let at = r.pos();
    let count = r.u32("layer count")? as usize;
    if count != net.layers().len() {
        return Err(Error::format(
            at as u64,
            format!(
                "{count} layers stored, configuration implies {}",
                net.layers().len()
            ),
        ));
    }
    for (i, layer) in net.layers_mut().iter_mut().enumerate() {
        let at = r.pos();
        let tag = r.u8("layer tag")?;
        match (tag, layer) {
            (TAG_CONV, Layer::Conv(c)) => {
                let at = r.pos();
                let (ci, co) = (r.u32("conv c_in")? as usize, r.u32("conv c_out")? as usize);
                if (ci, co) != (c.in_channels(), c.out_channels()) {
                    return Err(Error::format(
                        at as u64,
                        format!(
                            "layer {i}: conv {ci}->{co}, expected {}->{}",
                            c.in_channels(),
                            c.out_channels()
                        ),
                    ));
                }
                r.f32s_into(c.weight_mut(), "conv weight")?;
                r.f32s_into(c.bias_mut(), "conv bias")?;
            }
            (TAG_BN, Layer::BatchNorm(b)) => {
                let at = r.pos();
                let channels = r.u32("bn channels")? as usize;
                if channels != b.channels() {
                    return Err(Error::format(
                        at as u64,
                        format!(
                            "layer {i}: bn over {channels} channels, expected {}",
                            b.channels()
                        ),
                    ));
                }
                let at = r.pos();
                let (momentum, eps) = (r.f64("bn momentum")?, r.f64("bn eps")?);
                let mut bn = BatchNorm2d::with_hyperparameters(channels, momentum, eps)
                    .map_err(|e| Error::format(at as u64, e.to_string()))?;
                r.f32s_into(bn.gamma_mut(), "bn gamma")?;
                r.f32s_into(bn.beta_mut(), "bn beta")?;
                let mut mean = vec![0f32; channels];
                let mut var = vec![0f32; channels];
                r.f32s_into(&mut mean, "bn moving mean")?;
                let at = r.pos();
                r.f32s_into(&mut var, "bn moving variance")?;
                bn.set_moving_stats(&mean, &var)
                    .map_err(|e| Error::format(at as u64, e.to_string()))?;
                *b = bn;
            }
            (TAG_TANH, Layer::Tanh(_)) => {}
            (tag, expected) => {
                return Err(Error::format(
                    at as u64,
                    format!("layer {i}: tag {tag}, expected a {} layer", expected.kind()),
                ));
            }
        }
    }
    r.check_crc(start, "weight block")?;
    net.set_mode(Mode::Infer);
    Ok(net)
}

pub fn decode_weights(data: &[u8]) -> Result<Network<f32>> {
    let mut r = ByteReader::new(data);
    let net = read_network(&mut r)?;
    let rest = r.remaining();
    if !rest.is_empty() && !rest.starts_with(TRAILER_MAGIC) {
        return Err(r.err(format!("{} unexpected trailing bytes", rest.len())));
    }
    Ok(net)
}

pub fn save_weights<T: Real>(net: &Network<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_weights(net)).map_err(|e| Error::io(path, e))
}

/// Loads a weight file (or the weight block of a checkpoint). Convolution
/// parameters do not depend on image size, so the result runs on inputs of
/// any height and width. Returned in infer mode.
pub fn load_weights(path: impl AsRef<Path>) -> Result<Network<f32>> {
    let path = path.as_ref();
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_weights(&data).map_err(|e| e.in_file(path))
}

fn summary(values: &[f32]) -> String {
    let n = values.len() as f64;
    let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n;
    let std = (values
        .iter()
        .map(|&v| (v as f64 - mean).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let min = values.iter().copied().fold(f32::INFINITY, f32::min);
    let max = values.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    format!("mean {mean:+.4e} std {std:.4e} min {min:+.4e} max {max:+.4e}")
}

/// Human-readable listing of a network: configuration, counts and per-layer
/// parameter statistics.
pub fn describe(net: &Network<f32>) -> String {
    let cfg = net.config();
    let mut out = String::new();
    let set = |s: &BTreeSet<usize>| {
        s.iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    writeln!(out, "format: SRDC v{VERSION}").unwrap();
    writeln!(
        out,
        "depth: {}, width: {}, channels: {} -> {}",
        cfg.depth, cfg.width, cfg.in_channels, cfg.out_channels
    )
    .unwrap();
    writeln!(out, "batch-norm layers: {}", set(&cfg.bn_layers)).unwrap();
    writeln!(out, "tanh layers: {}", set(&cfg.tanh_layers)).unwrap();
    writeln!(out, "{}", net.count_params()).unwrap();
    let mut conv_index = 0;
    for layer in net.layers() {
        match layer {
            Layer::Conv(c) => {
                conv_index += 1;
                writeln!(
                    out,
                    "{conv_index:>3} conv {}->{} weight [{}] bias [{}]",
                    c.in_channels(),
                    c.out_channels(),
                    summary(c.weight()),
                    summary(c.bias())
                )
                .unwrap();
            }
            Layer::BatchNorm(b) => {
                writeln!(
                    out,
                    "    bn {} momentum {} eps {:e} gamma [{}] beta [{}] moving_mean [{}] moving_var [{}]",
                    b.channels(),
                    b.momentum(),
                    b.eps(),
                    summary(b.gamma()),
                    summary(b.beta()),
                    summary(b.moving_mean()),
                    summary(b.moving_var())
                )
                .unwrap();
            }
            Layer::Tanh(_) => writeln!(out, "    tanh").unwrap(),
        }
    }
    out
}
