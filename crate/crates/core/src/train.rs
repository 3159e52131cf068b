//! Minibatch training with per-epoch validation, metrics and checkpoints.
//!
//! A checkpoint is a weight file followed by a trailer, little-endian:
//!
//! ```text
//! "SRCK" | version u32 = 1 | completed epochs u32
//! learning rate f64 | clip flag u8 | clip norm f64 | batch size u64 | seed u64
//! rng words [u8; 32] | spare-normal flag u8 | spare normal f64
//! precision u8 (32 or 64)
//! if 64: every conv weight/bias and bn gamma/beta/mean/var again as f64
//! crc32 u32 of the trailer
//! ```
//!
//! The weight block stores `f32`; the `f64` block lets 64-bit runs resume
//! without rounding.

use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::dataset::{load_dataset, Dataset, PatchSample};
use crate::error::{Error, Result};
use crate::imaging::psnr_values;
use crate::layers::{mse_loss, Mode, SgdOptimizer};
use crate::model::{InitScheme, Layer, Network, SurdcnnConfig};
use crate::real::Real;
use crate::rng::{RngState, SeededRng};
use crate::tensor::Tensor;
use crate::weights::{read_network, write_network, ByteReader, ByteWriter, TRAILER_MAGIC};

pub const DESK_LEARNING_RATE: f64 = 0.1;
pub const DESK_CLIP_NORM: f64 = 0.1;
pub const PAPER_LEARNING_RATE: f64 = 2e-9;
pub const PAPER_EPOCHS: usize = 50;
pub const DEFAULT_BATCH_SIZE: usize = 64;
pub const METRICS_HEADER: &str = "epoch,train_loss,val_loss,val_psnr_gain";
const CHECKPOINT_VERSION: u32 = 1;
/// PSNR ceiling used when a patch is reproduced exactly.
const PSNR_CAP: f64 = 100.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl Precision {
    fn bits(self) -> u8 {
        match self {
            Precision::F32 => 32,
            Precision::F64 => 64,
        }
    }
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" | "32" => Ok(Precision::F32),
            "f64" | "64" => Ok(Precision::F64),
            _ => Err(Error::Config(format!(
                "unknown precision {s:?} (expected f32 or f64)"
            ))),
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.bits())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub clip_norm: Option<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub dataset: PathBuf,
    pub checkpoint: PathBuf,
    pub metrics: PathBuf,
    /// Plain weight file written after the last epoch.
    pub weights_out: Option<PathBuf>,
    pub precision: Precision,
    pub init: InitScheme,
    pub model: SurdcnnConfig,
    /// Continue from `checkpoint` instead of starting over.
    pub resume: bool,
}

impl TrainConfig {
    /// Desk defaults: learning rate 0.1, gradient-norm clip 0.1, batch 64.
    pub fn new(dataset: impl Into<PathBuf>, checkpoint: impl Into<PathBuf>, seed: u64) -> Self {
        let checkpoint = checkpoint.into();
        let metrics = checkpoint.with_extension("csv");
        TrainConfig {
            learning_rate: DESK_LEARNING_RATE,
            clip_norm: Some(DESK_CLIP_NORM),
            epochs: 15,
            batch_size: DEFAULT_BATCH_SIZE,
            seed,
            dataset: dataset.into(),
            checkpoint,
            metrics,
            weights_out: None,
            precision: Precision::F32,
            init: InitScheme::default(),
            model: SurdcnnConfig::default(),
            resume: false,
        }
    }

    /// Learning rate 2e-9, no clipping, 50 epochs.
    pub fn paper_literal(mut self) -> Self {
        self.learning_rate = PAPER_LEARNING_RATE;
        self.clip_norm = None;
        self.epochs = PAPER_EPOCHS;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config(
                "batch size and epochs must be at least 1".into(),
            ));
        }
        if self.epochs > u32::MAX as usize {
            return Err(Error::Config(format!("too many epochs: {}", self.epochs)));
        }
        SgdOptimizer::new(self.learning_rate)?.with_clip_norm(self.clip_norm)?;
        self.model.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_psnr_gain: f64,
}

impl MetricsRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{}",
            self.epoch, self.train_loss, self.val_loss, self.val_psnr_gain
        )
    }

    fn parse(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return None;
        }
        Some(MetricsRow {
            epoch: f[0].parse().ok()?,
            train_loss: f[1].parse().ok()?,
            val_loss: f[2].parse().ok()?,
            val_psnr_gain: f[3].parse().ok()?,
        })
    }
}

/// Rows of a metrics CSV written by [`train`].
pub fn read_metrics(path: impl AsRef<Path>) -> Result<Vec<MetricsRow>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(METRICS_HEADER) {
        return Err(Error::format(0, "missing metrics header").in_file(path));
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            MetricsRow::parse(l).ok_or_else(|| {
                Error::format(0, format!("bad metrics row {}: {l:?}", i + 2)).in_file(path)
            })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub network: Network<f32>,
    /// Every row in the metrics file, including ones from before a resume.
    pub rows: Vec<MetricsRow>,
}

/// Training state stored after the weight block of a checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointState {
    pub epochs_done: usize,
    pub learning_rate: f64,
    pub clip_norm: Option<f64>,
    pub batch_size: usize,
    pub seed: u64,
    pub rng: RngState,
    pub precision: Precision,
}

/// Visits every stored array of the network: conv weight and bias, batch
/// norm gamma, beta, moving mean and moving variance.
fn for_each_array<T: Real>(
    net: &mut Network<T>,
    mut f: impl FnMut(&mut [T]) -> Result<()>,
) -> Result<()> {
    for layer in net.layers_mut() {
        match layer {
            Layer::Conv(c) => {
                f(c.weight_mut())?;
                f(c.bias_mut())?;
            }
            Layer::BatchNorm(b) => {
                f(b.gamma_mut())?;
                f(b.beta_mut())?;
                let mut mean = b.moving_mean().to_vec();
                let mut var = b.moving_var().to_vec();
                f(&mut mean)?;
                f(&mut var)?;
                b.set_moving_stats(&mean, &var)?;
            }
            Layer::Tanh(_) => {}
        }
    }
    Ok(())
}

fn encode_checkpoint<T: Real>(net: &Network<T>, state: &CheckpointState) -> Vec<u8> {
    let mut w = ByteWriter::new();
    write_network(&mut w, net);
    let start = w.len();
    w.bytes(TRAILER_MAGIC);
    w.u32(CHECKPOINT_VERSION);
    w.u32(state.epochs_done as u32);
    w.f64(state.learning_rate);
    w.u8(state.clip_norm.is_some() as u8);
    w.f64(state.clip_norm.unwrap_or(0.0));
    w.u64(state.batch_size as u64);
    w.u64(state.seed);
    w.bytes(&state.rng.words);
    w.u8(state.rng.spare_normal.is_some() as u8);
    w.f64(state.rng.spare_normal.unwrap_or(0.0));
    w.u8(state.precision.bits());
    if state.precision == Precision::F64 {
        let mut copy = net.clone();
        for_each_array(&mut copy, |a| {
            a.iter().for_each(|v| w.f64(v.as_f64()));
            Ok(())
        })
        .expect("writing cannot fail");
    }
    w.crc(start);
    w.into_inner()
}

/// Parses a checkpoint into its network (in `T`, train mode) and state.
pub fn decode_checkpoint<T: Real>(data: &[u8]) -> Result<(Network<T>, CheckpointState)> {
    let mut r = ByteReader::new(data);
    let mut net: Network<T> = read_network(&mut r)?.cast();
    let start = r.pos();
    if r.take(4, "checkpoint magic")? != TRAILER_MAGIC {
        return Err(Error::format(
            start as u64,
            "weight file has no checkpoint trailer",
        ));
    }
    let at = r.pos();
    let version = r.u32("checkpoint version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(
            at as u64,
            format!("unsupported checkpoint version {version}"),
        ));
    }
    let epochs_done = r.u32("epoch")? as usize;
    let learning_rate = r.f64("learning rate")?;
    let has_clip = r.u8("clip flag")? != 0;
    let clip = r.f64("clip norm")?;
    let batch_size = r.u64("batch size")? as usize;
    let seed = r.u64("seed")?;
    let words: [u8; 32] = r.take(32, "rng state")?.try_into().unwrap();
    let has_spare = r.u8("spare flag")? != 0;
    let spare = r.f64("spare normal")?;
    let at = r.pos();
    let precision = match r.u8("precision")? {
        32 => Precision::F32,
        64 => Precision::F64,
        p => return Err(Error::format(at as u64, format!("invalid precision {p}"))),
    };
    if precision == Precision::F64 {
        for_each_array(&mut net, |a| {
            for v in a.iter_mut() {
                *v = T::from_f64(r.f64("f64 parameters")?);
            }
            Ok(())
        })?;
    }
    r.check_crc(start, "checkpoint trailer")?;
    if !r.remaining().is_empty() {
        return Err(r.err("unexpected bytes after checkpoint"));
    }
    net.set_mode(Mode::Train);
    let state = CheckpointState {
        epochs_done,
        learning_rate,
        clip_norm: has_clip.then_some(clip),
        batch_size,
        seed,
        rng: RngState {
            words,
            spare_normal: has_spare.then_some(spare),
        },
        precision,
    };
    Ok((net, state))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)
        .and_then(|_| std::fs::rename(&tmp, path))
        .map_err(|e| {
            let _ = std::fs::remove_file(&tmp);
            Error::io(path, e)
        })
}

fn batch_tensors<T: Real>(samples: &[&PatchSample]) -> Result<(Tensor<T>, Tensor<T>)> {
    let inputs: Vec<Tensor<T>> = samples.iter().map(|s| s.input.cast()).collect();
    let targets: Vec<Tensor<T>> = samples.iter().map(|s| s.target.cast()).collect();
    Ok((
        Tensor::stack(&inputs.iter().collect::<Vec<_>>())?,
        Tensor::stack(&targets.iter().collect::<Vec<_>>())?,
    ))
}

fn capped_psnr(a: &[f64], b: &[f64]) -> Result<f64> {
    Ok(psnr_values(a, b)?.min(PSNR_CAP))
}

/// Mean loss and mean PSNR gain of the clamped estimate `input - residual`
/// over the bicubic input, using moving batch-norm statistics.
pub fn validate<T: Real>(
    net: &Network<T>,
    samples: &[PatchSample],
    batch_size: usize,
) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::Config("validation split is empty".into()));
    }
    let mut loss_sum = 0.0;
    let mut gain_sum = 0.0;
    for chunk in samples.chunks(batch_size.max(1)) {
        let refs: Vec<&PatchSample> = chunk.iter().collect();
        let (x, y) = batch_tensors::<T>(&refs)?;
        let residual = net.predict_residual(&x)?;
        let (loss, _) = mse_loss(&residual, &y)?;
        loss_sum += loss * chunk.len() as f64;
        for (k, s) in chunk.iter().enumerate() {
            let input: Vec<f64> = s.input.as_slice().iter().map(|v| v.as_f64()).collect();
            let original: Vec<f64> = s.original().as_slice().iter().map(|v| v.as_f64()).collect();
            let output: Vec<f64> = input
                .iter()
                .zip(residual.item(k))
                .map(|(i, r)| (i - r.as_f64()).clamp(0.0, 1.0))
                .collect();
            gain_sum += capped_psnr(&output, &original)? - capped_psnr(&input, &original)?;
        }
    }
    let n = samples.len() as f64;
    Ok((loss_sum / n, gain_sum / n))
}

/// Trains on the dataset file named in `config`, calling `on_epoch` after
/// each epoch's checkpoint and metrics row are written.
pub fn train(config: &TrainConfig, on_epoch: impl FnMut(&MetricsRow)) -> Result<TrainOutcome> {
    config.validate()?;
    let data = load_dataset(&config.dataset)?;
    match config.precision {
        Precision::F32 => run::<f32>(config, &data, on_epoch),
        Precision::F64 => run::<f64>(config, &data, on_epoch),
    }
}

fn start_state<T: Real>(
    config: &TrainConfig,
) -> Result<(Network<T>, SeededRng, usize, Vec<MetricsRow>)> {
    if !config.resume {
        let mut rng = SeededRng::new(config.seed);
        let mut net = Network::<T>::build(config.model.clone(), config.init, &mut rng)?;
        net.set_mode(Mode::Train);
        return Ok((net, rng, 0, Vec::new()));
    }
    let path = &config.checkpoint;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (net, state) = decode_checkpoint::<T>(&bytes).map_err(|e| e.in_file(path))?;
    let mismatch = |what: &str| {
        Err(Error::Config(format!(
            "checkpoint {} was written with a different {what}",
            path.display()
        )))
    };
    if state.learning_rate != config.learning_rate || state.clip_norm != config.clip_norm {
        return mismatch("learning rate or clip norm");
    }
    if state.batch_size != config.batch_size || state.seed != config.seed {
        return mismatch("batch size or seed");
    }
    if state.precision != config.precision {
        return mismatch("precision");
    }
    if *net.config() != config.model {
        return mismatch("model configuration");
    }
    let rows: Vec<MetricsRow> = read_metrics(&config.metrics)?
        .into_iter()
        .filter(|r| r.epoch <= state.epochs_done)
        .collect();
    if rows.len() != state.epochs_done {
        return Err(Error::State(format!(
            "{} holds {} rows for {} completed epochs",
            config.metrics.display(),
            rows.len(),
            state.epochs_done
        )));
    }
    Ok((
        net,
        SeededRng::from_state(state.rng),
        state.epochs_done,
        rows,
    ))
}

fn run<T: Real>(
    config: &TrainConfig,
    data: &Dataset,
    mut on_epoch: impl FnMut(&MetricsRow),
) -> Result<TrainOutcome> {
    if data.train.is_empty() || data.val.is_empty() {
        return Err(Error::Config(format!(
            "{} needs non-empty training and validation splits",
            config.dataset.display()
        )));
    }
    let opt = SgdOptimizer::new(config.learning_rate)?.with_clip_norm(config.clip_norm)?;
    let (mut net, mut rng, done, mut rows) = start_state::<T>(config)?;

    let mut text = format!("{METRICS_HEADER}\n");
    rows.iter()
        .for_each(|r| text += &format!("{}\n", r.csv_line()));
    std::fs::write(&config.metrics, text).map_err(|e| Error::io(&config.metrics, e))?;
    let mut metrics: File = OpenOptions::new()
        .append(true)
        .open(&config.metrics)
        .map_err(|e| Error::io(&config.metrics, e))?;

    let mut order: Vec<usize> = (0..data.train.len()).collect();
    for epoch in done + 1..=config.epochs {
        order.iter_mut().enumerate().for_each(|(i, v)| *v = i);
        rng.shuffle(&mut order);
        net.set_mode(Mode::Train);
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let refs: Vec<&PatchSample> = chunk.iter().map(|&i| &data.train[i]).collect();
            let (x, y) = batch_tensors::<T>(&refs)?;
            let context =
                |e: Error| Error::NonFinite(format!("epoch {epoch}, batch {}: {e}", b + 1));
            let pred = net.forward(&x).map_err(|e| match e {
                Error::NonFinite(_) => context(e),
                e => e,
            })?;
            let (loss, grad) = mse_loss(&pred, &y)?;
            if !loss.is_finite() {
                return Err(context(Error::NonFinite("loss".into())));
            }
            net.backward(&grad).map_err(|e| match e {
                Error::NonFinite(_) => context(e),
                e => e,
            })?;
            opt.step(&mut net);
            loss_sum += loss * chunk.len() as f64;
        }
        net.set_mode(Mode::Infer);
        let (val_loss, val_psnr_gain) = validate(&net, &data.val, config.batch_size)?;
        let row = MetricsRow {
            epoch,
            train_loss: loss_sum / data.train.len() as f64,
            val_loss,
            val_psnr_gain,
        };

        let state = CheckpointState {
            epochs_done: epoch,
            learning_rate: config.learning_rate,
            clip_norm: config.clip_norm,
            batch_size: config.batch_size,
            seed: config.seed,
            rng: rng.state(),
            precision: config.precision,
        };
        write_atomic(&config.checkpoint, &encode_checkpoint(&net, &state))?;
        writeln!(metrics, "{}", row.csv_line())
            .and_then(|_| metrics.flush())
            .map_err(|e| Error::io(&config.metrics, e))?;
        rows.push(row);
        on_epoch(&row);
    }

    net.set_mode(Mode::Infer);
    let network: Network<f32> = net.cast();
    if let Some(path) = &config.weights_out {
        crate::weights::save_weights(&network, path)?;
    }
    Ok(TrainOutcome { network, rows })
}
