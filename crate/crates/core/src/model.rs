//! The 20-layer residual network: topology, parameter bookkeeping and the
//! forward/backward passes through the whole stack.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::layers::{BatchNorm2d, Conv2d, Mode, Parameterized, Tanh};
use crate::real::Real;
use crate::rng::SeededRng;
use crate::tensor::Tensor;

/// How convolution weights are drawn at build time. Biases start at zero,
/// batch-norm scales at one and shifts at zero in both schemes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InitScheme {
    /// `N(0, 2 / fan_in)` with `fan_in = 9 * c_in`, except the output
    /// convolution, whose weights start at zero so the initial residual
    /// estimate is zero.
    #[default]
    He,
    /// Unit normal weights.
    UnitNormal,
}

impl InitScheme {
    fn std(self, fan_in: usize) -> f64 {
        match self {
            InitScheme::He => (2.0 / fan_in as f64).sqrt(),
            InitScheme::UnitNormal => 1.0,
        }
    }
}

impl std::str::FromStr for InitScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "he" => Ok(InitScheme::He),
            "unit-normal" | "paper" => Ok(InitScheme::UnitNormal),
            other => Err(Error::Config(format!(
                "unknown init scheme {other:?} (expected he or unit-normal)"
            ))),
        }
    }
}

/// Topology of the stack. Layer indices are 1-based: layer `i` is the
/// `i`-th convolution, optionally followed by batch norm and then tanh.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SurdcnnConfig {
    pub depth: usize,
    pub width: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub bn_layers: BTreeSet<usize>,
    pub tanh_layers: BTreeSet<usize>,
}

impl Default for SurdcnnConfig {
    /// 20 convolutions of 64 maps; batch norm on layers 2..=19, tanh on
    /// layers 1..=10.
    fn default() -> Self {
        SurdcnnConfig {
            depth: 20,
            width: 64,
            in_channels: 3,
            out_channels: 3,
            bn_layers: (2..=19).collect(),
            tanh_layers: (1..=10).collect(),
        }
    }
}

impl SurdcnnConfig {
    /// Same placement rule as the default (batch norm on every inner layer,
    /// tanh on the first half) at another depth and width.
    pub fn scaled(depth: usize, width: usize) -> Self {
        SurdcnnConfig {
            depth,
            width,
            in_channels: 3,
            out_channels: 3,
            bn_layers: (2..depth).collect(),
            tanh_layers: (1..=depth / 2).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.width == 0 || self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::Config(format!(
                "depth, width and channel counts must be positive: {self:?}"
            )));
        }
        for (name, set) in [("batch-norm", &self.bn_layers), ("tanh", &self.tanh_layers)] {
            if let Some(bad) = set.iter().find(|&&i| i == 0 || i > self.depth) {
                return Err(Error::Config(format!(
                    "{name} layer index {bad} outside 1..={}",
                    self.depth
                )));
            }
        }
        Ok(())
    }

    /// `(c_in, c_out)` of convolution `layer` (1-based).
    pub fn conv_channels(&self, layer: usize) -> (usize, usize) {
        let c_in = if layer == 1 {
            self.in_channels
        } else {
            self.width
        };
        let c_out = if layer == self.depth {
            self.out_channels
        } else {
            self.width
        };
        (c_in, c_out)
    }
}

#[derive(Clone, Debug)]
pub enum Layer<T: Real = f32> {
    Conv(Conv2d<T>),
    BatchNorm(BatchNorm2d<T>),
    Tanh(Tanh<T>),
}

impl<T: Real> Layer<T> {
    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        match self {
            Layer::Conv(l) => l.forward(x, mode),
            Layer::BatchNorm(l) => l.forward(x, mode),
            Layer::Tanh(l) => l.forward(x, mode),
        }
    }

    fn apply_infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        match self {
            Layer::Conv(l) => l.apply(x),
            Layer::BatchNorm(l) => l.apply_infer(x),
            Layer::Tanh(_) => Ok(x.map(|v| v.tanh())),
        }
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        match self {
            Layer::Conv(l) => l.backward(grad),
            Layer::BatchNorm(l) => l.backward(grad),
            Layer::Tanh(l) => l.backward(grad),
        }
    }

    fn clear_cache(&mut self) {
        match self {
            Layer::Conv(l) => l.clear_cache(),
            Layer::BatchNorm(l) => l.clear_cache(),
            Layer::Tanh(l) => l.clear_cache(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Conv(_) => "conv",
            Layer::BatchNorm(_) => "bn",
            Layer::Tanh(_) => "tanh",
        }
    }

    /// `(trainable, non_trainable)` parameter counts.
    pub fn param_counts(&self) -> (usize, usize) {
        match self {
            Layer::Conv(l) => (l.param_count(), 0),
            Layer::BatchNorm(l) => (l.trainable_count(), l.non_trainable_count()),
            Layer::Tanh(_) => (0, 0),
        }
    }
}

impl<T: Real> Parameterized<T> for Layer<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut [T], &mut [T])) {
        match self {
            Layer::Conv(l) => l.visit_params(f),
            Layer::BatchNorm(l) => l.visit_params(f),
            Layer::Tanh(l) => l.visit_params(f),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamCount {
    pub trainable: usize,
    pub non_trainable: usize,
    pub total: usize,
}

impl fmt::Display for ParamCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "trainable: {}, non-trainable: {}, total: {}",
            self.trainable, self.non_trainable, self.total
        )
    }
}

/// Sum per-layer counts of any layer sequence.
pub fn count_layer_params<T: Real>(layers: &[Layer<T>]) -> ParamCount {
    let (trainable, non_trainable) = layers
        .iter()
        .map(Layer::param_counts)
        .fold((0, 0), |(a, b), (t, n)| (a + t, b + n));
    ParamCount {
        trainable,
        non_trainable,
        total: trainable + non_trainable,
    }
}

/// A fully convolutional stack: it accepts inputs of any spatial size and
/// returns an output of the same size.
#[derive(Clone, Debug)]
pub struct Network<T: Real = f32> {
    config: SurdcnnConfig,
    layers: Vec<Layer<T>>,
    // 1-based conv index of every layer, for diagnostics
    owners: Vec<usize>,
    mode: Mode,
}

impl<T: Real> Network<T> {
    /// Layer structure of `config` with all convolution parameters zero.
    pub fn zeroed(config: SurdcnnConfig) -> Result<Self> {
        config.validate()?;
        let mut layers = Vec::new();
        let mut owners = Vec::new();
        for i in 1..=config.depth {
            let (c_in, c_out) = config.conv_channels(i);
            layers.push(Layer::Conv(Conv2d::new(c_in, c_out)?));
            owners.push(i);
            if config.bn_layers.contains(&i) {
                layers.push(Layer::BatchNorm(BatchNorm2d::new(c_out)?));
                owners.push(i);
            }
            if config.tanh_layers.contains(&i) {
                layers.push(Layer::Tanh(Tanh::new()));
                owners.push(i);
            }
        }
        Ok(Network {
            config,
            layers,
            owners,
            mode: Mode::Train,
        })
    }

    /// Builds the stack and draws convolution weights from `rng`, layer by
    /// layer in order.
    pub fn build(config: SurdcnnConfig, init: InitScheme, rng: &mut SeededRng) -> Result<Self> {
        let mut net = Self::zeroed(config)?;
        let depth = net.config.depth;
        for (layer, &owner) in net.layers.iter_mut().zip(&net.owners) {
            if let Layer::Conv(conv) = layer {
                if owner == depth && init == InitScheme::He {
                    continue;
                }
                let std = init.std(conv.fan_in());
                conv.init_normal(rng, std)?;
            }
        }
        Ok(net)
    }

    pub fn config(&self) -> &SurdcnnConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        if mode != self.mode {
            self.layers.iter_mut().for_each(Layer::clear_cache);
        }
        self.mode = mode;
    }

    pub fn count_params(&self) -> ParamCount {
        count_layer_params(&self.layers)
    }

    /// Zero every convolution weight and bias, which makes the network
    /// output identically zero.
    pub fn zero_conv_params(&mut self) {
        for layer in &mut self.layers {
            if let Layer::Conv(c) = layer {
                c.weight_mut().fill(T::zero());
                c.bias_mut().fill(T::zero());
            }
        }
    }

    fn layer_name(&self, index: usize) -> String {
        format!(
            "layer {} ({})",
            self.owners[index],
            self.layers[index].kind()
        )
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        if x.shape().c != self.config.in_channels {
            return Err(Error::Shape(format!(
                "network expects {} input channels, got {}",
                self.config.in_channels,
                x.shape()
            )));
        }
        Ok(())
    }

    /// Forward pass in the current mode. In train mode every layer keeps
    /// what its backward pass needs, and the first layer producing a
    /// non-finite value is reported.
    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let mode = self.mode;
        let mut h = x.clone();
        for i in 0..self.layers.len() {
            h = self.layers[i].forward(&h, mode)?;
            if mode == Mode::Train && !h.all_finite() {
                return Err(Error::NonFinite(format!(
                    "output of {}",
                    self.layer_name(i)
                )));
            }
        }
        Ok(h)
    }

    /// Back-propagates `grad` (gradient of the loss w.r.t. the output),
    /// accumulating parameter gradients. Returns the input gradient.
    pub fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        if self.mode != Mode::Train {
            return Err(Error::Mode("backward needs train mode".into()));
        }
        let mut g = grad.clone();
        for i in (0..self.layers.len()).rev() {
            g = self.layers[i].backward(&g)?;
            if !g.all_finite() {
                return Err(Error::NonFinite(format!(
                    "input gradient of {}",
                    self.layer_name(i)
                )));
            }
        }
        Ok(g)
    }

    /// Residual estimate for a bicubic-upscaled image. Uses the moving
    /// batch-norm statistics, so the network must be in infer mode; the
    /// result is a pure function of weights, statistics and input.
    pub fn predict_residual(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        if self.mode != Mode::Infer {
            return Err(Error::Mode("predict_residual needs infer mode".into()));
        }
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in &self.layers {
            h = layer.apply_infer(&h)?;
        }
        Ok(h)
    }

    /// Copy of the network in another precision. Caches are not carried over.
    pub fn cast<U: Real>(&self) -> Network<U> {
        let mut out = Network::<U>::zeroed(self.config.clone()).expect("validated config");
        out.mode = self.mode;
        let conv = |s: &[T], d: &mut [U]| {
            d.iter_mut()
                .zip(s)
                .for_each(|(d, s)| *d = U::from_f64(s.as_f64()))
        };
        for (src, dst) in self.layers.iter().zip(&mut out.layers) {
            match (src, dst) {
                (Layer::Conv(s), Layer::Conv(d)) => {
                    conv(s.weight(), d.weight_mut());
                    conv(s.bias(), d.bias_mut());
                }
                (Layer::BatchNorm(s), Layer::BatchNorm(d)) => {
                    let mut bn =
                        BatchNorm2d::with_hyperparameters(s.channels(), s.momentum(), s.eps())
                            .expect("hyperparameters already validated");
                    conv(s.gamma(), bn.gamma_mut());
                    conv(s.beta(), bn.beta_mut());
                    let cast_vec = |v: &[T]| {
                        v.iter()
                            .map(|x| U::from_f64(x.as_f64()))
                            .collect::<Vec<U>>()
                    };
                    bn.set_moving_stats(&cast_vec(s.moving_mean()), &cast_vec(s.moving_var()))
                        .expect("statistics already validated");
                    *d = bn;
                }
                (Layer::Tanh(_), Layer::Tanh(_)) => {}
                _ => unreachable!("same config yields the same layer sequence"),
            }
        }
        out
    }
}

impl<T: Real> Parameterized<T> for Network<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut [T], &mut [T])) {
        for layer in &mut self.layers {
            layer.visit_params(f);
        }
    }
}
