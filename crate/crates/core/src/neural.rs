//! From-scratch neural-network engine: dense and 3x3 convolutional layers,
//! LeakyReLU activations, mean-squared-error loss with backpropagation, and
//! (in the submodules) Adam optimization and the training loop.
//!
//! The engine is generic over the scalar type: training runs in `f32`, while
//! gradient-verification tests instantiate the same code in `f64` and compare
//! against central finite differences.
//!
//! A network maps a focused multichannel patch `[n_channels_in x n_time]`
//! (flattened row-major) to an emulated patch `[n_channels_out x n_time]`.
//! The standard stack is three dense layers followed by three convolutional
//! layers over the `[n_channels_out x n_time]` image, every layer but the
//! last followed by LeakyReLU.

mod adam;
mod kernels;
mod train;

pub use adam::{adam_step, AdamHyper, TrainState};
pub use train::{train, EpochStats, TrainConfig, TrainSet};

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor;

/// Scalar abstraction so the same layer code runs in `f32` and `f64`.
pub trait Float:
    Copy
    + PartialOrd
    + std::fmt::Debug
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    const ZERO: Self;
    const ONE: Self;
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn mul_add(self, a: Self, b: Self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
}

impl Float for f32 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn mul_add(self, a: Self, b: Self) -> Self {
        f32::mul_add(self, a, b)
    }
    fn sqrt(self) -> Self {
        f32::sqrt(self)
    }
    fn abs(self) -> Self {
        f32::abs(self)
    }
}

impl Float for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn mul_add(self, a: Self, b: Self) -> Self {
        f64::mul_add(self, a, b)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
}

/// Channel/time dimensions of the patches a network maps between. The output
/// channel count is locked to `2 * n_channels_in - 1`: the emulated array has
/// twice the aperture of the input array on the shared pitch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchShape {
    pub n_channels_in: usize,
    pub n_channels_out: usize,
    pub n_time: usize,
}

impl PatchShape {
    pub fn new(n_channels_in: usize, n_time: usize) -> Result<PatchShape> {
        if n_channels_in == 0 || n_time == 0 {
            return Err(Error::InvalidArgument("patch shape dimensions must be positive".into()));
        }
        Ok(PatchShape { n_channels_in, n_channels_out: 2 * n_channels_in - 1, n_time })
    }

    pub fn in_len(&self) -> usize {
        self.n_channels_in * self.n_time
    }

    pub fn out_len(&self) -> usize {
        self.n_channels_out * self.n_time
    }
}

/// Feature-map counts of the three convolutional layers.
pub const CONV_FEATURE_MAPS: [usize; 3] = [16, 16, 1];

/// Structural knobs of the standard network stack.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    /// Widths of the first two dense layers; the third dense layer always
    /// projects to `n_channels_out * n_time` so the image reshape fits.
    pub dense_widths: Vec<usize>,
    /// Negative-side slope of every LeakyReLU activation.
    pub leaky_slope: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig { dense_widths: vec![256, 256], leaky_slope: 0.3 }
    }
}

/// One layer of the network. Weight layouts: dense `[n_out, n_in]` row-major;
/// conv `[c_out, c_in, 3, 3]` operating on a `[channels, height, width]`
/// image with zero ("same") padding.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer<F: Float> {
    Dense { w: Vec<F>, b: Vec<F>, n_in: usize, n_out: usize },
    Conv2d { w: Vec<F>, b: Vec<F>, c_in: usize, c_out: usize, h: usize, wd: usize },
    LeakyRelu { slope: F },
    Reshape { c: usize, h: usize, w: usize },
}

impl<F: Float> Layer<F> {
    pub fn dense(n_in: usize, n_out: usize) -> Layer<F> {
        Layer::Dense { w: vec![F::ZERO; n_in * n_out], b: vec![F::ZERO; n_out], n_in, n_out }
    }

    pub fn conv2d(c_in: usize, c_out: usize, h: usize, wd: usize) -> Layer<F> {
        Layer::Conv2d { w: vec![F::ZERO; c_out * c_in * 9], b: vec![F::ZERO; c_out], c_in, c_out, h, wd }
    }

    fn out_len(&self, in_len: usize) -> Result<usize> {
        let expect_in = match self {
            Layer::Dense { n_in, .. } => *n_in,
            Layer::Conv2d { c_in, h, wd, .. } => c_in * h * wd,
            Layer::LeakyRelu { .. } => in_len,
            Layer::Reshape { c, h, w } => c * h * w,
        };
        if expect_in != in_len {
            return Err(Error::InvalidArgument(format!(
                "layer expects input length {expect_in}, previous layer produces {in_len}"
            )));
        }
        Ok(match self {
            Layer::Dense { n_out, .. } => *n_out,
            Layer::Conv2d { c_out, h, wd, .. } => c_out * h * wd,
            Layer::LeakyRelu { .. } | Layer::Reshape { .. } => in_len,
        })
    }

    fn n_parameters(&self) -> usize {
        match self {
            Layer::Dense { w, b, .. } | Layer::Conv2d { w, b, .. } => w.len() + b.len(),
            _ => 0,
        }
    }

    fn forward(&self, x: &[F], out: &mut Vec<F>, scratch: &mut Vec<F>) {
        match self {
            Layer::Dense { w, b, n_in, n_out } => {
                out.clear();
                out.extend((0..*n_out).map(|j| b[j] + kernels::dot(&w[j * n_in..][..*n_in], x)));
            }
            Layer::Conv2d { w, b, c_in, c_out, h, wd } => {
                out.clear();
                for o in 0..*c_out {
                    out.extend(std::iter::repeat(b[o]).take(h * wd));
                }
                // Zero-padded input rows let one fused pass apply all three
                // column taps of a kernel row with no edge branches.
                kernels::pad_planes(x, *c_in, *h, *wd, scratch);
                let pw = wd + 2;
                for o in 0..*c_out {
                    for i in 0..*c_in {
                        let k9 = &w[(o * c_in + i) * 9..][..9];
                        for ky in 0..3usize {
                            let dy = ky as isize - 1;
                            let taps = [k9[ky * 3], k9[ky * 3 + 1], k9[ky * 3 + 2]];
                            for y in row_range(*h, dy) {
                                let ys = (y as isize + dy) as usize;
                                let src = &scratch[(i * h + ys) * pw..][..pw];
                                let dst = &mut out[(o * h + y) * wd..][..*wd];
                                kernels::add_3tap(taps, src, dst);
                            }
                        }
                    }
                }
            }
            Layer::LeakyRelu { slope } => {
                out.clear();
                out.extend(x.iter().map(|&v| if v > F::ZERO { v } else { v * *slope }));
            }
            Layer::Reshape { .. } => {
                out.clear();
                out.extend_from_slice(x);
            }
        }
    }

    /// Backpropagates through the layer: given the cached input `x` and the
    /// loss gradient `gy` with respect to the output, writes the gradient
    /// with respect to the input into `gx` and accumulates parameter
    /// gradients into `grads`.
    fn backward(
        &self,
        x: &[F],
        gy: &[F],
        gx: &mut Vec<F>,
        grads: &mut LayerGrads<F>,
        scratch: &mut Vec<F>,
    ) {
        match self {
            Layer::Dense { w, n_in, n_out, .. } => {
                gx.clear();
                gx.resize(*n_in, F::ZERO);
                for j in 0..*n_out {
                    kernels::axpy(gy[j], &w[j * n_in..][..*n_in], gx);
                }
                for j in 0..*n_out {
                    kernels::axpy(gy[j], x, &mut grads.w[j * n_in..][..*n_in]);
                    grads.b[j] = grads.b[j] + gy[j];
                }
            }
            Layer::Conv2d { w, c_in, c_out, h, wd, .. } => {
                gx.clear();
                gx.resize(c_in * h * wd, F::ZERO);
                let pw = wd + 2;
                // Input gradient: correlate the output gradient with the
                // 180-degree-rotated kernels, again as fused padded rows.
                kernels::pad_planes(gy, *c_out, *h, *wd, scratch);
                for i in 0..*c_in {
                    for o in 0..*c_out {
                        let k9 = &w[(o * c_in + i) * 9..][..9];
                        for ky in 0..3usize {
                            let dy = ky as isize - 1;
                            let taps = [k9[ky * 3 + 2], k9[ky * 3 + 1], k9[ky * 3]];
                            // gx[y] accumulates from gy[y - dy].
                            for y in row_range(*h, -dy) {
                                let ys = (y as isize - dy) as usize;
                                let src = &scratch[(o * h + ys) * pw..][..pw];
                                let dst = &mut gx[(i * h + y) * wd..][..*wd];
                                kernels::add_3tap(taps, src, dst);
                            }
                        }
                    }
                }
                // Weight and bias gradients from the padded input planes.
                kernels::pad_planes(x, *c_in, *h, *wd, scratch);
                for o in 0..*c_out {
                    let mut bsum = F::ZERO;
                    for &g in &gy[o * h * wd..(o + 1) * h * wd] {
                        bsum = bsum + g;
                    }
                    grads.b[o] = grads.b[o] + bsum;
                    for i in 0..*c_in {
                        let base = (o * c_in + i) * 9;
                        for ky in 0..3usize {
                            let dy = ky as isize - 1;
                            let mut acc = kernels::tap_acc_zero();
                            for y in row_range(*h, dy) {
                                let ys = (y as isize + dy) as usize;
                                let g = &gy[(o * h + y) * wd..][..*wd];
                                let src = &scratch[(i * h + ys) * pw..][..pw];
                                kernels::wgrad_3tap(g, src, &mut acc);
                            }
                            for kx in 0..3usize {
                                let widx = base + ky * 3 + kx;
                                grads.w[widx] = grads.w[widx] + kernels::tap_reduce(&acc[kx]);
                            }
                        }
                    }
                }
            }
            Layer::LeakyRelu { slope } => {
                gx.clear();
                gx.extend(
                    x.iter()
                        .zip(gy)
                        .map(|(&xi, &gi)| if xi > F::ZERO { gi } else { gi * *slope }),
                );
            }
            Layer::Reshape { .. } => {
                gx.clear();
                gx.extend_from_slice(gy);
            }
        }
    }
}

/// Output rows `y` for which the shifted input row `y + dy` exists.
fn row_range(h: usize, dy: isize) -> std::ops::Range<usize> {
    let lo = if dy < 0 { 1 } else { 0 };
    let hi = if dy > 0 { h - 1 } else { h };
    lo..hi.max(lo)
}

/// Parameter gradients (or optimizer moments) shaped like one layer's
/// parameters; empty for parameterless layers.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads<F: Float> {
    pub w: Vec<F>,
    pub b: Vec<F>,
}

/// Gradients for every layer of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<F: Float> {
    pub layers: Vec<LayerGrads<F>>,
}

impl<F: Float> Gradients<F> {
    pub fn zeroed(net: &Network<F>) -> Gradients<F> {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| match l {
                    Layer::Dense { w, b, .. } | Layer::Conv2d { w, b, .. } => LayerGrads {
                        w: vec![F::ZERO; w.len()],
                        b: vec![F::ZERO; b.len()],
                    },
                    _ => LayerGrads { w: Vec::new(), b: Vec::new() },
                })
                .collect(),
        }
    }

    pub fn zero(&mut self) {
        for l in &mut self.layers {
            l.w.fill(F::ZERO);
            l.b.fill(F::ZERO);
        }
    }
}

/// Scratch buffers for one forward/backward pass; reuse across examples to
/// avoid per-example allocation.
#[derive(Debug, Default)]
pub struct Workspace<F: Float> {
    /// `acts[0]` is the input; `acts[k + 1]` the output of layer `k`.
    acts: Vec<Vec<F>>,
    /// Loss gradients with respect to each activation, same shapes.
    gacts: Vec<Vec<F>>,
    /// Padded-plane scratch shared by the convolution kernels.
    scratch: Vec<F>,
}

impl<F: Float> Workspace<F> {
    pub fn new() -> Workspace<F> {
        Workspace { acts: Vec::new(), gacts: Vec::new(), scratch: Vec::new() }
    }

    fn ensure(&mut self, n_layers: usize) {
        self.acts.resize_with(n_layers + 1, Vec::new);
        self.gacts.resize_with(n_layers + 1, Vec::new);
    }

    /// Network output after `forward_cached`.
    pub fn output(&self) -> &[F] {
        self.acts.last().map(|v| v.as_slice()).unwrap_or(&[])
    }
}

/// A feed-forward network: an input/output patch shape plus a composed layer
/// stack. Immutable during inference; the optimizer mutates parameters
/// through `params_mut`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<F: Float> {
    shape: PatchShape,
    layers: Vec<Layer<F>>,
}

impl<F: Float> Network<F> {
    /// Builds a network from an explicit layer stack, validating that the
    /// shapes compose from `shape.in_len()` to `shape.out_len()`.
    pub fn new(shape: PatchShape, layers: Vec<Layer<F>>) -> Result<Network<F>> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("network needs at least one layer".into()));
        }
        let mut len = shape.in_len();
        for layer in &layers {
            len = layer.out_len(len)?;
        }
        if len != shape.out_len() {
            return Err(Error::InvalidArgument(format!(
                "layer stack produces length {len}, patch shape needs {}",
                shape.out_len()
            )));
        }
        Ok(Network { shape, layers })
    }

    pub fn shape(&self) -> PatchShape {
        self.shape
    }

    pub fn layers(&self) -> &[Layer<F>] {
        &self.layers
    }

    pub fn n_parameters(&self) -> usize {
        self.layers.iter().map(Layer::n_parameters).sum()
    }

    /// Runs the network on a flattened `[n_channels_in x n_time]` patch.
    pub fn forward(&self, patch: &[F]) -> Result<Vec<F>> {
        let mut ws = Workspace::new();
        self.forward_cached(patch, &mut ws)?;
        Ok(ws.acts.pop().unwrap())
    }

    /// Forward pass that caches every activation in `ws` for a later
    /// `backward` call.
    pub fn forward_cached(&self, patch: &[F], ws: &mut Workspace<F>) -> Result<()> {
        if patch.len() != self.shape.in_len() {
            return Err(Error::InvalidArgument(format!(
                "input patch has {} values, network expects {}",
                patch.len(),
                self.shape.in_len()
            )));
        }
        ws.ensure(self.layers.len());
        ws.acts[0].clear();
        ws.acts[0].extend_from_slice(patch);
        for (k, layer) in self.layers.iter().enumerate() {
            let (before, after) = ws.acts.split_at_mut(k + 1);
            layer.forward(&before[k], &mut after[0], &mut ws.scratch);
        }
        Ok(())
    }

    /// Backpropagates the output gradient already stored in the workspace's
    /// last gradient slot, accumulating parameter gradients into `grads`.
    fn backward(&self, ws: &mut Workspace<F>, grads: &mut Gradients<F>) {
        for k in (0..self.layers.len()).rev() {
            let (gin, gout) = {
                let (a, b) = ws.gacts.split_at_mut(k + 1);
                (&mut a[k], &mut b[0])
            };
            self.layers[k].backward(
                &ws.acts[k],
                gout,
                gin,
                &mut grads.layers[k],
                &mut ws.scratch,
            );
        }
    }

    /// Visits every parameter tensor in layer order (weights then bias).
    pub fn params_mut(&mut self) -> Vec<(&mut Vec<F>, &mut Vec<F>)> {
        self.layers
            .iter_mut()
            .filter_map(|l| match l {
                Layer::Dense { w, b, .. } | Layer::Conv2d { w, b, .. } => Some((w, b)),
                _ => None,
            })
            .collect()
    }
}

/// Mean-squared-error loss over a batch and its parameter gradients.
///
/// `batch_in` is `batch x in_len` and `batch_target` is `batch x out_len`,
/// both flattened row-major. Returns the loss (mean over every batch element
/// and tensor entry of the squared difference); gradients accumulate into
/// `grads`, which is zeroed first.
pub fn loss_and_grads<F: Float>(
    net: &Network<F>,
    batch_in: &[F],
    batch_target: &[F],
    ws: &mut Workspace<F>,
    grads: &mut Gradients<F>,
) -> Result<f64> {
    let in_len = net.shape.in_len();
    let out_len = net.shape.out_len();
    if batch_in.is_empty() || batch_in.len() % in_len != 0 {
        return Err(Error::InvalidArgument(format!(
            "batch input length {} is not a positive multiple of {in_len}",
            batch_in.len()
        )));
    }
    let batch = batch_in.len() / in_len;
    if batch_target.len() != batch * out_len {
        return Err(Error::InvalidArgument(format!(
            "batch target length {} does not match {batch} examples of {out_len}",
            batch_target.len()
        )));
    }
    grads.zero();
    let norm = 2.0 / (batch as f64 * out_len as f64);
    let scale = F::from_f64(norm);
    let mut total_sq = 0.0f64;
    for e in 0..batch {
        net.forward_cached(&batch_in[e * in_len..][..in_len], ws)?;
        let target = &batch_target[e * out_len..][..out_len];
        let last = ws.gacts.last_mut().unwrap();
        last.clear();
        let pred = ws.acts.last().unwrap();
        for (p, t) in pred.iter().zip(target) {
            let d = *p - *t;
            total_sq += d.to_f64() * d.to_f64();
            last.push(d * scale);
        }
        net.backward(ws, grads);
    }
    Ok(total_sq / (batch as f64 * out_len as f64))
}

/// Mean-squared error of the network over a batch, without gradients.
pub fn batch_loss<F: Float>(
    net: &Network<F>,
    batch_in: &[F],
    batch_target: &[F],
    ws: &mut Workspace<F>,
) -> Result<f64> {
    let in_len = net.shape.in_len();
    let out_len = net.shape.out_len();
    if batch_in.is_empty() || batch_in.len() % in_len != 0 {
        return Err(Error::InvalidArgument("empty or misshapen batch".into()));
    }
    let batch = batch_in.len() / in_len;
    if batch_target.len() != batch * out_len {
        return Err(Error::InvalidArgument("batch target length mismatch".into()));
    }
    let mut total_sq = 0.0f64;
    for e in 0..batch {
        net.forward_cached(&batch_in[e * in_len..][..in_len], ws)?;
        let pred = ws.acts.last().unwrap();
        for (p, t) in pred.iter().zip(&batch_target[e * out_len..][..out_len]) {
            let d = p.to_f64() - t.to_f64();
            total_sq += d * d;
        }
    }
    Ok(total_sq / (batch as f64 * out_len as f64))
}

/// Builds the standard stack — dense(w1), dense(w2), dense(out_len), then
/// three 3x3 convolutions with feature maps 16, 16, 1 over the output image —
/// with LeakyReLU after every layer except the final one. Weights are
/// Glorot-uniform (`|w| <= sqrt(6 / (fan_in + fan_out))`), biases zero,
/// deterministic per seed.
pub fn init_network<F: Float>(
    shape: PatchShape,
    cfg: &NetworkConfig,
    seed: u64,
) -> Result<Network<F>> {
    if cfg.dense_widths.len() != 2 || cfg.dense_widths.iter().any(|&w| w == 0) {
        return Err(Error::InvalidArgument(
            "network config needs exactly two positive dense widths".into(),
        ));
    }
    if !(cfg.leaky_slope.is_finite() && cfg.leaky_slope >= 0.0) {
        return Err(Error::InvalidArgument("leaky slope must be finite and nonnegative".into()));
    }
    let slope = F::from_f64(cfg.leaky_slope);
    let (h, wd) = (shape.n_channels_out, shape.n_time);
    let relu = || Layer::LeakyRelu { slope };
    let mut layers: Vec<Layer<F>> = vec![
        Layer::dense(shape.in_len(), cfg.dense_widths[0]),
        relu(),
        Layer::dense(cfg.dense_widths[0], cfg.dense_widths[1]),
        relu(),
        Layer::dense(cfg.dense_widths[1], shape.out_len()),
        relu(),
        Layer::Reshape { c: 1, h, w: wd },
        Layer::conv2d(1, CONV_FEATURE_MAPS[0], h, wd),
        relu(),
        Layer::conv2d(CONV_FEATURE_MAPS[0], CONV_FEATURE_MAPS[1], h, wd),
        relu(),
        Layer::conv2d(CONV_FEATURE_MAPS[1], CONV_FEATURE_MAPS[2], h, wd),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for layer in &mut layers {
        match layer {
            Layer::Dense { w, n_in, n_out, .. } => {
                glorot_fill(&mut rng, w, *n_in, *n_out);
            }
            Layer::Conv2d { w, c_in, c_out, .. } => {
                glorot_fill(&mut rng, w, *c_in * 9, *c_out * 9);
            }
            _ => {}
        }
    }
    Network::new(shape, layers)
}

fn glorot_fill<F: Float>(rng: &mut ChaCha8Rng, w: &mut [F], fan_in: usize, fan_out: usize) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in w {
        *v = F::from_f64((2.0 * rng.gen::<f64>() - 1.0) * limit);
    }
}

const WEIGHTS_KIND: &str = "network-weights";

/// Serializes the network structure and parameters to a record file.
pub fn save_weights(net: &Network<f32>, path: &Path) -> Result<()> {
    let mut desc = String::new();
    for (i, layer) in net.layers.iter().enumerate() {
        if i > 0 {
            desc.push_str(" | ");
        }
        match layer {
            Layer::Dense { n_in, n_out, .. } => desc.push_str(&format!("dense {n_in} {n_out}")),
            Layer::Conv2d { c_in, c_out, h, wd, .. } => {
                desc.push_str(&format!("conv {c_in} {c_out} {h} {wd}"));
            }
            Layer::LeakyRelu { slope } => desc.push_str(&format!("relu {}", slope.to_f64())),
            Layer::Reshape { c, h, w } => desc.push_str(&format!("reshape {c} {h} {w}")),
        }
    }
    let header = tensor::render_header(&[
        ("kind", WEIGHTS_KIND.to_string()),
        ("n_channels_in", net.shape.n_channels_in.to_string()),
        ("n_channels_out", net.shape.n_channels_out.to_string()),
        ("n_time", net.shape.n_time.to_string()),
        ("layers", desc),
    ]);
    let mut records = Vec::new();
    for layer in &net.layers {
        match layer {
            Layer::Dense { w, b, n_in, n_out } => {
                records.push(tensor::Tensor::from_slice(&[*n_out, *n_in], w)?);
                records.push(tensor::Tensor::from_slice(&[*n_out], b)?);
            }
            Layer::Conv2d { w, b, c_in, c_out, .. } => {
                records.push(tensor::Tensor::from_slice(&[*c_out, *c_in, 3, 3], w)?);
                records.push(tensor::Tensor::from_slice(&[*c_out], b)?);
            }
            _ => {}
        }
    }
    tensor::write_records(path, &header, &records)
}

fn header_error(message: impl Into<String>) -> Error {
    Error::Format { offset: 0, message: message.into() }
}

fn lookup<'a>(pairs: &'a [(String, String)], key: &str) -> Result<&'a str> {
    pairs
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| header_error(format!("weights header is missing `{key}`")))
}

fn parse_num<T: std::str::FromStr>(v: &str, what: &str) -> Result<T> {
    v.parse().map_err(|_| header_error(format!("cannot parse {what} from `{v}`")))
}

/// Loads a network saved by `save_weights`; the round trip is bit-exact.
pub fn load_weights(path: &Path) -> Result<Network<f32>> {
    let file = tensor::read_records(path)?;
    let pairs = tensor::parse_header(&file.header)?;
    if lookup(&pairs, "kind")? != WEIGHTS_KIND {
        return Err(header_error("file is not a network-weights artifact"));
    }
    let n_in: usize = parse_num(lookup(&pairs, "n_channels_in")?, "n_channels_in")?;
    let n_out: usize = parse_num(lookup(&pairs, "n_channels_out")?, "n_channels_out")?;
    let n_time: usize = parse_num(lookup(&pairs, "n_time")?, "n_time")?;
    let shape = PatchShape::new(n_in, n_time)?;
    if shape.n_channels_out != n_out {
        return Err(header_error(format!(
            "inconsistent channel counts {n_in} -> {n_out} in weights header"
        )));
    }
    let mut layers: Vec<Layer<f32>> = Vec::new();
    for item in lookup(&pairs, "layers")?.split('|') {
        let toks: Vec<&str> = item.split_whitespace().collect();
        let layer = match toks.as_slice() {
            ["dense", a, b] => Layer::dense(parse_num(a, "dense n_in")?, parse_num(b, "dense n_out")?),
            ["conv", ci, co, h, w] => Layer::conv2d(
                parse_num(ci, "conv c_in")?,
                parse_num(co, "conv c_out")?,
                parse_num(h, "conv height")?,
                parse_num(w, "conv width")?,
            ),
            ["relu", s] => Layer::LeakyRelu { slope: parse_num::<f32>(s, "relu slope")? },
            ["reshape", c, h, w] => Layer::Reshape {
                c: parse_num(c, "reshape channels")?,
                h: parse_num(h, "reshape height")?,
                w: parse_num(w, "reshape width")?,
            },
            _ => return Err(header_error(format!("unknown layer descriptor `{item}`"))),
        };
        layers.push(layer);
    }
    let mut records = file.records.into_iter();
    for layer in &mut layers {
        let (w, b, wdims, bdim): (&mut Vec<f32>, &mut Vec<f32>, Vec<u64>, u64) = match layer {
            Layer::Dense { w, b, n_in, n_out } => {
                let dims = vec![*n_out as u64, *n_in as u64];
                let nb = *n_out as u64;
                (w, b, dims, nb)
            }
            Layer::Conv2d { w, b, c_in, c_out, .. } => {
                let dims = vec![*c_out as u64, *c_in as u64, 3, 3];
                let nb = *c_out as u64;
                (w, b, dims, nb)
            }
            _ => continue,
        };
        let wt = records
            .next()
            .ok_or_else(|| header_error("weights file has fewer records than layers"))?;
        if wt.dims != wdims {
            return Err(header_error(format!(
                "weight record dims {:?} do not match layer dims {:?}",
                wt.dims, wdims
            )));
        }
        *w = wt.data;
        let bt = records
            .next()
            .ok_or_else(|| header_error("weights file has fewer records than layers"))?;
        if bt.dims != vec![bdim] {
            return Err(header_error(format!(
                "bias record dims {:?} do not match layer size {bdim}",
                bt.dims
            )));
        }
        *b = bt.data;
    }
    if records.next().is_some() {
        return Err(header_error("weights file has more records than layers"));
    }
    Network::new(shape, layers)
}
