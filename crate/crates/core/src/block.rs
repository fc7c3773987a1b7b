//! MetaNeXt block: token mixer -> norm -> two pointwise layers with GELU ->
//! LayerScale -> single residual shortcut.
//!
//! The ConvNeXt comparator block is the same assembly with a plain
//! depthwise mixer. Batch normalization is used throughout (speed-oriented
//! choice); GELU is the exact erf form, evaluated in f64 via `libm` so
//! checksums do not depend on a platform libc or on a tanh approximation.

use serde::{Deserialize, Serialize};

use crate::conv::{
    dwconv2d, dwconv2d_backward, partial_dwconv, pointwise, pointwise_backward, BranchGrads,
};
use crate::error::{Error, Result};
use crate::mixer::{
    inception_dwconv, inception_dwconv_backward, Branch, BranchConfig, MixerGrads, MixerParams,
};
use crate::rng::SplitMix64;
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

/// Which token mixer a block carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MixerKind {
    /// Inception depthwise convolution.
    Inception { config: BranchConfig },
    /// Full depthwise `k x k` convolution (ConvNeXt style).
    Depthwise { kernel: usize },
    /// Depthwise `k x k` on the first `floor(C * conv_ratio)` channels,
    /// identity on the rest.
    PartialDepthwise { kernel: usize, conv_ratio: f64 },
}

/// Mixer weights matching a [`MixerKind`].
#[derive(Debug, Clone, PartialEq)]
pub enum MixerWeights<T: Scalar> {
    Inception(MixerParams<T>),
    Depthwise(Branch<T>),
    PartialDepthwise(Branch<T>),
}

/// Per-channel batch-norm state: running statistics plus affine transform.
#[derive(Debug, Clone, PartialEq)]
pub struct NormParams<T: Scalar> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub eps: f64,
}

impl<T: Scalar> NormParams<T> {
    pub fn identity(channels: usize, eps: f64) -> Self {
        Self {
            mean: vec![T::ZERO; channels],
            var: vec![T::ONE; channels],
            gamma: vec![T::ONE; channels],
            beta: vec![T::ZERO; channels],
            eps,
        }
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    fn validate(&self, channels: usize) -> Result<()> {
        if self.mean.len() != channels
            || self.var.len() != channels
            || self.gamma.len() != channels
            || self.beta.len() != channels
        {
            return Err(Error::shape(format!(
                "norm parameter vectors must all have length {channels}"
            )));
        }
        if self.eps < 0.0 {
            return Err(Error::config("norm eps must be >= 0"));
        }
        if self.var.iter().any(|v| v.to_f64() < 0.0) {
            return Err(Error::config("norm variance must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    /// Normalize with the stored running statistics.
    Eval,
    /// Normalize with per-channel batch statistics over (N, H, W),
    /// biased variance.
    Train,
}

/// 2-D batch normalization.
pub fn batchnorm2d<T: Scalar>(
    x: &Tensor<T>,
    params: &NormParams<T>,
    mode: NormMode,
) -> Result<Tensor<T>> {
    let Shape { n, c, h, w } = x.shape();
    params.validate(c)?;
    let area = n * h * w;
    let mut out = Tensor::zeros(x.shape());
    for ci in 0..c {
        let (m, v) = match mode {
            NormMode::Eval => (params.mean[ci].to_f64(), params.var[ci].to_f64()),
            NormMode::Train => {
                let mut sum = 0.0;
                for ni in 0..n {
                    let base = x.shape().index(ni, ci, 0, 0);
                    for &val in &x.data()[base..base + h * w] {
                        sum += val.to_f64();
                    }
                }
                let mean = sum / area as f64;
                let mut sq = 0.0;
                for ni in 0..n {
                    let base = x.shape().index(ni, ci, 0, 0);
                    for &val in &x.data()[base..base + h * w] {
                        let d = val.to_f64() - mean;
                        sq += d * d;
                    }
                }
                (mean, sq / area as f64)
            }
        };
        let scale = params.gamma[ci].to_f64() / (v + params.eps).sqrt();
        let shift = params.beta[ci].to_f64() - m * scale;
        let (s, t) = (T::from_f64(scale), T::from_f64(shift));
        for ni in 0..n {
            let base = x.shape().index(ni, ci, 0, 0);
            for p in 0..h * w {
                out.data_mut()[base + p] = x.data()[base + p] * s + t;
            }
        }
    }
    Ok(out)
}

/// Exact GELU on one value: `x * Phi(x)` with the erf-based normal CDF.
pub fn gelu_f64(x: f64) -> f64 {
    x * 0.5 * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2))
}

/// Derivative of [`gelu_f64`]: `Phi(x) + x * phi(x)`.
pub fn gelu_grad_f64(x: f64) -> f64 {
    let phi_cdf = 0.5 * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2));
    let pdf = libm::exp(-0.5 * x * x) / (2.0 * std::f64::consts::PI).sqrt();
    phi_cdf + x * pdf
}

/// Elementwise exact GELU.
pub fn gelu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let mut out = Tensor::zeros(x.shape());
    for (o, &v) in out.data_mut().iter_mut().zip(x.data()) {
        *o = T::from_f64(gelu_f64(v.to_f64()));
    }
    out
}

/// One pointwise (1x1 conv / fully-connected) layer.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseParams<T: Scalar> {
    /// Shape `(out, in, 1, 1)`.
    pub weight: Tensor<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> PointwiseParams<T> {
    pub fn init(in_channels: usize, out_channels: usize, rng: &mut SplitMix64) -> Self {
        let mut weight = Tensor::zeros(Shape::new(out_channels, in_channels, 1, 1));
        for v in weight.data_mut() {
            *v = T::from_f64(rng.normal_f64() * 0.02);
        }
        Self {
            weight,
            bias: vec![T::ZERO; out_channels],
        }
    }
}

/// One MetaNeXt block's weights.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams<T: Scalar> {
    pub mixer: MixerWeights<T>,
    pub norm: NormParams<T>,
    pub fc1: PointwiseParams<T>,
    pub fc2: PointwiseParams<T>,
    /// Per-channel residual scaling; `None` disables LayerScale.
    pub layerscale: Option<Vec<T>>,
}

/// LayerScale initialization value for fresh weights.
pub const LAYERSCALE_INIT: f64 = 1e-6;

impl<T: Scalar> BlockParams<T> {
    /// Fresh block weights: mixer and fc kernels normal(0, 0.02), biases
    /// zero, identity norm statistics, LayerScale at `1e-6`.
    pub fn init(
        channels: usize,
        mlp_ratio: usize,
        kind: &MixerKind,
        rng: &mut SplitMix64,
    ) -> Result<Self> {
        let mixer = match kind {
            MixerKind::Inception { config } => {
                MixerWeights::Inception(MixerParams::init(channels, config, rng)?)
            }
            MixerKind::Depthwise { kernel } => {
                MixerWeights::Depthwise(init_dw_branch(channels, *kernel, rng)?)
            }
            MixerKind::PartialDepthwise { kernel, conv_ratio } => {
                if !(0.0..=1.0).contains(conv_ratio) {
                    return Err(Error::config(format!(
                        "conv_ratio {conv_ratio} outside [0, 1]"
                    )));
                }
                let p = (channels as f64 * conv_ratio) as usize;
                MixerWeights::PartialDepthwise(init_dw_branch(p, *kernel, rng)?)
            }
        };
        let hidden = channels * mlp_ratio;
        Ok(Self {
            mixer,
            norm: NormParams::identity(channels, 1e-5),
            fc1: PointwiseParams::init(channels, hidden, rng),
            fc2: PointwiseParams::init(hidden, channels, rng),
            layerscale: Some(vec![T::from_f64(LAYERSCALE_INIT); channels]),
        })
    }

    pub fn channels(&self) -> usize {
        self.norm.channels()
    }
}

fn init_dw_branch<T: Scalar>(
    channels: usize,
    kernel: usize,
    rng: &mut SplitMix64,
) -> Result<Branch<T>> {
    if kernel % 2 == 0 {
        return Err(Error::config(format!(
            "even mixer kernel {kernel} rejected"
        )));
    }
    let mut weight = Tensor::zeros(Shape::new(channels, 1, kernel, kernel));
    for v in weight.data_mut() {
        *v = T::from_f64(rng.normal_f64() * 0.02);
    }
    Ok(Branch {
        weight,
        bias: vec![T::ZERO; channels],
    })
}

/// Token-mixer dispatch.
pub fn mixer_forward<T: Scalar>(
    x: &Tensor<T>,
    weights: &MixerWeights<T>,
    kind: &MixerKind,
) -> Result<Tensor<T>> {
    match (weights, kind) {
        (MixerWeights::Inception(p), MixerKind::Inception { config }) => {
            inception_dwconv(x, p, config)
        }
        (MixerWeights::Depthwise(b), MixerKind::Depthwise { .. }) => {
            dwconv2d(x, &b.weight, Some(&b.bias))
        }
        (MixerWeights::PartialDepthwise(b), MixerKind::PartialDepthwise { conv_ratio, .. }) => {
            partial_dwconv(x, &b.weight, Some(&b.bias), *conv_ratio)
        }
        _ => Err(Error::config("mixer weights do not match mixer kind")),
    }
}

fn scale_by_channel<T: Scalar>(x: &Tensor<T>, scale: &[T]) -> Tensor<T> {
    let Shape { n, c, h, w } = x.shape();
    let mut out = Tensor::zeros(x.shape());
    for ni in 0..n {
        for ci in 0..c {
            let base = x.shape().index(ni, ci, 0, 0);
            let s = scale[ci];
            for p in 0..h * w {
                out.data_mut()[base + p] = x.data()[base + p] * s;
            }
        }
    }
    out
}

fn add<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    debug_assert_eq!(a.shape(), b.shape());
    let mut out = a.clone();
    for (o, &v) in out.data_mut().iter_mut().zip(b.data()) {
        *o += v;
    }
    out
}

/// Block forward:
/// `y = fc2(gelu(fc1(norm(mixer(x))))) * layerscale + x`.
pub fn metanext_block<T: Scalar>(
    x: &Tensor<T>,
    params: &BlockParams<T>,
    kind: &MixerKind,
) -> Result<Tensor<T>> {
    let mixed = mixer_forward(x, &params.mixer, kind)?;
    let normed = batchnorm2d(&mixed, &params.norm, NormMode::Eval)?;
    let hidden = pointwise(&normed, &params.fc1.weight, Some(&params.fc1.bias))?;
    let activated = gelu(&hidden);
    let projected = pointwise(&activated, &params.fc2.weight, Some(&params.fc2.bias))?;
    let scaled = match &params.layerscale {
        Some(ls) => scale_by_channel(&projected, ls),
        None => projected,
    };
    Ok(add(&scaled, x))
}

/// ConvNeXt block: a MetaNeXt block whose mixer is a full `k x k` depthwise
/// convolution.
pub fn convnext_block<T: Scalar>(
    x: &Tensor<T>,
    params: &BlockParams<T>,
    kernel: usize,
) -> Result<Tensor<T>> {
    match &params.mixer {
        MixerWeights::Depthwise(b) if b.weight.shape().h == kernel => {}
        _ => {
            return Err(Error::config(format!(
                "convnext_block expects a {kernel}x{kernel} depthwise mixer"
            )))
        }
    }
    metanext_block(x, params, &MixerKind::Depthwise { kernel })
}

/// Mixer gradients matching [`MixerWeights`].
#[derive(Debug, Clone)]
pub enum MixerWeightGrads<T: Scalar> {
    Inception(MixerGrads<T>),
    Depthwise(BranchGrads<T>),
    PartialDepthwise(BranchGrads<T>),
}

/// All parameter gradients of one block.
#[derive(Debug, Clone)]
pub struct BlockGrads<T: Scalar> {
    pub mixer: MixerWeightGrads<T>,
    pub norm_gamma: Vec<T>,
    pub norm_beta: Vec<T>,
    pub fc1: BranchGrads<T>,
    pub fc2: BranchGrads<T>,
    pub layerscale: Option<Vec<T>>,
}

fn mixer_backward<T: Scalar>(
    x: &Tensor<T>,
    weights: &MixerWeights<T>,
    kind: &MixerKind,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, MixerWeightGrads<T>)> {
    match (weights, kind) {
        (MixerWeights::Inception(p), MixerKind::Inception { config }) => {
            let (gx, grads) = inception_dwconv_backward(x, p, config, grad_out)?;
            Ok((gx, MixerWeightGrads::Inception(grads)))
        }
        (MixerWeights::Depthwise(b), MixerKind::Depthwise { .. }) => {
            let grads = dwconv2d_backward(x, &b.weight, grad_out)?;
            Ok((
                grads.grad_x,
                MixerWeightGrads::Depthwise(BranchGrads {
                    weight: grads.grad_weight,
                    bias: grads.grad_bias,
                }),
            ))
        }
        (MixerWeights::PartialDepthwise(b), MixerKind::PartialDepthwise { conv_ratio, .. }) => {
            let c = x.shape().c;
            let p = (c as f64 * conv_ratio) as usize;
            if p == 0 {
                return Ok((
                    grad_out.clone(),
                    MixerWeightGrads::PartialDepthwise(BranchGrads {
                        weight: Tensor::zeros(b.weight.shape()),
                        bias: vec![],
                    }),
                ));
            }
            let xs = x.split_channels(&[p, c - p])?;
            let gs = grad_out.split_channels(&[p, c - p])?;
            let grads = dwconv2d_backward(&xs[0], &b.weight, &gs[0])?;
            let gx = Tensor::concat_channels(&[grads.grad_x, gs[1].clone()])?;
            Ok((
                gx,
                MixerWeightGrads::PartialDepthwise(BranchGrads {
                    weight: grads.grad_weight,
                    bias: grads.grad_bias,
                }),
            ))
        }
        _ => Err(Error::config("mixer weights do not match mixer kind")),
    }
}

/// Analytic backward of [`metanext_block`] with eval-mode norm.
pub fn metanext_block_backward<T: Scalar>(
    x: &Tensor<T>,
    params: &BlockParams<T>,
    kind: &MixerKind,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, BlockGrads<T>)> {
    if grad_out.shape() != x.shape() {
        return Err(Error::shape(format!(
            "grad_out shape {} != input shape {}",
            grad_out.shape(),
            x.shape()
        )));
    }
    let Shape { n, c, h, w } = x.shape();

    // Forward pass, keeping intermediates.
    let mixed = mixer_forward(x, &params.mixer, kind)?;
    let normed = batchnorm2d(&mixed, &params.norm, NormMode::Eval)?;
    let hidden = pointwise(&normed, &params.fc1.weight, Some(&params.fc1.bias))?;
    let activated = gelu(&hidden);
    let projected = pointwise(&activated, &params.fc2.weight, Some(&params.fc2.bias))?;

    // grad_layerscale and grad through the scaling.
    let (grad_proj, grad_ls) = match &params.layerscale {
        Some(ls) => {
            let mut gls = vec![T::ZERO; c];
            for ni in 0..n {
                for ci in 0..c {
                    let base = x.shape().index(ni, ci, 0, 0);
                    for p in 0..h * w {
                        gls[ci] += grad_out.data()[base + p] * projected.data()[base + p];
                    }
                }
            }
            (scale_by_channel(grad_out, ls), Some(gls))
        }
        None => (grad_out.clone(), None),
    };

    let fc2_grads = pointwise_backward(&activated, &params.fc2.weight, &grad_proj)?;

    // GELU backward.
    let mut grad_hidden = fc2_grads.grad_x;
    for (g, &hv) in grad_hidden.data_mut().iter_mut().zip(hidden.data()) {
        *g *= T::from_f64(gelu_grad_f64(hv.to_f64()));
    }

    let fc1_grads = pointwise_backward(&normed, &params.fc1.weight, &grad_hidden)?;

    // Eval-mode norm backward: y = x * s + t per channel.
    let grad_normed = fc1_grads.grad_x;
    let mut grad_mixed = Tensor::zeros(x.shape());
    let mut grad_gamma = vec![T::ZERO; c];
    let mut grad_beta = vec![T::ZERO; c];
    for ci in 0..c {
        let inv_std = 1.0 / (params.norm.var[ci].to_f64() + params.norm.eps).sqrt();
        let scale = T::from_f64(params.norm.gamma[ci].to_f64() * inv_std);
        let mean = params.norm.mean[ci];
        let inv = T::from_f64(inv_std);
        for ni in 0..n {
            let base = x.shape().index(ni, ci, 0, 0);
            for p in 0..h * w {
                let g = grad_normed.data()[base + p];
                grad_mixed.data_mut()[base + p] = g * scale;
                grad_gamma[ci] += g * (mixed.data()[base + p] - mean) * inv;
                grad_beta[ci] += g;
            }
        }
    }

    let (grad_x_mixer, mixer_grads) = mixer_backward(x, &params.mixer, kind, &grad_mixed)?;
    let grad_x = add(&grad_x_mixer, grad_out);

    Ok((
        grad_x,
        BlockGrads {
            mixer: mixer_grads,
            norm_gamma: grad_gamma,
            norm_beta: grad_beta,
            fc1: BranchGrads {
                weight: fc1_grads.grad_weight,
                bias: fc1_grads.grad_bias,
            },
            fc2: BranchGrads {
                weight: fc2_grads.grad_weight,
                bias: fc2_grads.grad_bias,
            },
            layerscale: grad_ls,
        },
    ))
}
